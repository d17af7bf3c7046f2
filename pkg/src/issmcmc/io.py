"""Dataset and chain CSV files, JSON manifests and reports.

Floats are written with 17 significant digits so files reload bit-exactly.
Column layouts are documented in FORMATS.md.
"""

from __future__ import annotations

import csv
import json
import os
from pathlib import Path
from typing import Optional

import numpy as np

from .core import Dataset
from .samplers import ChainRecord

FLOAT = "{:.17g}"


def _fmt(x) -> str:
    return FLOAT.format(float(x))


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def write_json(path, payload) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=_json_default, allow_nan=True)
        fh.write("\n")


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


# ---------------------------------------------------------------------------
# datasets


def dataset_columns(dataset: Dataset):
    kind = dataset.kind
    if kind == "logistic":
        d = dataset.X.shape[1]
        header = ["k"] + [f"x_{j}" for j in range(d)] + ["y"]
        cols = [dataset.X[:, j] for j in range(d)] + [dataset.y]
    elif kind == "gaussmix":
        header = ["k", "p_0", "p_1", "label"]
        cols = [dataset.y[:, 0], dataset.y[:, 1], dataset.labels]
    elif kind in ("probit", "ar2"):
        header = ["k", "y"]
        cols = [dataset.y]
    else:
        raise ValueError(f"unknown dataset kind {kind!r}")
    return header, cols


def write_dataset(path, dataset: Dataset) -> None:
    header, cols = dataset_columns(dataset)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    ints = {"label"}
    with open(path, "w", newline="") as fh:
        fh.write(f"# kind={dataset.kind}\n")
        fh.write(",".join(header) + "\n")
        names = header[1:]
        for k in range(dataset.N):
            vals = [str(int(c[k])) if name in ints else _fmt(c[k]) for name, c in zip(names, cols)]
            fh.write(f"{k}," + ",".join(vals) + "\n")


def read_dataset(path) -> Dataset:
    path = Path(path)
    with open(path) as fh:
        first = fh.readline().strip()
        if not first.startswith("# kind="):
            raise ValueError(f"{path}: missing '# kind=' header line")
        kind = first.split("=", 1)[1]
        reader = csv.reader(fh)
        header = next(reader)
        rows = [r for r in reader if r]
    if not rows:
        raise ValueError(f"{path}: no observations")
    table = np.array(rows, dtype=float)
    col = {name: table[:, i] for i, name in enumerate(header)}
    if not np.array_equal(col["k"], np.arange(len(rows))):
        raise ValueError(f"{path}: observation index column must be 0..N-1 in order")
    if kind == "logistic":
        xs = sorted((h for h in header if h.startswith("x_")), key=lambda h: int(h[2:]))
        return Dataset(col["y"], X=np.column_stack([col[h] for h in xs]), kind=kind)
    if kind == "gaussmix":
        return Dataset(np.column_stack([col["p_0"], col["p_1"]]), labels=col["label"].astype(np.int64), kind=kind)
    if kind in ("probit", "ar2"):
        return Dataset(col["y"], kind=kind)
    raise ValueError(f"{path}: unknown dataset kind {kind!r}")


# ---------------------------------------------------------------------------
# chains

CHAIN_TAIL = ["subset_key", "param_accept", "subset_accept", "log_target", "t_wall_ns"]


def write_chain(path, record: ChainRecord, timing: bool = True) -> None:
    """One row per iteration. With ``timing=False`` the clock column is zeroed
    so that repeated runs produce byte-identical files."""
    d = record.theta.shape[1]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    keys = record.subset_key if record.subset_key else [""] * len(record)
    tw = record.t_wall_ns if timing else np.zeros(len(record), np.int64)
    header = ["iter"] + [f"theta_{j}" for j in range(d)] + CHAIN_TAIL
    lines = [",".join(header)]
    theta = record.theta
    for i in range(len(record)):
        lines.append(",".join([str(i)] + [_fmt(v) for v in theta[i]] + [
            keys[i], str(int(record.param_accept[i])), str(int(record.subset_accept[i])),
            _fmt(record.log_target[i]), str(int(tw[i]))]))
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    os.replace(tmp, path)


def read_chain(path, burn_in: Optional[int] = None) -> ChainRecord:
    with open(path) as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [r for r in reader if r]
    thetas = [i for i, h in enumerate(header) if h.startswith("theta_")]
    idx = {h: i for i, h in enumerate(header)}
    missing = [c for c in ["iter"] + CHAIN_TAIL if c not in idx]
    if missing or not thetas:
        raise ValueError(f"{path}: not a chain file (missing {missing or 'theta columns'})")
    theta = np.array([[float(r[i]) for i in thetas] for r in rows])
    rec = ChainRecord(
        theta=theta,
        param_accept=np.array([r[idx["param_accept"]] == "1" for r in rows]),
        subset_accept=np.array([r[idx["subset_accept"]] == "1" for r in rows]),
        log_target=np.array([float(r[idx["log_target"]]) for r in rows]),
        t_wall_ns=np.array([int(r[idx["t_wall_ns"]]) for r in rows], dtype=np.int64),
        subset_key=[r[idx["subset_key"]] for r in rows],
        burn_in=0 if burn_in is None else int(burn_in),
    )
    return rec


def write_points(path, header, columns) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in zip(*columns):
            fh.write(",".join(str(v) if isinstance(v, (int, np.integer, str)) else _fmt(v) for v in row) + "\n")
