"""Command-line experiment runner.

Subcommands: generate, run, validate-stats, diagnose. Settings come from
built-in defaults, then an optional JSON config file (``--config``), then
explicit flags. Exit codes: 0 success, 1 usage error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .core import SamplerConfig
from .io import read_chain, read_dataset, read_json, write_chain, write_dataset, write_json, write_points
from .models import MODELS, build_model

log = logging.getLogger("issmcmc")

DEFAULT_THETA = {
    "probit": [1.0],
    "ar2": [1.0, -0.5, 1.0],
    "logistic": [1.0, 2.0, -1.0],
    "gaussmix": [-1.0, 1.0, 0.5, 0.5],
}


class UsageError(Exception):
    """Invalid command line or configuration (exit code 1)."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# ---------------------------------------------------------------------------
# config handling


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _parse_list(text, cast=float):
    if text is None:
        return None
    if isinstance(text, (list, tuple)):
        return [cast(v) for v in text]
    if isinstance(text, (int, float)):
        return [cast(text)]
    return [cast(v) for v in str(text).split(",") if v.strip()]


def _model_params(pairs):
    out = {}
    for item in pairs or []:
        if "=" not in item:
            raise UsageError(f"--model-param expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = _parse_value(v)
    return out


def resolve(args, defaults: dict) -> dict:
    """defaults < config file < explicit flags."""
    cfg = dict(defaults)
    if getattr(args, "config", None):
        try:
            loaded = read_json(args.config)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from exc
        # A run manifest can be passed back in: its config echo is used.
        loaded = loaded.get("config", loaded)
        unknown = set(loaded) - set(defaults)
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(loaded)
    for key in defaults:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    if getattr(args, "model_param", None):
        cfg["model_params"] = {**(cfg.get("model_params") or {}), **_model_params(args.model_param)}
    return cfg


def _dataset_manifest(data_path):
    p = Path(data_path).with_suffix(".json")
    return read_json(p) if p.exists() else {}


def _model_from(cfg, data_manifest=None):
    """Model from the run config, inheriting the dataset manifest's model settings."""
    name = cfg.get("model")
    params = dict(cfg.get("model_params") or {})
    if data_manifest:
        mcfg = dict(data_manifest.get("model_config", {}))
        stored = mcfg.pop("model", None)
        name = name or stored
        if stored == name:
            params = {**mcfg, **params}
    if not name:
        raise UsageError("no model given (--model or a dataset manifest)")
    if name not in MODELS:
        raise UsageError(f"unknown model {name!r}; choose from {sorted(MODELS)}")
    try:
        return build_model(name, **params)
    except TypeError as exc:
        raise UsageError(f"bad model parameters for {name}: {exc}") from exc


def _load_data(cfg):
    if not cfg.get("data"):
        raise UsageError("--data is required")
    path = Path(cfg["data"])
    if not path.exists():
        raise FileNotFoundError(f"dataset {path} not found")
    return read_dataset(path), _dataset_manifest(path)


def _check_kind(model, dataset):
    if dataset.kind and dataset.kind != model.name:
        raise ValueError(f"dataset holds {dataset.kind!r} data but the model is {model.name!r}")


def _seed_record(ss: np.random.SeedSequence) -> dict:
    return {"entropy": str(ss.entropy), "spawn_key": list(ss.spawn_key)}


# ---------------------------------------------------------------------------
# generate

GENERATE_DEFAULTS = {"model": None, "model_params": {}, "theta": None, "N": 10000, "seed": 0, "out": None}


def cmd_generate(args) -> int:
    cfg = resolve(args, GENERATE_DEFAULTS)
    if cfg["out"] is None:
        raise UsageError("--out is required")
    if cfg["N"] is None or int(cfg["N"]) < 1:
        raise UsageError("N must be >= 1")
    model = _model_from(cfg)
    if cfg["theta"] is not None:
        theta = _parse_list(cfg["theta"])
    else:
        # Cycle the stored default to the model's dimension (logistic d varies).
        theta = np.resize(DEFAULT_THETA[model.name], model.param_dim).tolist()
    t0 = time.perf_counter()
    rng = np.random.default_rng(np.random.SeedSequence(int(cfg["seed"])))
    dataset = model.simulate(theta, int(cfg["N"]), rng)
    out = Path(cfg["out"])
    write_dataset(out, dataset)
    stats = {"N": dataset.N, "summary": model.summary(dataset, None).tolist()}
    if model.name == "probit":
        stats["ones"] = int(dataset.y.sum())
    write_json(out.with_suffix(".json"), {
        "kind": "dataset", "version": __version__,
        "config": {**cfg, "theta": list(map(float, theta)), "out": str(out)},
        "model_config": model.config(), "theta_star": list(map(float, theta)),
        "seed": int(cfg["seed"]), "stats": stats,
        "wall_clock_s": {"generate": time.perf_counter() - t0},
    })
    print(f"wrote {dataset.N} observations to {out}")
    return 0


# ---------------------------------------------------------------------------
# run

RUN_DEFAULTS = {
    "data": None, "model": None, "model_params": {}, "mode": "iss", "n": None, "epsilon": 0.0,
    "epsilon_from": None, "epsilon_convention": "per_obs", "iterations": 10000, "proposal_scale": "auto",
    "pilot_iterations": 2000, "subset_proposal": "auto", "swap_k": 1, "window_omega": 0.9,
    "window_lambda": 0.1, "anneal_steps": 1000, "subset_inner_steps": 1, "burn_in": 0.2,
    "delta_scale": "total", "adaptive": False, "adapt_every": 50, "seed": 0, "replicates": 1,
    "workers": None, "timing": True, "plots": True, "out": None, "engine": "auto", "theta0": None,
}


def _proposal_scale(cfg, model, dataset, seed_seq):
    ps = cfg["proposal_scale"]
    if ps == "auto" or ps is None:
        from .samplers import pilot_scale
        rng = np.random.default_rng(seed_seq)
        theta0 = cfg["theta0"]
        return pilot_scale(model, dataset, rng, int(cfg["pilot_iterations"]), theta0=theta0).tolist()
    vals = _parse_list(ps)
    return vals[0] if len(vals) == 1 else vals


def _chain_job(job):
    """Worker: run one replicate and write its chain file. Returns its summary."""
    from .diagnostics import LowRefreshWarning, refresh_rate
    from .samplers import run_iss, run_mh
    import warnings

    model, dataset, sc, mode, ss, path, timing, engine = job
    rng = np.random.default_rng(ss)
    t0 = time.perf_counter()
    if mode == "mh":
        rec = run_mh(model, dataset, sc, rng, engine=engine)
    else:
        rec = run_iss(model, dataset, sc, rng, engine=engine)
    t_run = time.perf_counter() - t0
    write_chain(path, rec, timing=timing)
    summ = rec.summary()
    summ["wall_clock_s"] = {"sampling": t_run, "write": time.perf_counter() - t0 - t_run}
    summ["iterations_per_s"] = rec.iterations / t_run if t_run > 0 else math.inf
    summ["seed"] = _seed_record(ss)
    summ["chain_file"] = str(path)
    summ["proposal"] = rec.meta.get("proposal")
    if mode == "iss":
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", LowRefreshWarning)
            summ["refresh_rate"] = refresh_rate(rec)
        summ["low_refresh_warning"] = bool(caught)
        summ["distinct_subsets"] = len(set(rec.subset_key)) if rec.subset_key else None
    return summ, rec


def cmd_run(args) -> int:
    cfg = resolve(args, RUN_DEFAULTS)
    if cfg["out"] is None:
        raise UsageError("--out is required")
    if cfg["mode"] not in ("mh", "iss"):
        raise UsageError("mode must be 'mh' or 'iss'")
    if int(cfg["replicates"]) < 1:
        raise UsageError("replicates must be >= 1")
    phases = {}
    t0 = time.perf_counter()
    dataset, dman = _load_data(cfg)
    model = _model_from(cfg, dman)
    _check_kind(model, dataset)
    phases["load"] = time.perf_counter() - t0

    if cfg["epsilon_from"]:
        rep = read_json(cfg["epsilon_from"])
        conv = cfg["epsilon_convention"]
        if conv not in ("total", "per_obs"):
            raise UsageError("epsilon_convention must be 'total' or 'per_obs'")
        cfg["epsilon"] = float(rep["epsilon"][conv])
        cfg["delta_scale"] = conv
    n = dataset.N if cfg["mode"] == "mh" else cfg["n"]
    if n is None:
        raise UsageError("--n is required in iss mode")
    sub_prop = cfg["subset_proposal"]
    if sub_prop == "auto":
        sub_prop = "window" if model.window_only else "swap"
    root = np.random.SeedSequence(int(cfg["seed"]))
    pilot_ss, *chain_ss = root.spawn(1 + int(cfg["replicates"]))
    t1 = time.perf_counter()
    scale = _proposal_scale(cfg, model, dataset, pilot_ss)
    phases["pilot"] = time.perf_counter() - t1
    try:
        sc = SamplerConfig(
            n=int(n), epsilon=float(cfg["epsilon"]), iterations=int(cfg["iterations"]), proposal_scale=scale,
            subset_proposal=sub_prop, swap_k=int(cfg["swap_k"]), window_omega=float(cfg["window_omega"]),
            window_lambda=float(cfg["window_lambda"]), anneal_steps=int(cfg["anneal_steps"]),
            seed=int(cfg["seed"]), subset_inner_steps=int(cfg["subset_inner_steps"]),
            burn_in=float(cfg["burn_in"]), delta_scale=cfg["delta_scale"], adaptive=bool(cfg["adaptive"]),
            adapt_every=int(cfg["adapt_every"]), theta0=cfg["theta0"])
    except (ValueError, TypeError) as exc:
        raise UsageError(str(exc)) from exc
    sc.check_dataset(dataset.N)

    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    jobs = [(model, dataset, sc, cfg["mode"], ss, out / f"chain_{r:03d}.csv", bool(cfg["timing"]), cfg["engine"])
            for r, ss in enumerate(chain_ss)]
    workers = int(cfg["workers"] or os.cpu_count() or 1)
    t2 = time.perf_counter()
    if workers == 1 or len(jobs) == 1:
        results = [_chain_job(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            results = list(pool.map(_chain_job, jobs))
    phases["sampling"] = time.perf_counter() - t2
    summaries = [r[0] for r in results]
    records = [r[1] for r in results]
    for i, s in enumerate(summaries):
        extra = f", refresh {s['refresh_rate']:.4f}" if "refresh_rate" in s else ""
        print(f"chain {i}: acceptance {s['param_acceptance']:.3f}{extra}, mean {np.round(s['posterior_mean'], 5).tolist()}")
        if s.get("low_refresh_warning"):
            print(f"chain {i}: warning: subset refresh rate below 1%", file=sys.stderr)
    if cfg["plots"]:
        t3 = time.perf_counter()
        from .plotting import plot_chains
        plot_chains(records, out / "chains.png")
        phases["plots"] = time.perf_counter() - t3
    write_json(out / "manifest.json", {
        "kind": "run", "version": __version__,
        "config": {**cfg, "proposal_scale": scale, "subset_proposal": sub_prop},
        "model_config": model.config(), "dataset": {"path": str(cfg["data"]), "N": dataset.N},
        "root_seed": int(cfg["seed"]), "pilot_seed": _seed_record(pilot_ss),
        "wall_clock_s": phases, "chains": summaries,
    })
    print(f"wrote {len(jobs)} chain file(s) and manifest.json to {out}")
    return 0


# ---------------------------------------------------------------------------
# validate-stats

VALIDATE_DEFAULTS = {"data": None, "model": None, "model_params": {}, "n": None, "num_theta": 100,
                     "num_subsets": 500, "seed": 0, "out": None, "plots": True}


def cmd_validate_stats(args) -> int:
    from .diagnostics import validate_a4
    cfg = resolve(args, VALIDATE_DEFAULTS)
    if cfg["out"] is None:
        raise UsageError("--out is required")
    if cfg["n"] is None:
        raise UsageError("--n is required")
    if int(cfg["num_theta"]) < 1 or int(cfg["num_subsets"]) < 1:
        raise UsageError("num_theta and num_subsets must be >= 1")
    dataset, dman = _load_data(cfg)
    model = _model_from(cfg, dman)
    _check_kind(model, dataset)
    t0 = time.perf_counter()
    rng = np.random.default_rng(np.random.SeedSequence(int(cfg["seed"])))
    rep = validate_a4(model, dataset, int(cfg["n"]), int(cfg["num_theta"]), int(cfg["num_subsets"]), rng,
                      seed=int(cfg["seed"]))
    out = Path(cfg["out"])
    write_points(out / "a4_points.csv", ["theta_index", "subset_index", "x", "y"],
                 [rep.theta_index, rep.subset_index, rep.x, rep.y])
    body = rep.to_dict()
    body.update({"kind": "a4_report", "version": __version__, "config": cfg, "model_config": model.config(),
                 "wall_clock_s": time.perf_counter() - t0})
    write_json(out / "a4_report.json", body)
    if cfg["plots"]:
        from .plotting import plot_a4
        plot_a4(rep, out / "a4_scatter.png")
    eps = rep.epsilon_suggestions()
    print(f"gamma_hat = {rep.gamma_hat:.6g} over {rep.x.size} points")
    print(f"suggested epsilon: {eps['total']:.6g} with total-scale Delta_n, "
          f"{eps['per_obs']:.6g} with per-observation Delta_bar_n")
    return 0


# ---------------------------------------------------------------------------
# diagnose

DIAGNOSE_DEFAULTS = {
    "data": None, "model": None, "model_params": {}, "out": None, "seed": 0, "plots": True,
    "kl_deltas": None, "kl_n": 1000, "kl_nodes": 4001,
    "an_eps": None, "an_n": 1000, "an_draws": 1000, "an_thinning": 100, "an_grid": "0,1.5,301",
    "an_delta_scale": "total", "tv": None, "tv_burn_in": 0.2,
}


def _kl_rows(model, dataset, cfg):
    from .diagnostics import fisher_gamma_N, gaussian_kl, kl_bound, kl_exact_1d, probit_subset_near_delta
    from .subsets import delta_n
    if model.name != "probit":
        raise ValueError("KL diagnostics are implemented for the probit model")
    gamma = fisher_gamma_N(model, dataset)
    rows = []
    for item in _parse_list(cfg["kl_deltas"], str):
        # "target" uses --kl-n; "target@n" picks the subset size per row.
        target, _, n_txt = item.partition("@")
        n = int(n_txt) if n_txt else int(cfg["kl_n"])
        U = probit_subset_near_delta(dataset, n, float(target))
        dv = delta_n(model, dataset, U)
        rows.append({"n": n, "target": float(target), "delta": float(dv.total[0]),
                     "kl": kl_exact_1d(model, dataset, U, int(cfg["kl_nodes"])),
                     "bound": kl_bound(model, dataset, U, int(cfg["kl_nodes"])),
                     "gaussian_kl": gaussian_kl(dv, gamma)})
    return rows


def _an_rows(model, dataset, cfg, ss):
    from .diagnostics import estimate_An
    lo, hi, k = _parse_list(cfg["an_grid"])
    grid = np.linspace(lo, hi, int(k) + 1)[1:] if lo == 0 else np.linspace(lo, hi, int(k))
    rows = []
    for eps, child in zip(_parse_list(cfg["an_eps"]), ss.spawn(len(_parse_list(cfg["an_eps"])))):
        est = estimate_An(model, dataset, int(cfg["an_n"]), eps, grid, int(cfg["an_draws"]),
                          np.random.default_rng(child), thinning=int(cfg["an_thinning"]),
                          scale=cfg["an_delta_scale"])
        rows.append({**est.to_dict(), "seed": _seed_record(child)})
    return rows


def _tv_rows(cfg, out, plots):
    from .diagnostics import tv_kde
    paths = _parse_list(cfg["tv"], str)
    if len(paths) != 2:
        raise UsageError("--tv expects two chain files")
    samples = []
    for p in paths:
        if not Path(p).exists():
            raise FileNotFoundError(f"chain file {p} not found")
        rec = read_chain(p)
        samples.append(rec.theta[int(float(cfg["tv_burn_in"]) * len(rec)):])
    res = tv_kde(samples[0], samples[1])
    if plots:
        from .plotting import plot_tv
        plot_tv(samples[0], samples[1], out / "tv_marginals.png", labels=[Path(p).name for p in paths])
    return [{"a": paths[0], "b": paths[1], **res.to_dict()}]


def cmd_diagnose(args) -> int:
    cfg = resolve(args, DIAGNOSE_DEFAULTS)
    if cfg["out"] is None:
        raise UsageError("--out is required")
    if not (cfg["kl_deltas"] or cfg["an_eps"] is not None or cfg["tv"]):
        raise UsageError("request at least one of --kl-deltas, --an-eps, --tv")
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    report = {"kind": "diagnostics", "version": __version__, "config": cfg}
    root = np.random.SeedSequence(int(cfg["seed"]))
    if cfg["kl_deltas"] or cfg["an_eps"] is not None:
        dataset, dman = _load_data(cfg)
        model = _model_from(cfg, dman)
        _check_kind(model, dataset)
        report["model_config"] = model.config()
    if cfg["kl_deltas"]:
        rows = _kl_rows(model, dataset, cfg)
        report["kl"] = rows
        write_points(out / "kl_table.csv", ["n", "target", "delta", "kl", "bound", "gaussian_kl"],
                     [[r[k] for r in rows] for k in ("n", "target", "delta", "kl", "bound", "gaussian_kl")])
        for r in rows:
            print(f"n={r['n']} delta={r['delta']:.3f}: KL={r['kl']:.5g} bound={r['bound']:.5g} "
                  f"gaussian={r['gaussian_kl']:.5g}")
        if cfg["plots"]:
            from .plotting import plot_kl
            plot_kl(rows, out / "kl.png")
    if cfg["an_eps"] is not None:
        rows = _an_rows(model, dataset, cfg, root)
        report["an"] = rows
        write_points(out / "an_table.csv", ["epsilon", "log_value", "divergent", "draws"],
                     [[r["epsilon"] for r in rows], [r["log_value"] for r in rows],
                      [str(r["divergent"]).lower() for r in rows], [r["draws"] for r in rows]])
        for r in rows:
            flag = " (divergent)" if r["divergent"] else ""
            print(f"epsilon={r['epsilon']:g}: log A_n = {r['log_value']:.5g}{flag}")
        if cfg["plots"]:
            from .plotting import plot_an
            plot_an(rows, out / "an.png")
    if cfg["tv"]:
        rows = _tv_rows(cfg, out, cfg["plots"])
        report["tv"] = rows
        d = len(rows[0]["per_marginal"])
        write_points(out / "tv_table.csv", ["a", "b"] + [f"tv_{j}" for j in range(d)] + ["tv_mean"],
                     [[rows[0]["a"]], [rows[0]["b"]]] + [[v] for v in rows[0]["per_marginal"]] + [[rows[0]["mean"]]])
        print(f"TV per marginal {np.round(rows[0]['per_marginal'], 4).tolist()}, mean {rows[0]['mean']:.4f}")
    write_json(out / "diagnostics.json", report)
    return 0


# ---------------------------------------------------------------------------
# argument parser


def _bool_pair(p, name, help_on):
    dest = name.replace("-", "_")
    p.add_argument(f"--no-{name}", dest=dest, action="store_const", const=False, default=None, help=help_on)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="issmcmc", description="Informed sub-sampling MCMC experiments")
    parser.add_argument("--version", action="version", version=f"issmcmc {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def common(p, data=True):
        p.add_argument("--config", help="JSON file with settings (flags override it)")
        p.add_argument("--model", choices=sorted(MODELS))
        p.add_argument("--model-param", action="append", metavar="KEY=VALUE",
                       help="model constructor argument, repeatable")
        if data:
            p.add_argument("--data", help="dataset CSV written by 'generate'")
        p.add_argument("--out", help="output path")
        p.add_argument("--seed", type=int)

    g = sub.add_parser("generate", help="simulate a dataset")
    common(g, data=False)
    g.add_argument("--theta", help="true parameter, comma separated")
    g.add_argument("--N", type=int, help="number of observations")

    r = sub.add_parser("run", help="run exact MH or ISS-MCMC chains")
    common(r)
    r.add_argument("--mode", choices=["mh", "iss"])
    r.add_argument("--n", type=int, help="subset size")
    r.add_argument("--epsilon", type=float)
    r.add_argument("--epsilon-from", help="a4_report.json from validate-stats")
    r.add_argument("--epsilon-convention", choices=["total", "per_obs"])
    r.add_argument("--iterations", type=int)
    r.add_argument("--proposal-scale", help="'auto' (pilot run), a step, or per-coordinate steps")
    r.add_argument("--pilot-iterations", type=int)
    r.add_argument("--subset-proposal", choices=["auto", "swap", "window"])
    r.add_argument("--swap-k", type=int)
    r.add_argument("--window-omega", type=float)
    r.add_argument("--window-lambda", type=float)
    r.add_argument("--anneal-steps", type=int)
    r.add_argument("--subset-inner-steps", type=int)
    r.add_argument("--burn-in", type=float)
    r.add_argument("--delta-scale", choices=["total", "per_obs"])
    r.add_argument("--adaptive", action="store_const", const=True, default=None)
    r.add_argument("--adapt-every", type=int)
    r.add_argument("--replicates", type=int)
    r.add_argument("--workers", type=int)
    r.add_argument("--engine", choices=["auto", "python", "compiled"])
    _bool_pair(r, "timing", "write zeros in the t_wall_ns column (byte-identical reruns)")
    _bool_pair(r, "plots", "skip figures")

    v = sub.add_parser("validate-stats", help="summary-statistic validation scatter and gamma_hat")
    common(v)
    v.add_argument("--n", type=int)
    v.add_argument("--num-theta", type=int)
    v.add_argument("--num-subsets", type=int)
    _bool_pair(v, "plots", "skip figures")

    d = sub.add_parser("diagnose", help="KL/bound table, A_n sweep, TV between chains")
    common(d)
    d.add_argument("--kl-deltas", help="target |Delta_n| values, e.g. 3,14,23,33@100")
    d.add_argument("--kl-n", type=int)
    d.add_argument("--kl-nodes", type=int)
    d.add_argument("--an-eps", help="epsilon values, e.g. 0,0.1,1,10")
    d.add_argument("--an-n", type=int)
    d.add_argument("--an-draws", type=int)
    d.add_argument("--an-thinning", type=int)
    d.add_argument("--an-grid", help="lo,hi,count (a zero lower end is excluded)")
    d.add_argument("--an-delta-scale", choices=["total", "per_obs"])
    d.add_argument("--tv", nargs=2, metavar="CHAIN", help="two chain CSV files")
    d.add_argument("--tv-burn-in", type=float)
    _bool_pair(d, "plots", "skip figures")
    return parser


COMMANDS = {"generate": cmd_generate, "run": cmd_run, "validate-stats": cmd_validate_stats,
            "diagnose": cmd_diagnose}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_help(sys.stderr)
            return 1
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(message)s")
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, RuntimeError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
