"""Figures written next to the CLI's CSV/JSON outputs.

matplotlib is imported lazily with the non-interactive Agg backend, so the
library itself never needs a display or pays the import cost.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np


def _plt():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def _save(fig, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=110, bbox_inches="tight")
    _plt().close(fig)
    return path


def plot_chains(records, path, labels=None):
    """Trace (left) and post-burn-in histogram (right) of every parameter."""
    plt = _plt()
    d = records[0].theta.shape[1]
    fig, axes = plt.subplots(d, 2, figsize=(10, 2.4 * d), squeeze=False)
    for r_i, rec in enumerate(records):
        lab = labels[r_i] if labels else f"chain {r_i}"
        for j in range(d):
            axes[j, 0].plot(rec.theta[:, j], lw=0.5, alpha=0.8, label=lab)
            axes[j, 1].hist(rec.post_burn_in()[:, j], bins=60, density=True, histtype="step", label=lab)
    for j in range(d):
        axes[j, 0].set_ylabel(f"theta_{j}")
        if records[0].burn_in:
            axes[j, 0].axvline(records[0].burn_in, color="k", ls=":", lw=0.8)
    axes[-1, 0].set_xlabel("iteration")
    axes[-1, 1].set_xlabel("value")
    if len(records) <= 8:
        axes[0, 1].legend(fontsize=7)
    return _save(fig, path)


def plot_a4(report, path):
    """Scatter of the validation points with the fitted envelope |y| = N γ̂ x."""
    plt = _plt()
    fig, ax = plt.subplots(figsize=(6, 4.5))
    ax.scatter(report.x, report.y, s=4, alpha=0.4)
    if report.x.size:
        xs = np.linspace(0, report.x.max(), 50)
        slope = report.slope_per_obs
        ax.plot(xs, slope * xs, "r-", lw=1)
        ax.plot(xs, -slope * xs, "r-", lw=1)
    ax.set_xlabel("||mean summary gap||")
    ax.set_ylabel("log f(Y|theta) - (N/n) log f(Y_U|theta)")
    ax.set_title(f"gamma_hat = {report.gamma_hat:.4g} (slope {report.slope_per_obs:.4g})")
    return _save(fig, path)


def plot_kl(rows, path):
    plt = _plt()
    fig, ax = plt.subplots(figsize=(6, 4))
    x = np.arange(len(rows))
    ax.bar(x - 0.2, [r["kl"] for r in rows], 0.4, label="KL")
    ax.bar(x + 0.2, [r["bound"] for r in rows], 0.4, label="bound")
    ax.set_xticks(x, [f"n={r['n']}\n|D|={abs(r['delta']):.0f}" for r in rows])
    ax.set_yscale("log")
    ax.legend()
    return _save(fig, path)


def plot_an(rows, path):
    plt = _plt()
    fig, ax = plt.subplots(figsize=(6, 4))
    eps = [r["epsilon"] for r in rows]
    ax.plot(range(len(rows)), [r["log_value"] for r in rows], "o-")
    for i, r in enumerate(rows):
        if r["divergent"]:
            ax.annotate("divergent", (i, r["log_value"]), fontsize=8)
    ax.set_xticks(range(len(rows)), [f"{e:g}" for e in eps])
    ax.axhline(2.0, color="r", ls=":", lw=0.8)
    ax.set_xlabel("epsilon")
    ax.set_ylabel("log A_n estimate")
    return _save(fig, path)


def plot_tv(a, b, path, labels=("a", "b")):
    plt = _plt()
    d = a.shape[1]
    fig, axes = plt.subplots(1, d, figsize=(4 * d, 3.2), squeeze=False)
    for j in range(d):
        for s, lab in zip((a, b), labels):
            axes[0, j].hist(s[:, j], bins=80, density=True, histtype="step", label=lab)
        axes[0, j].set_xlabel(f"theta_{j}")
    axes[0, 0].legend(fontsize=8)
    return _save(fig, path)
