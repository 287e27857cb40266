"""Figure rendering for run and sweep reports.

Figures are written to files next to the delimited output; nothing here
opens a window (the Agg backend is forced on import).
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_SEED_STYLE = dict(color="#7aa6c2", alpha=0.45, linewidth=0.8)
_MEDIAN_STYLE = dict(color="#1f4e79", linewidth=1.8)


def _median_curve(curves):
    length = min(c.size for c in curves)
    return np.median(np.stack([c[:length] for c in curves]), axis=0)


def save_run_figure(results, path) -> str:
    """Regret/violation curves per seed with medians, plus a log-log
    scaling panel of the median curves (and the anchor mix weight when the
    run produced one)."""
    has_gamma = any(np.any(r.mix_weights > 0) for r in results)
    ncols = 4 if has_gamma else 3
    fig, axes = plt.subplots(1, ncols, figsize=(4.2 * ncols, 3.4))

    for ax, attr, label in ((axes[0], "regret_cum", "cumulative regret"),
                            (axes[1], "violation_cum", "cumulative violations")):
        curves = [getattr(r, attr) for r in results if getattr(r, attr).size]
        for curve in curves:
            ax.plot(np.arange(1, curve.size + 1), curve, **_SEED_STYLE)
        if curves:
            med = _median_curve(curves)
            ax.plot(np.arange(1, med.size + 1), med, label="median", **_MEDIAN_STYLE)
            ax.legend(loc="upper left", fontsize=8)
        ax.set_xlabel("round")
        ax.set_ylabel(label)
        ax.grid(True, alpha=0.3)

    ax = axes[2]
    for attr, label, color in (("regret_cum", "median |regret|", "#1f4e79"),
                               ("violation_cum", "median violations", "#a63d40")):
        curves = [getattr(r, attr) for r in results if getattr(r, attr).size]
        if not curves:
            continue
        med = np.abs(_median_curve(curves))
        rounds = np.arange(1, med.size + 1)
        keep = med > 0
        if keep.sum() >= 2:
            ax.loglog(rounds[keep], med[keep], label=label, color=color, linewidth=1.4)
    ax.set_xlabel("round")
    ax.set_title("scaling view", fontsize=9)
    ax.legend(loc="upper left", fontsize=8)
    ax.grid(True, which="both", alpha=0.3)

    if has_gamma:
        ax = axes[3]
        for r in results:
            if r.mix_weights.size:
                ax.plot(np.arange(1, r.mix_weights.size + 1), r.mix_weights, **_SEED_STYLE)
        med = _median_curve([r.mix_weights for r in results if r.mix_weights.size])
        ax.plot(np.arange(1, med.size + 1), med, **_MEDIAN_STYLE)
        ax.set_xlabel("round")
        ax.set_ylabel("anchor mix weight")
        ax.set_ylim(-0.02, 1.02)
        ax.grid(True, alpha=0.3)

    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return str(path)


def save_sweep_figure(result, path) -> str:
    """Log-log scaling panels with the fitted slopes in the titles."""
    medians = result.medians
    values = np.array([m["value"] for m in medians], dtype=float)
    regret = np.array([m["regret_median"] for m in medians], dtype=float)
    violation = np.array([m["violation_median"] for m in medians], dtype=float)
    bench = np.array([m["benchmark_loss_median"] for m in medians], dtype=float)

    fig, axes = plt.subplots(1, 2, figsize=(8.6, 3.4))

    ax = axes[0]
    keep = (bench > 0) & (regret > 0)
    if keep.sum() >= 2:
        ax.loglog(bench[keep], regret[keep], "o-", **_MEDIAN_STYLE)
    title = "median regret vs benchmark loss"
    if result.regret_slope is not None:
        title += f" (slope {result.regret_slope:.2f})"
    ax.set_title(title, fontsize=9)
    ax.set_xlabel("benchmark loss")
    ax.set_ylabel("median regret")
    ax.grid(True, which="both", alpha=0.3)

    ax = axes[1]
    keep = (values > 0) & (violation > 0)
    if keep.sum() >= 2:
        ax.loglog(values[keep], violation[keep], "s-", color="#a63d40", linewidth=1.8)
    title = f"median violations vs {result.vary}"
    if result.violation_slope is not None:
        title += f" (slope {result.violation_slope:.2f})"
    ax.set_title(title, fontsize=9)
    ax.set_xlabel(result.vary)
    ax.set_ylabel("median violations")
    ax.grid(True, which="both", alpha=0.3)

    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return str(path)
