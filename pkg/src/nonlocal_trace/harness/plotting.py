"""SVG figures of study rows: the headline ratio against the horizon (or strip length)."""

from __future__ import annotations

from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .report import Row  # noqa: E402

GOLDEN = (5**0.5 - 1) / 2
WIDTH = 4.8

STYLE = {
    "font.family": "serif",
    "font.size": 8,
    "axes.labelsize": 9,
    "legend.fontsize": 7,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "lines.linewidth": 1.0,
    "lines.markersize": 3.5,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "svg.hashsalt": "nonlocal-trace",
    "svg.fonttype": "path",
}

HEADLINE = {
    "scaling": ("S_strip", "delta", "relative gap"),
    "equivalence": (None, "delta", "|u|_S(alpha delta) / |u|_S(delta)"),
    "trace": ("rho", "delta", "trace ratio rho"),
    "lipschitz-trace": ("rho", "delta", "trace ratio rho"),
    "general-trace": ("rho", "delta", "trace ratio rho"),
    "inverse-trace": ("sigma", "delta", "extension ratio sigma"),
    "embedding": ("c_hat", "L", "embedding constant"),
    "local-limit": ("error", "delta", "e(delta)"),
    "laplacian-limit": ("laplacian", "delta", "|nonlocal - local|"),
}


def _series(rows: list[Row], study: str):
    quantity, xname, _ = HEADLINE[study]
    groups = defaultdict(list)
    for r in rows:
        if quantity is not None and r.quantity != quantity:
            continue
        if quantity is None and not r.quantity.startswith("alpha="):
            continue
        x = getattr(r, xname)
        if x is None or not r.ratio == r.ratio or r.ratio <= 0:
            continue
        label = f"{r.function_id} d={r.d} beta={r.beta:g}" if r.beta is not None else f"{r.function_id} d={r.d}"
        if quantity is None:
            label += f" {r.quantity}"
        groups[label].append((x, r.ratio))
    return {k: sorted(v) for k, v in sorted(groups.items())}


def plot_rows(rows: list[Row], study: str, path, max_series: int = 12) -> int:
    """Write the figure; returns the number of plotted series."""
    series = _series(rows, study)
    _, xname, ylabel = HEADLINE[study]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(WIDTH, WIDTH * GOLDEN))
        for i, (label, pts) in enumerate(series.items()):
            if i >= max_series:
                break
            xs, ys = zip(*pts)
            ax.plot(xs, ys, marker="o", label=label)
        ax.set_xscale("log", base=2)
        ax.set_yscale("log")
        ax.set_xlabel("horizon delta" if xname == "delta" else "strip length L")
        ax.set_ylabel(ylabel)
        ax.set_title(study)
        if series:
            ax.legend(frameon=False, ncol=2)
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
    return min(len(series), max_series)
