"""Figure rendering for reports.

Renders the two diagnostic views as PNG files: per-strategy histograms
of max-min objectives, and objective/FLOP curves across retention
fractions.  Uses the Agg backend so rendering works headless; the CLI
report paths call these alongside the JSON/CSV output.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .errors import EmptyInput, IoError
from .metrics import DiversityReport, SweepReport


def _save(fig, path) -> None:
    try:
        fig.savefig(path, dpi=120)
    except OSError as exc:
        raise IoError(f"cannot write figure to {path}: {exc}") from exc
    finally:
        plt.close(fig)


def plot_histogram(report: DiversityReport, path) -> None:
    """Bar chart of objective counts per bin, one series per strategy."""
    if not report.histogram:
        raise EmptyInput("report holds no histogram rows")
    strategies = list(dict.fromkeys(row["strategy"] for row in report.histogram))
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for offset, strategy in enumerate(strategies):
        rows = [r for r in report.histogram if r["strategy"] == strategy]
        width = rows[0]["bin_upper"] - rows[0]["bin_lower"]
        slot = width / max(1, len(strategies))
        lefts = [r["bin_lower"] + offset * slot for r in rows]
        ax.bar(lefts, [r["count"] for r in rows], width=slot,
               align="edge", label=strategy)
    ax.set_xlabel("max-min objective")
    ax.set_ylabel("instances")
    ax.set_title("Selected-subset diversity by strategy")
    ax.legend()
    fig.tight_layout()
    _save(fig, path)


def plot_sweep(report: SweepReport, path) -> None:
    """Objective means vs retention fraction; FLOP ratio on a twin axis."""
    if not report.points:
        raise EmptyInput("report holds no sweep points")
    keeps = [p["keep_fraction"] for p in report.points]
    strategies = list(dict.fromkeys(k for p in report.points for k in p["objective_mean"]))
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for strategy in strategies:
        ys = [p["objective_mean"].get(strategy) for p in report.points]
        ax.plot(keeps, ys, marker="o", label=strategy)
    ax.set_xlabel("retention fraction")
    ax.set_ylabel("mean max-min objective")
    ax.set_title("Diversity across retention budgets")
    ratios = [p["tflop_ratio"] for p in report.points]
    if any(r is not None for r in ratios):
        twin = ax.twinx()
        twin.plot(keeps, ratios, marker="s", linestyle="--", color="gray",
                  label="FLOP ratio")
        twin.set_ylabel("FLOP ratio")
    ax.legend(loc="best")
    fig.tight_layout()
    _save(fig, path)
