"""Figure rendering for analysis and evaluation reports.

Figures are written next to the delimited reports the CLI emits: the
best-rank distribution as a line chart (rank 0 is the producing model's
own choice) and the per-testset EM/F1 comparison as grouped bars.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .analysis import AnalysisReport
from .reranker import EvalReport


def rank_histogram_figure(reports: dict[str, AnalysisReport]):
    fig, ax = plt.subplots(figsize=(7.0, 4.2))
    for name, report in reports.items():
        ranks = np.arange(len(report.rank_histogram))
        ax.plot(ranks, report.rank_histogram, marker="o", markersize=3.5, label=name)
    ax.set_xlabel("best-candidate rank (0 = model's own top choice)")
    ax.set_ylabel("examples")
    ax.set_title("Where the best candidate sits in the ranking")
    if reports:
        k = len(next(iter(reports.values())).rank_histogram)
        ax.set_xticks(range(k))
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    return fig


def eval_report_figure(report: EvalReport):
    fig, axes = plt.subplots(1, 2, figsize=(10.0, 4.2), sharey=False)
    names = [row.name for row in report.rows]
    x = np.arange(len(names))
    width = 0.27
    for ax, metric in zip(axes, ("em", "f1")):
        baseline = [getattr(r, f"baseline_{metric}") for r in report.rows]
        calibrated = [getattr(r, f"calibrated_{metric}") for r in report.rows]
        oracle = [getattr(r, f"oracle_{metric}") for r in report.rows]
        ax.bar(x - width, baseline, width, label="baseline")
        ax.bar(x, calibrated, width, label="calibrated")
        ax.bar(x + width, oracle, width, label="oracle")
        ax.set_xticks(x)
        ax.set_xticklabels(names, rotation=30, ha="right", fontsize=8)
        ax.set_ylabel(f"{metric.upper()} (%)")
        ax.set_title(f"{metric.upper()} by testset")
        ax.grid(True, axis="y", alpha=0.3)
    axes[0].legend(fontsize=8)
    fig.tight_layout()
    return fig


def save_figure(fig, path) -> Path:
    path = Path(path)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def figure_path_for(report_path) -> Path:
    return Path(report_path).with_suffix(".png")
