"""Diagnostics over labeled corpora: bad cases, better-candidate counts,
and the distribution of best-candidate ranks."""

from __future__ import annotations

import csv
from dataclasses import dataclass

from .core import Corpus
from .squad import score


@dataclass
class AnalysisReport:
    n: int
    mean_f1: float  # mean baseline (rank-0) F1, as a fraction in [0, 1]
    bad_case_count: int
    bad_with_better: int
    better_size: int
    rank_histogram: list[int]


def _require_labeled(corpus: Corpus) -> None:
    if not corpus.is_labeled():
        raise ValueError("corpus is not labeled; apply best-candidate labeling first")


def _baseline_f1s(corpus: Corpus) -> list[float]:
    return [score(ex.candidates[0].text, ex.gold_answers).f1 for ex in corpus.examples]


def bad_cases(corpus: Corpus) -> list[str]:
    """Ids whose rank-0 F1 falls strictly below the corpus mean."""
    _require_labeled(corpus)
    f1s = _baseline_f1s(corpus)
    mean = sum(f1s) / len(f1s)
    return [ex.id for ex, f1 in zip(corpus.examples, f1s) if f1 < mean]


def better_candidate_stats(corpus: Corpus) -> AnalysisReport:
    """Counts of examples whose best candidate is not the rank-0 choice.

    An example "has a better candidate" iff its label is nonzero: ties on F1
    resolve to rank 0 during labeling, so ties never count as better.
    """
    _require_labeled(corpus)
    k = corpus.meta.k
    f1s = _baseline_f1s(corpus)
    n = len(corpus.examples)
    mean = sum(f1s) / n
    histogram = [0] * k
    better = 0
    bad_count = 0
    bad_better = 0
    for ex, f1 in zip(corpus.examples, f1s):
        histogram[ex.label] += 1
        if ex.label != 0:
            better += 1
        if f1 < mean:
            bad_count += 1
            if ex.label != 0:
                bad_better += 1
    return AnalysisReport(
        n=n,
        mean_f1=mean,
        bad_case_count=bad_count,
        bad_with_better=bad_better,
        better_size=better,
        rank_histogram=histogram,
    )


def emit_histogram_csv(reports: dict[str, AnalysisReport], path) -> None:
    """One row per dataset with rank_0..rank_{k-1} count columns."""
    ks = {len(r.rank_histogram) for r in reports.values()}
    if len(ks) > 1:
        raise ValueError(f"reports disagree on k: {sorted(ks)}")
    k = ks.pop() if ks else 0
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["name"] + [f"rank_{j}" for j in range(k)])
        for name, report in reports.items():
            writer.writerow([name] + [str(c) for c in report.rank_histogram])


def format_stats_table(reports: dict[str, AnalysisReport]) -> str:
    """Human-readable summary: sizes, better-candidate counts, bad cases."""
    header = (
        f"{'testset':<16} {'size':>7} {'better-size':>12} {'mean F1':>8} "
        f"{'bad cases':>10} {'bad w/ better':>14}"
    )
    lines = [header, "-" * len(header)]
    for name, r in reports.items():
        lines.append(
            f"{name:<16} {r.n:>7} {r.better_size:>12} {100 * r.mean_f1:>8.2f} "
            f"{r.bad_case_count:>10} {r.bad_with_better:>14}"
        )
    return "\n".join(lines)
