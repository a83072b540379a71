"""End-to-end pipeline: training-set assembly, calibrator training, reranking.

Training modes mirror the clean / single-mixed / all-mixed protocols: the
clean corpus is split in half (seeded), and mixed modes add a seeded
sample from one or every shift corpus. Sampled examples are removed from
the held-out sets, and their ids are recorded in the trained model for
audit, so evaluation can never leak training examples.
"""

from __future__ import annotations

import csv
import random
from dataclasses import dataclass, field

import numpy as np

from . import gbdt
from .core import Corpus, CorpusMeta, split_corpus
from .features import FeatureConfig, FeatureMatrix, featurize_corpus
from .gbdt import BoostedModel, TrainParams
from .squad import corpus_scores

MODES = ("clean", "single_mixed", "all_mixed")


@dataclass
class TrainSpec:
    clean_corpus: Corpus
    shift_corpora: list[tuple[str, Corpus]] = field(default_factory=list)
    mode: str = "clean"
    mixed_name: str | None = None
    mixed_count: int = 2000
    count_each: int = 1000
    clean_train_fraction: float = 0.5
    feature_config: FeatureConfig = field(default_factory=FeatureConfig)
    params: TrainParams | None = None
    seed: int = 0

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"unknown mode '{self.mode}'; expected one of {MODES}")
        if not 0.0 < self.clean_train_fraction < 1.0:
            raise ValueError("clean_train_fraction must be in (0, 1)")
        names = [name for name, _ in self.shift_corpora]
        if len(set(names)) != len(names):
            raise ValueError("shift corpus names must be unique")
        if "clean" in names:
            raise ValueError("'clean' is reserved for the clean corpus")
        if self.mode == "single_mixed":
            if self.mixed_name is None or self.mixed_name not in names:
                raise ValueError(f"single_mixed mode needs a known shift name, got {self.mixed_name!r}")
            size = len(dict(self.shift_corpora)[self.mixed_name].examples)
            if not 0 < self.mixed_count <= size:
                raise ValueError(
                    f"mixed_count {self.mixed_count} exceeds corpus '{self.mixed_name}' size {size}"
                )
        if self.mode == "all_mixed":
            if not self.shift_corpora:
                raise ValueError("all_mixed mode needs at least one shift corpus")
            for name, corpus in self.shift_corpora:
                if not 0 < self.count_each <= len(corpus.examples):
                    raise ValueError(
                        f"count_each {self.count_each} exceeds corpus '{name}' size "
                        f"{len(corpus.examples)}"
                    )
        k = self.clean_corpus.meta.k
        for name, corpus in self.shift_corpora:
            if corpus.meta.k != k:
                raise ValueError(f"corpus '{name}' has k={corpus.meta.k}, clean has k={k}")
            if self.feature_config.wants_rep and corpus.meta.hidden_dim != self.clean_corpus.meta.hidden_dim:
                raise ValueError(f"corpus '{name}' rep dimension differs from clean corpus")


def _require_labeled(name: str, corpus: Corpus) -> None:
    if not corpus.is_labeled():
        raise ValueError(f"corpus '{name}' is not labeled; apply best-candidate labeling first")


def _sample_examples(corpus: Corpus, count: int, seed: int, name: str):
    """Seeded sample without replacement; both parts keep corpus order."""
    rng = random.Random(f"{seed}:{name}")
    chosen = set(rng.sample(range(len(corpus.examples)), count))
    taken = [ex for i, ex in enumerate(corpus.examples) if i in chosen]
    rest = [ex for i, ex in enumerate(corpus.examples) if i not in chosen]
    return taken, Corpus(meta=corpus.meta, examples=rest)


def prepare_training(spec: TrainSpec) -> tuple[FeatureMatrix, dict[str, Corpus]]:
    """Assemble the training matrix and the held-out corpora for one mode."""
    spec.validate()
    spec.feature_config.validate()
    _require_labeled("clean", spec.clean_corpus)
    for name, corpus in spec.shift_corpora:
        _require_labeled(name, corpus)

    train_half, eval_half = split_corpus(spec.clean_corpus, spec.clean_train_fraction, spec.seed)
    train_examples = list(train_half.examples)
    held_out: dict[str, Corpus] = {"clean": eval_half}
    for name, corpus in spec.shift_corpora:
        if spec.mode == "single_mixed" and name == spec.mixed_name:
            taken, rest = _sample_examples(corpus, spec.mixed_count, spec.seed, name)
            train_examples += taken
            held_out[name] = rest
        elif spec.mode == "all_mixed":
            taken, rest = _sample_examples(corpus, spec.count_each, spec.seed, name)
            train_examples += taken
            held_out[name] = rest
        else:
            held_out[name] = corpus

    meta = CorpusMeta(
        source_name=f"train:{spec.mode}",
        k=spec.clean_corpus.meta.k,
        hidden_dim=spec.clean_corpus.meta.hidden_dim,
    )
    train_corpus = Corpus(meta=meta, examples=train_examples)
    matrix = featurize_corpus(train_corpus, spec.feature_config, with_labels=True)
    return matrix, held_out


def train_calibrator(
    spec: TrainSpec, round_callback=None, n_jobs: int = 1
) -> BoostedModel:
    """Train the reranking calibrator for a spec; deterministic per seed."""
    matrix, _ = prepare_training(spec)
    k = spec.clean_corpus.meta.k
    params = spec.params if spec.params is not None else TrainParams(num_classes=k, seed=spec.seed)
    if params.num_classes != k:
        raise ValueError(f"params.num_classes {params.num_classes} != corpus k {k}")
    model = gbdt.train(matrix, params, round_callback=round_callback, n_jobs=n_jobs)
    model.meta = {
        "feature_config": spec.feature_config.to_dict(),
        "mode": spec.mode,
        "mixed_name": spec.mixed_name if spec.mode == "single_mixed" else None,
        "k": k,
        "train_ids": matrix.ids,
    }
    return model


def model_feature_config(model: BoostedModel) -> FeatureConfig:
    raw = model.meta.get("feature_config")
    if raw is None:
        raise ValueError("model carries no feature config; was it trained by this pipeline?")
    return FeatureConfig.from_dict(raw)


def rerank(model: BoostedModel, corpus: Corpus) -> list[int]:
    """Chosen candidate index per example, in corpus order."""
    config = model_feature_config(model)
    matrix = featurize_corpus(corpus, config)
    return [int(c) for c in gbdt.predict_classes(model, matrix)]


@dataclass
class EvalRow:
    name: str
    mode: str
    n: int
    acc: float
    baseline_em: float
    baseline_f1: float
    calibrated_em: float
    calibrated_f1: float
    oracle_em: float
    oracle_f1: float


CSV_COLUMNS = (
    "name",
    "mode",
    "n",
    "acc",
    "baseline_em",
    "baseline_f1",
    "calibrated_em",
    "calibrated_f1",
    "oracle_em",
    "oracle_f1",
)


@dataclass
class EvalReport:
    rows: list[EvalRow]

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(CSV_COLUMNS)
            for row in self.rows:
                writer.writerow(
                    [
                        row.name,
                        row.mode,
                        row.n,
                        f"{row.acc:.4f}",
                        f"{row.baseline_em:.4f}",
                        f"{row.baseline_f1:.4f}",
                        f"{row.calibrated_em:.4f}",
                        f"{row.calibrated_f1:.4f}",
                        f"{row.oracle_em:.4f}",
                        f"{row.oracle_f1:.4f}",
                    ]
                )

    def format_table(self) -> str:
        header = (
            f"{'testset':<14} {'mode':<13} {'n':>6} {'acc':>7} "
            f"{'base EM':>8} {'base F1':>8} {'cal EM':>8} {'cal F1':>8} "
            f"{'orc EM':>8} {'orc F1':>8}"
        )
        lines = [header, "-" * len(header)]
        for r in self.rows:
            lines.append(
                f"{r.name:<14} {r.mode:<13} {r.n:>6} {r.acc:>7.2f} "
                f"{r.baseline_em:>8.2f} {r.baseline_f1:>8.2f} "
                f"{r.calibrated_em:>8.2f} {r.calibrated_f1:>8.2f} "
                f"{r.oracle_em:>8.2f} {r.oracle_f1:>8.2f}"
            )
        return "\n".join(lines)


def evaluate(model: BoostedModel, held_out: dict[str, Corpus]) -> EvalReport:
    """Baseline vs calibrated vs oracle scores per held-out set."""
    mode = model.meta.get("mode", "unknown")
    rows = []
    for name, corpus in held_out.items():
        _require_labeled(name, corpus)
        n = len(corpus.examples)
        labels = [ex.label for ex in corpus.examples]
        choices = rerank(model, corpus)
        acc = 100.0 * float(np.mean(np.asarray(choices) == np.asarray(labels)))
        baseline = corpus_scores(corpus, [0] * n)
        calibrated = corpus_scores(corpus, choices)
        oracle = corpus_scores(corpus, labels)
        rows.append(
            EvalRow(
                name=name,
                mode=mode,
                n=n,
                acc=acc,
                baseline_em=baseline["em"],
                baseline_f1=baseline["f1"],
                calibrated_em=calibrated["em"],
                calibrated_f1=calibrated["f1"],
                oracle_em=oracle["em"],
                oracle_f1=oracle["f1"],
            )
        )
    return EvalReport(rows=rows)
