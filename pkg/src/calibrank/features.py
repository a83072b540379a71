"""Manual and representation features for candidate sets.

Manual features cover question/context/candidate lengths, candidate
probabilities and boundary logits, the candidate-set entropy, and the
temperature-scaled candidate probabilities. Representation features pass
through the pooled embedding, last-hidden, and layer-average vectors.
The assembled vector follows one fixed canonical order so that the layout
is a pure function of (config, k, rep dimension).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import CandidateSet, Corpus

_SUM_TOLERANCE = 1e-9

_FLAG_FIELDS = (
    "use_lengths",
    "use_prob",
    "use_logits",
    "use_entropy",
    "use_scaled_softmax",
    "use_embedding",
    "use_hidden_last",
    "use_hidden_avg",
)


@dataclass
class FeatureConfig:
    """Feature-group switches plus the softmax scaling factor.

    Defaults enable the full manual set with the scaling factor at 1.3;
    representation groups are opt-in because they need rep vectors in the dump.
    """

    use_lengths: bool = True
    use_prob: bool = True
    use_logits: bool = True
    use_entropy: bool = True
    use_scaled_softmax: bool = True
    lam: float = 1.3
    use_embedding: bool = False
    use_hidden_last: bool = False
    use_hidden_avg: bool = False

    @property
    def wants_rep(self) -> bool:
        return self.use_embedding or self.use_hidden_last or self.use_hidden_avg

    def validate(self) -> None:
        if not any(getattr(self, name) for name in _FLAG_FIELDS):
            raise ValueError("feature config enables no feature group")
        if self.use_scaled_softmax and not self.lam > 1.0:
            raise ValueError(f"scaling factor must exceed 1, got {self.lam}")
        if not math.isfinite(self.lam) or self.lam <= 0:
            raise ValueError(f"scaling factor must be positive and finite, got {self.lam}")

    def to_dict(self) -> dict:
        out = {name: getattr(self, name) for name in _FLAG_FIELDS}
        out["lambda"] = self.lam
        return out

    @classmethod
    def from_dict(cls, raw: dict) -> "FeatureConfig":
        allowed = set(_FLAG_FIELDS) | {"lambda"}
        unknown = set(raw) - allowed
        if unknown:
            raise ValueError(f"unknown feature config key(s): {sorted(unknown)}")
        kwargs = {key: raw[key] for key in raw if key != "lambda"}
        if "lambda" in raw:
            kwargs["lam"] = raw["lambda"]
        config = cls(**kwargs)
        config.validate()
        return config


@dataclass
class FeatureVector:
    values: np.ndarray
    layout: list[str]


@dataclass
class FeatureMatrix:
    """Rectangular feature matrix with one shared layout; labels optional."""

    X: np.ndarray
    layout: list[str]
    labels: np.ndarray | None = None
    ids: list[str] | None = None

    def __post_init__(self) -> None:
        if self.X.ndim != 2 or self.X.shape[1] != len(self.layout):
            raise ValueError("matrix width does not match layout length")
        if self.labels is not None and len(self.labels) != self.X.shape[0]:
            raise ValueError("labels length does not match row count")

    @property
    def n_rows(self) -> int:
        return self.X.shape[0]

    def to_csv(self, path) -> None:
        header = list(self.layout) + (["label"] if self.labels is not None else [])
        with open(path, "w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(header)
            for i in range(self.n_rows):
                row = [repr(float(v)) for v in self.X[i]]
                if self.labels is not None:
                    row.append(str(int(self.labels[i])))
                writer.writerow(row)

    @classmethod
    def from_csv(cls, path) -> "FeatureMatrix":
        with open(path, encoding="utf-8", newline="") as handle:
            reader = csv.reader(handle)
            header = next(reader)
            has_labels = bool(header) and header[-1] == "label"
            layout = header[:-1] if has_labels else header
            rows: list[list[float]] = []
            labels: list[int] = []
            for line in reader:
                if has_labels:
                    rows.append([float(v) for v in line[:-1]])
                    labels.append(int(line[-1]))
                else:
                    rows.append([float(v) for v in line])
        X = np.asarray(rows, dtype=np.float64)
        if X.size == 0:
            raise ValueError(f"{path}: no feature rows")
        return cls(
            X=X,
            layout=layout,
            labels=np.asarray(labels, dtype=np.int64) if has_labels else None,
        )


def entropy_feature(probs) -> float:
    """Entropy of the candidate probabilities plus their residual mass.

    The x*log(x) convention at x = 0 is 0, and the residual term is dropped
    when the probabilities already sum to 1 (or slightly above, within
    floating tolerance). Natural logarithm throughout.
    """
    arr = np.asarray(probs, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError("expected a non-empty 1-D probability list")
    if not np.all(np.isfinite(arr)):
        raise ValueError("non-finite probability")
    if np.any(arr < 0):
        raise ValueError(f"negative probability {arr.min()}")
    total = float(arr.sum())
    if total > 1.0 + _SUM_TOLERANCE:
        raise ValueError(f"probabilities sum to {total}, exceeding 1")
    positive = arr[arr > 0]
    entropy = -float(np.sum(positive * np.log(positive)))
    residual = 1.0 - total
    if residual > 0.0:
        entropy -= residual * math.log(residual)
    return entropy


def scaled_softmax(start_logits, end_logits, lam: float):
    """Candidate probabilities recomputed from summed logits at temperature lam.

    Implements score = (s + e)/lam - max(s + e) followed by a softmax. The
    subtraction only shifts the scores, so the output equals
    softmax((s + e)/lam); an extra internal shift keeps exp() in range.
    """
    s = np.asarray(start_logits, dtype=np.float64)
    e = np.asarray(end_logits, dtype=np.float64)
    if s.shape != e.shape or s.ndim != 1 or s.size == 0:
        raise ValueError("start/end logits must be equal-length 1-D arrays")
    if not (np.all(np.isfinite(s)) and np.all(np.isfinite(e))):
        raise ValueError("non-finite logit")
    if not math.isfinite(lam) or lam <= 0:
        raise ValueError(f"scaling factor must be positive and finite, got {lam}")
    z = s + e
    g = z / lam - z.max()
    g -= g.max()  # softmax is shift-invariant; keeps exp() bounded
    w = np.exp(g)
    return w / w.sum()


def average_hidden(per_layer, embedding) -> np.ndarray:
    """Mean of the per-layer pooled vectors together with the embedding vector."""
    layers = np.asarray(per_layer, dtype=np.float64)
    emb = np.asarray(embedding, dtype=np.float64)
    if layers.ndim != 2 or layers.shape[0] < 1:
        raise ValueError("expected at least one layer vector")
    if emb.ndim != 1 or layers.shape[1] != emb.shape[0]:
        raise ValueError(
            f"dimension mismatch: layers are {layers.shape[1]}-dim, embedding is {emb.shape[0]}-dim"
        )
    return (layers.sum(axis=0) + emb) / (layers.shape[0] + 1)


def feature_layout(config: FeatureConfig, k: int, rep_dim: int = 0) -> list[str]:
    """Canonical feature-name order for a config; pure in (config, k, rep_dim)."""
    names: list[str] = []
    if config.use_lengths:
        names += ["len_context", "len_question"]
    for j in range(k):
        if config.use_lengths:
            names.append(f"len_cand{j}")
        if config.use_prob:
            names.append(f"prob_cand{j}")
        if config.use_logits:
            names += [f"start_logit_cand{j}", f"end_logit_cand{j}"]
    if config.use_entropy:
        names.append("entropy")
    if config.use_scaled_softmax:
        names += [f"scaled_prob_cand{j}" for j in range(k)]
    if config.use_embedding:
        names += [f"emb_{i}" for i in range(rep_dim)]
    if config.use_hidden_last:
        names += [f"hidden_last_{i}" for i in range(rep_dim)]
    if config.use_hidden_avg:
        names += [f"hidden_avg_{i}" for i in range(rep_dim)]
    return names


def featurize(example: CandidateSet, config: FeatureConfig) -> FeatureVector:
    """Assemble one example's feature vector in the canonical order.

    Text lengths are counted in Unicode scalar values of the raw strings.
    """
    config.validate()
    if config.wants_rep and example.rep is None:
        raise ValueError(
            f"example '{example.id}': representation features requested but rep vectors absent"
        )
    k = len(example.candidates)
    rep_dim = example.rep.dim if (config.wants_rep and example.rep is not None) else 0
    values: list[float] = []
    if config.use_lengths:
        values += [float(len(example.context)), float(len(example.question))]
    for cand in example.candidates:
        if config.use_lengths:
            values.append(float(len(cand.text)))
        if config.use_prob:
            values.append(cand.prob)
        if config.use_logits:
            values += [cand.start_logit, cand.end_logit]
    if config.use_entropy:
        values.append(entropy_feature([c.prob for c in example.candidates]))
    if config.use_scaled_softmax:
        sp = scaled_softmax(
            [c.start_logit for c in example.candidates],
            [c.end_logit for c in example.candidates],
            config.lam,
        )
        values += [float(v) for v in sp]
    if config.use_embedding:
        values += [float(v) for v in example.rep.embedding]
    if config.use_hidden_last:
        values += [float(v) for v in example.rep.hidden_last]
    if config.use_hidden_avg:
        values += [float(v) for v in example.rep.hidden_avg]
    return FeatureVector(
        values=np.asarray(values, dtype=np.float64),
        layout=feature_layout(config, k, rep_dim),
    )


def featurize_corpus(
    corpus: Corpus, config: FeatureConfig, with_labels: bool = False
) -> FeatureMatrix:
    """Featurize every example, preserving corpus order."""
    if not corpus.examples:
        raise ValueError("empty corpus")
    rows = []
    labels = []
    for ex in corpus.examples:
        try:
            rows.append(featurize(ex, config).values)
        except ValueError as err:
            raise ValueError(f"example '{ex.id}': {err}") from err
        if with_labels:
            if ex.label is None:
                raise ValueError(f"example '{ex.id}': labels requested but example is unlabeled")
            labels.append(ex.label)
    rep_dim = corpus.meta.hidden_dim if config.wants_rep else 0
    return FeatureMatrix(
        X=np.vstack(rows),
        layout=feature_layout(config, corpus.meta.k, rep_dim or 0),
        labels=np.asarray(labels, dtype=np.int64) if with_labels else None,
        ids=corpus.ids(),
    )
