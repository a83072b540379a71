"""Candidate-dump data model and JSON (de)serialization.

A dump carries, per example, the question/context pair, the gold answers,
and the producing model's top-k candidate answer spans with their boundary
logits and softmax probabilities, plus optional pooled representation
vectors. Candidates are stored in the producer's ranking order and are
never re-sorted here: the rank index itself is feature-bearing downstream.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field, replace
from pathlib import Path

SCHEMA_VERSION = 1


class CorpusError(ValueError):
    """Base class for dump loading/validation failures."""


class ParseError(CorpusError):
    """File is not well-formed JSON."""


class SchemaError(CorpusError):
    """JSON parses but violates the dump schema or an invariant."""


@dataclass
class Candidate:
    """One ranked answer span. Empty text encodes a no-answer prediction."""

    text: str
    start_logit: float
    end_logit: float
    prob: float


@dataclass
class RepVectors:
    """Pooled per-example representation vectors of a shared dimension."""

    embedding: list[float]
    hidden_last: list[float]
    hidden_avg: list[float]
    num_layers: int

    @property
    def dim(self) -> int:
        return len(self.embedding)


@dataclass
class CandidateSet:
    """One example: question/context, golds, and its ranked top-k candidates.

    ``gold_answers == []`` marks an unanswerable example. ``label`` is the
    index of the best candidate, filled by the scoring module.
    """

    id: str
    question: str
    context: str
    gold_answers: list[str]
    candidates: list[Candidate]
    rep: RepVectors | None = None
    label: int | None = None


@dataclass
class CorpusMeta:
    source_name: str
    k: int
    hidden_dim: int | None = None
    schema_version: int = SCHEMA_VERSION
    extras: dict = field(default_factory=dict)


@dataclass
class Corpus:
    meta: CorpusMeta
    examples: list[CandidateSet]

    def __len__(self) -> int:
        return len(self.examples)

    def ids(self) -> list[str]:
        return [ex.id for ex in self.examples]

    def is_labeled(self) -> bool:
        return bool(self.examples) and all(ex.label is not None for ex in self.examples)


def _finite_number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise SchemaError(f"{where}: non-finite value {value!r}")
    return float(value)


def _required(obj: dict, key: str, where: str):
    if key not in obj:
        raise SchemaError(f"{where}: missing field '{key}'")
    return obj[key]


def _string(value, where: str) -> str:
    if not isinstance(value, str):
        raise SchemaError(f"{where}: expected string, got {type(value).__name__}")
    return value


def _check_keys(obj: dict, allowed: set[str], where: str) -> None:
    extra = set(obj) - allowed
    if extra:
        raise SchemaError(f"{where}: unexpected field(s) {sorted(extra)}")


def _vector(value, where: str) -> list[float]:
    if not isinstance(value, list) or not value:
        raise SchemaError(f"{where}: expected non-empty array of numbers")
    return [_finite_number(x, f"{where}[{i}]") for i, x in enumerate(value)]


def _candidate_from_dict(raw, where: str) -> Candidate:
    if not isinstance(raw, dict):
        raise SchemaError(f"{where}: expected object")
    _check_keys(raw, {"text", "start_logit", "end_logit", "prob"}, where)
    text = _string(_required(raw, "text", where), f"{where}.text")
    start_logit = _finite_number(_required(raw, "start_logit", where), f"{where}.start_logit")
    end_logit = _finite_number(_required(raw, "end_logit", where), f"{where}.end_logit")
    prob = _finite_number(_required(raw, "prob", where), f"{where}.prob")
    if not 0.0 <= prob <= 1.0:
        raise SchemaError(f"{where}.prob: {prob} outside [0, 1]")
    return Candidate(text=text, start_logit=start_logit, end_logit=end_logit, prob=prob)


def _rep_from_dict(raw, where: str) -> RepVectors:
    if not isinstance(raw, dict):
        raise SchemaError(f"{where}: expected object or null")
    _check_keys(raw, {"embedding", "hidden_last", "hidden_avg", "num_layers"}, where)
    embedding = _vector(_required(raw, "embedding", where), f"{where}.embedding")
    hidden_last = _vector(_required(raw, "hidden_last", where), f"{where}.hidden_last")
    hidden_avg = _vector(_required(raw, "hidden_avg", where), f"{where}.hidden_avg")
    num_layers = _required(raw, "num_layers", where)
    if isinstance(num_layers, bool) or not isinstance(num_layers, int) or num_layers < 1:
        raise SchemaError(f"{where}.num_layers: expected positive integer, got {num_layers!r}")
    if not len(embedding) == len(hidden_last) == len(hidden_avg):
        raise SchemaError(
            f"{where}: vector dimensions differ "
            f"({len(embedding)}, {len(hidden_last)}, {len(hidden_avg)})"
        )
    return RepVectors(embedding, hidden_last, hidden_avg, num_layers)


def _example_from_dict(raw, k: int, where: str) -> CandidateSet:
    if not isinstance(raw, dict):
        raise SchemaError(f"{where}: expected object")
    _check_keys(
        raw, {"id", "question", "context", "gold_answers", "candidates", "rep", "label"}, where
    )
    ex_id = _string(_required(raw, "id", where), f"{where}.id")
    where = f"example '{ex_id}'"
    question = _string(_required(raw, "question", where), f"{where}.question")
    context = _string(_required(raw, "context", where), f"{where}.context")
    golds_raw = _required(raw, "gold_answers", where)
    if not isinstance(golds_raw, list):
        raise SchemaError(f"{where}.gold_answers: expected array")
    golds = [_string(g, f"{where}.gold_answers[{i}]") for i, g in enumerate(golds_raw)]
    cands_raw = _required(raw, "candidates", where)
    if not isinstance(cands_raw, list):
        raise SchemaError(f"{where}.candidates: expected array")
    if len(cands_raw) != k:
        raise SchemaError(f"{where}: candidates has {len(cands_raw)} entries, expected k={k}")
    candidates = [
        _candidate_from_dict(c, f"{where}.candidates[{j}]") for j, c in enumerate(cands_raw)
    ]
    for j in range(1, len(candidates)):
        if candidates[j].prob > candidates[j - 1].prob:
            raise SchemaError(
                f"{where}: candidate probs not non-increasing at index {j} "
                f"({candidates[j].prob} > {candidates[j - 1].prob})"
            )
    rep_raw = _required(raw, "rep", where)
    rep = None if rep_raw is None else _rep_from_dict(rep_raw, f"{where}.rep")
    label = _required(raw, "label", where)
    if label is not None:
        if isinstance(label, bool) or not isinstance(label, int) or not 0 <= label < k:
            raise SchemaError(f"{where}.label: expected integer in [0, {k - 1}] or null, got {label!r}")
    return CandidateSet(
        id=ex_id,
        question=question,
        context=context,
        gold_answers=golds,
        candidates=candidates,
        rep=rep,
        label=label,
    )


def corpus_from_dict(raw) -> Corpus:
    """Build and fully validate a Corpus from a parsed dump dictionary."""
    if not isinstance(raw, dict):
        raise SchemaError("corpus: expected top-level object")
    _check_keys(raw, {"schema_version", "meta", "examples"}, "corpus")
    version = _required(raw, "schema_version", "corpus")
    if version != SCHEMA_VERSION:
        raise SchemaError(f"corpus: unsupported schema_version {version!r}")
    meta_raw = _required(raw, "meta", "corpus")
    if not isinstance(meta_raw, dict):
        raise SchemaError("corpus.meta: expected object")
    source_name = _string(_required(meta_raw, "source_name", "corpus.meta"), "corpus.meta.source_name")
    k = _required(meta_raw, "k", "corpus.meta")
    if isinstance(k, bool) or not isinstance(k, int) or k < 1:
        raise SchemaError(f"corpus.meta.k: expected integer >= 1, got {k!r}")
    hidden_dim = meta_raw.get("hidden_dim")
    if hidden_dim is not None and (isinstance(hidden_dim, bool) or not isinstance(hidden_dim, int) or hidden_dim < 1):
        raise SchemaError(f"corpus.meta.hidden_dim: expected integer >= 1 or null, got {hidden_dim!r}")
    extras = {key: meta_raw[key] for key in meta_raw if key not in {"source_name", "k", "hidden_dim"}}
    meta = CorpusMeta(
        source_name=source_name, k=k, hidden_dim=hidden_dim, schema_version=version, extras=extras
    )
    examples_raw = _required(raw, "examples", "corpus")
    if not isinstance(examples_raw, list):
        raise SchemaError("corpus.examples: expected array")
    examples = [
        _example_from_dict(e, k, f"examples[{i}]") for i, e in enumerate(examples_raw)
    ]
    corpus = Corpus(meta=meta, examples=examples)
    validate_corpus(corpus)
    return corpus


def validate_corpus(corpus: Corpus) -> None:
    """Check the cross-example invariants; raise SchemaError naming offenders."""
    k = corpus.meta.k
    seen: set[str] = set()
    with_rep = [ex.id for ex in corpus.examples if ex.rep is not None]
    for ex in corpus.examples:
        if ex.id in seen:
            raise SchemaError(f"example '{ex.id}': duplicate id")
        seen.add(ex.id)
        if len(ex.candidates) != k:
            raise SchemaError(
                f"example '{ex.id}': candidates has {len(ex.candidates)} entries, expected k={k}"
            )
    if with_rep and len(with_rep) != len(corpus.examples):
        missing = next(ex.id for ex in corpus.examples if ex.rep is None)
        raise SchemaError(
            f"example '{missing}': rep vectors present on some examples but missing here"
        )
    if with_rep:
        if corpus.meta.hidden_dim is None:
            raise SchemaError("corpus.meta.hidden_dim: null although examples carry rep vectors")
        for ex in corpus.examples:
            if ex.rep.dim != corpus.meta.hidden_dim:
                raise SchemaError(
                    f"example '{ex.id}': rep dimension {ex.rep.dim} != meta.hidden_dim "
                    f"{corpus.meta.hidden_dim}"
                )
    elif corpus.meta.hidden_dim is not None and corpus.examples:
        raise SchemaError("corpus.meta.hidden_dim set but no example carries rep vectors")


def corpus_to_dict(corpus: Corpus) -> dict:
    meta = {
        "source_name": corpus.meta.source_name,
        "k": corpus.meta.k,
        "hidden_dim": corpus.meta.hidden_dim,
    }
    meta.update(corpus.meta.extras)
    return {
        "schema_version": corpus.meta.schema_version,
        "meta": meta,
        "examples": [
            {
                "id": ex.id,
                "question": ex.question,
                "context": ex.context,
                "gold_answers": list(ex.gold_answers),
                "candidates": [
                    {
                        "text": c.text,
                        "start_logit": c.start_logit,
                        "end_logit": c.end_logit,
                        "prob": c.prob,
                    }
                    for c in ex.candidates
                ],
                "rep": None
                if ex.rep is None
                else {
                    "embedding": list(ex.rep.embedding),
                    "hidden_last": list(ex.rep.hidden_last),
                    "hidden_avg": list(ex.rep.hidden_avg),
                    "num_layers": ex.rep.num_layers,
                },
                "label": ex.label,
            }
            for ex in corpus.examples
        ],
    }


def load_corpus(path) -> Corpus:
    """Load and validate a candidate dump file."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as err:
        raise ParseError(f"{path}: malformed JSON: {err}") from err
    return corpus_from_dict(raw)


def save_corpus(corpus: Corpus, path) -> None:
    """Write a validated corpus as UTF-8 JSON.

    Floats are serialized with Python's shortest round-trip repr, so
    load(save(c)) reproduces every value bit-exactly.
    """
    validate_corpus(corpus)
    payload = json.dumps(corpus_to_dict(corpus), ensure_ascii=False, allow_nan=False)
    Path(path).write_text(payload, encoding="utf-8")


def split_corpus(corpus: Corpus, fraction: float, seed: int) -> tuple[Corpus, Corpus]:
    """Seeded shuffle-split; the first part holds floor(fraction * N) examples.

    Both parts keep the original corpus order and share example objects
    (corpora are treated as immutable apart from label filling).
    """
    if not corpus.examples:
        raise ValueError("cannot split an empty corpus")
    if not 0.0 < fraction < 1.0:
        raise ValueError(f"fraction must be in (0, 1), got {fraction}")
    n = len(corpus.examples)
    idx = list(range(n))
    random.Random(seed).shuffle(idx)
    cut = math.floor(fraction * n)
    first = sorted(idx[:cut])
    second = sorted(idx[cut:])
    meta = replace(corpus.meta, extras=dict(corpus.meta.extras))
    return (
        Corpus(meta=meta, examples=[corpus.examples[i] for i in first]),
        Corpus(meta=replace(meta, extras=dict(meta.extras)), examples=[corpus.examples[i] for i in second]),
    )
