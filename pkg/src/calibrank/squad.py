"""SQuAD-style answer scoring: normalization, EM/F1, and best-candidate labeling.

Normalization removes Unicode punctuation (general categories P*)
character-wise, which is a broader set than ASCII-only punctuation;
the golden test suite is hand-computed against exactly these rules.
"""

from __future__ import annotations

import unicodedata
from collections import Counter
from dataclasses import dataclass

from .core import CandidateSet, Corpus

_ARTICLES = frozenset({"a", "an", "the"})


def _is_punct(ch: str) -> bool:
    return unicodedata.category(ch).startswith("P")


def normalize_answer(text: str) -> str:
    """Lowercase, drop punctuation, drop article tokens, collapse whitespace."""
    stripped = "".join(ch for ch in text.lower() if not _is_punct(ch))
    tokens = [tok for tok in stripped.split() if tok not in _ARTICLES]
    return " ".join(tokens)


@dataclass(frozen=True)
class ScorePair:
    em: int
    f1: float


def _token_f1(pred_tokens: list[str], gold_tokens: list[str]) -> float:
    if not pred_tokens or not gold_tokens:
        # no-answer on either side: full credit only when both are empty
        return float(pred_tokens == gold_tokens)
    overlap = sum((Counter(pred_tokens) & Counter(gold_tokens)).values())
    if overlap == 0:
        return 0.0
    precision = overlap / len(pred_tokens)
    recall = overlap / len(gold_tokens)
    return 2.0 * precision * recall / (precision + recall)


def score(prediction: str, gold_answers: list[str]) -> ScorePair:
    """EM/F1 of a prediction against a gold list; empty list = unanswerable."""
    pred_norm = normalize_answer(prediction)
    if not gold_answers:
        hit = int(pred_norm == "")
        return ScorePair(em=hit, f1=float(hit))
    pred_tokens = pred_norm.split()
    em = 0
    f1 = 0.0
    for gold in gold_answers:
        gold_norm = normalize_answer(gold)
        if pred_norm == gold_norm:
            em = 1
        f1 = max(f1, _token_f1(pred_tokens, gold_norm.split()))
    return ScorePair(em=em, f1=f1)


def label_best(example: CandidateSet) -> int:
    """Label the candidate index with maximal F1; ties keep the smallest index.

    The result is written back into ``example.label`` and returned.
    """
    if not example.candidates:
        raise ValueError(f"example '{example.id}': no candidates to label")
    best_j = 0
    best_f1 = -1.0
    for j, cand in enumerate(example.candidates):
        f1 = score(cand.text, example.gold_answers).f1
        if f1 > best_f1:
            best_f1 = f1
            best_j = j
    example.label = best_j
    return best_j


def label_corpus(corpus: Corpus) -> Corpus:
    """Apply label_best to every example in place; returns the corpus."""
    for ex in corpus.examples:
        label_best(ex)
    return corpus


def corpus_scores(corpus: Corpus, choices: list[int]) -> dict[str, float]:
    """Mean EM and F1 (as percentages) of the chosen candidate per example."""
    if len(choices) != len(corpus.examples):
        raise ValueError(
            f"choices length {len(choices)} != corpus size {len(corpus.examples)}"
        )
    if not corpus.examples:
        raise ValueError("empty corpus")
    k = corpus.meta.k
    em_sum = 0
    f1_sum = 0.0
    for ex, choice in zip(corpus.examples, choices):
        if not 0 <= choice < k:
            raise ValueError(f"example '{ex.id}': choice {choice} outside [0, {k - 1}]")
        pair = score(ex.candidates[choice].text, ex.gold_answers)
        em_sum += pair.em
        f1_sum += pair.f1
    n = len(corpus.examples)
    return {"em": 100.0 * em_sum / n, "f1": 100.0 * f1_sum / n}
