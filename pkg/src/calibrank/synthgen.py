"""Seeded synthetic candidate-dump generator with controllable distribution shift.

Every example plants a true-best rank b drawn from the profile's rank
distribution and builds texts so that exactly candidate b has token-F1 1.0
against the gold answer (labeling recovers b uniquely). Scores keep rank 0
at max probability even when b != 0: the planted pattern lives in the gap
structure (a near-tie into b followed by a cliff), in a flatter overall
distribution whenever b != 0, and in rep-vector coordinate spikes.

Shift profiles move rank mass toward ranks 1-3, keep the manual gap
pattern identical to the clean profile, and move the rep spike to a
shifted coordinate with flipped sign. A calibrator trained on clean data
therefore transfers its manual-feature rules but can never fire its
rep-feature rules on shifted data, while mixed training learns the
shift-specific rep rules; context length separates the sources.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from .core import Candidate, CandidateSet, Corpus, CorpusMeta, RepVectors, validate_corpus

VOCAB = (
    "amber basalt cedar delta ember fjord garnet harbor iris juniper kestrel lagoon "
    "marble nectar onyx pebble quartz raven sable tundra umber velvet willow xenon "
    "yarrow zephyr anchor breeze canyon drift echo flint grove hollow inlet jade "
    "knoll larch meadow nimbus orchard prairie quill ridge summit thicket upland vale "
    "wharf yonder acre bluff copse dune eyrie fen glade heath isle jetty kelp loch "
    "mesa notch oasis pike quay reef shoal tarn vista wold crag brook slate frost "
    "lichen moss fern petal stem root bark leaf seed grain husk reed rush sedge "
    "café naïve über pltano arroyo sierra pampa llano selva costa cumbre valle "
    "bruma niebla rocío trigo cobre plata hierro acero bronce "
).split()

_ID_RANK_RE = re.compile(r"-b(\d+)$")

# rep-spike amplitudes; the layer-average copy is strongest, the embedding weakest
_AMP_EMBEDDING = 0.45
_AMP_HIDDEN_LAST = 1.0
_AMP_HIDDEN_AVG = 1.15
_REP_NOISE = 0.18


@dataclass
class ShiftProfile:
    name: str
    n: int
    p_best_rank: list[float]
    k: int = 10
    l: int = 16
    signal_strength: float = 0.9
    noise_seed: int = 0
    context_len_mean: float = 300.0
    rep_offset: int = 0
    rep_sign: float = 1.0

    def validate(self) -> None:
        if self.n < 1:
            raise ValueError(f"profile '{self.name}': n must be >= 1")
        if self.k < 2:
            raise ValueError(f"profile '{self.name}': k must be >= 2")
        if self.l < 1:
            raise ValueError(f"profile '{self.name}': l must be >= 1")
        p = np.asarray(self.p_best_rank, dtype=np.float64)
        if p.shape != (self.k,) or np.any(p < 0) or abs(float(p.sum()) - 1.0) > 1e-9:
            raise ValueError(
                f"profile '{self.name}': p_best_rank must be {self.k} non-negative "
                f"values summing to 1"
            )
        if not 0.0 <= self.signal_strength <= 1.0:
            raise ValueError(f"profile '{self.name}': signal_strength outside [0, 1]")
        if self.rep_sign not in (-1.0, 1.0):
            raise ValueError(f"profile '{self.name}': rep_sign must be +1 or -1")


def planted_best_rank(example_id: str) -> int:
    """Recover the planted best rank from a generated example id."""
    match = _ID_RANK_RE.search(example_id)
    if match is None:
        raise ValueError(f"id '{example_id}' carries no planted rank suffix")
    return int(match.group(1))


def _candidate_texts(rng: np.random.Generator, k: int, b: int) -> tuple[str, list[str]]:
    """Gold text plus k candidate texts; only candidate b matches gold exactly.

    Non-best candidates keep token overlap o in {1, 2} with x extra filler
    tokens, giving token-F1 = 2o/(3 + o + x) < 1 with a strict unique max at b.
    """
    perm = rng.permutation(len(VOCAB))
    gold_tokens = [VOCAB[i] for i in perm[:3]]
    filler = [VOCAB[i] for i in perm[3:]]
    gold_text = " ".join(gold_tokens)
    texts: list[str] = []
    pool = iter(filler)
    for j in range(k):
        if j == b:
            texts.append(gold_text)
            continue
        overlap = int(rng.integers(1, 3))
        extra = int(rng.integers(0, 3))
        keep = rng.choice(3, size=overlap, replace=False)
        tokens = [gold_tokens[i] for i in sorted(keep)] + [next(pool) for _ in range(extra)]
        texts.append(" ".join(tokens))
    return gold_text, texts


def _scores(rng: np.random.Generator, k: int, b: int, strength: float) -> np.ndarray:
    """Strictly decreasing summed-logit scores with the planted gap pattern."""
    gaps = 0.55 + 0.35 * rng.random(k - 1)
    if b > 0:
        gaps[b - 1] = (1.0 - strength) * gaps[b - 1] + strength * 0.06
        if b < k - 1:
            gaps[b] += strength * 1.1
    scale = 2.2 if b == 0 else 1.0
    z = np.concatenate(([0.0], -np.cumsum(gaps))) * scale
    return z


def _sentence(rng: np.random.Generator, min_chars: float) -> str:
    words: list[str] = []
    total = 0
    while total < min_chars:
        word = VOCAB[int(rng.integers(0, len(VOCAB)))]
        words.append(word)
        total += len(word) + 1
    return " ".join(words)


def generate(profile: ShiftProfile) -> Corpus:
    """Deterministically generate a labeled-recoverable corpus for a profile."""
    profile.validate()
    p_rank = np.asarray(profile.p_best_rank, dtype=np.float64)
    p_rank = p_rank / p_rank.sum()
    sigma = profile.signal_strength
    examples = []
    for i in range(profile.n):
        rng = np.random.default_rng([profile.noise_seed, i])
        b = int(rng.choice(profile.k, p=p_rank))
        gold_text, texts = _candidate_texts(rng, profile.k, b)
        z = _scores(rng, profile.k, b, sigma)
        start = 0.6 * z + rng.normal(0.0, 0.05, profile.k)
        end = z - start
        coverage = 0.82 + 0.13 * rng.random()
        shifted = z - z.max()
        probs = coverage * np.exp(shifted) / np.exp(shifted).sum()

        coord = (b + profile.rep_offset) % profile.l
        embedding = rng.normal(0.0, _REP_NOISE, profile.l)
        hidden_last = rng.normal(0.0, _REP_NOISE, profile.l)
        hidden_avg = rng.normal(0.0, 0.15, profile.l)
        embedding[coord] += profile.rep_sign * sigma * _AMP_EMBEDDING
        hidden_last[coord] += profile.rep_sign * sigma * _AMP_HIDDEN_LAST
        hidden_avg[coord] += profile.rep_sign * sigma * _AMP_HIDDEN_AVG

        context_target = max(40.0, rng.normal(profile.context_len_mean, 25.0))
        context = _sentence(rng, context_target)
        question = _sentence(rng, 30.0 + 8.0 * rng.random()) + "?"

        examples.append(
            CandidateSet(
                id=f"{profile.name}-{i:05d}-b{b}",
                question=question,
                context=context,
                gold_answers=[gold_text],
                candidates=[
                    Candidate(
                        text=texts[j],
                        start_logit=float(start[j]),
                        end_logit=float(end[j]),
                        prob=float(probs[j]),
                    )
                    for j in range(profile.k)
                ],
                rep=RepVectors(
                    embedding=[float(v) for v in embedding],
                    hidden_last=[float(v) for v in hidden_last],
                    hidden_avg=[float(v) for v in hidden_avg],
                    num_layers=4,
                ),
            )
        )
    corpus = Corpus(
        meta=CorpusMeta(source_name=profile.name, k=profile.k, hidden_dim=profile.l),
        examples=examples,
    )
    validate_corpus(corpus)
    return corpus


_CLEAN_RANKS = [0.85, 0.055, 0.035, 0.02, 0.012, 0.008, 0.007, 0.006, 0.004, 0.003]
_SHIFT_RANKS = {
    "shift_a": [0.55, 0.17, 0.12, 0.08, 0.03, 0.02, 0.012, 0.008, 0.006, 0.004],
    "shift_b": [0.50, 0.20, 0.13, 0.09, 0.03, 0.02, 0.012, 0.008, 0.006, 0.004],
    "shift_c": [0.45, 0.22, 0.15, 0.10, 0.03, 0.02, 0.012, 0.008, 0.006, 0.004],
    "shift_d": [0.40, 0.24, 0.17, 0.11, 0.03, 0.02, 0.012, 0.008, 0.006, 0.004],
}
_SHIFT_REP_OFFSET = {"shift_a": 3, "shift_b": 5, "shift_c": 7, "shift_d": 9}
_SHIFT_CONTEXT_MEAN = {"shift_a": 420.0, "shift_b": 500.0, "shift_c": 580.0, "shift_d": 660.0}

SHIFT_NAMES = tuple(_SHIFT_RANKS)
PROFILE_NAMES = ("clean",) + SHIFT_NAMES

CLEAN_SIZE = 2000
SHIFT_SIZE = 1200


def named_profile(name: str, seed: int, n: int | None = None) -> ShiftProfile:
    """Default profile for one of the standard corpus names."""
    if name == "clean":
        return ShiftProfile(
            name="clean",
            n=CLEAN_SIZE if n is None else n,
            p_best_rank=list(_CLEAN_RANKS),
            noise_seed=seed * 100003,
            context_len_mean=300.0,
            rep_offset=0,
            rep_sign=1.0,
        )
    if name in _SHIFT_RANKS:
        idx = SHIFT_NAMES.index(name) + 1
        return ShiftProfile(
            name=name,
            n=SHIFT_SIZE if n is None else n,
            p_best_rank=list(_SHIFT_RANKS[name]),
            noise_seed=seed * 100003 + idx * 17,
            context_len_mean=_SHIFT_CONTEXT_MEAN[name],
            rep_offset=_SHIFT_REP_OFFSET[name],
            rep_sign=-1.0,
        )
    raise ValueError(f"unknown profile '{name}'; expected one of {PROFILE_NAMES}")


def standard_suite(seed: int) -> dict[str, Corpus]:
    """One clean corpus plus four shifted corpora, deterministic per seed."""
    return {name: generate(named_profile(name, seed)) for name in PROFILE_NAMES}
