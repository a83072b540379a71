"""calibrank: rerank top-k extractive QA candidates with a boosted-tree calibrator."""

from .core import (
    Candidate,
    CandidateSet,
    Corpus,
    CorpusError,
    CorpusMeta,
    ParseError,
    RepVectors,
    SchemaError,
    load_corpus,
    save_corpus,
    split_corpus,
)
from .features import (
    FeatureConfig,
    FeatureMatrix,
    FeatureVector,
    average_hidden,
    entropy_feature,
    featurize,
    featurize_corpus,
    scaled_softmax,
)
from .gbdt import BoostedModel, TrainParams, load_model, save_model, train
from .reranker import EvalReport, TrainSpec, evaluate, prepare_training, rerank, train_calibrator
from .squad import ScorePair, corpus_scores, label_best, label_corpus, normalize_answer, score
from .synthgen import ShiftProfile, generate, standard_suite

__version__ = "0.1.0"

__all__ = [
    "Candidate",
    "CandidateSet",
    "Corpus",
    "CorpusError",
    "CorpusMeta",
    "ParseError",
    "RepVectors",
    "SchemaError",
    "load_corpus",
    "save_corpus",
    "split_corpus",
    "FeatureConfig",
    "FeatureMatrix",
    "FeatureVector",
    "average_hidden",
    "entropy_feature",
    "featurize",
    "featurize_corpus",
    "scaled_softmax",
    "BoostedModel",
    "TrainParams",
    "load_model",
    "save_model",
    "train",
    "EvalReport",
    "TrainSpec",
    "evaluate",
    "prepare_training",
    "rerank",
    "train_calibrator",
    "ScorePair",
    "corpus_scores",
    "label_best",
    "label_corpus",
    "normalize_answer",
    "score",
    "ShiftProfile",
    "generate",
    "standard_suite",
]
