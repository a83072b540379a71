"""Second-order gradient-boosted decision trees with a softmax objective.

Multi-class "one tree per class per round" construction: each round
computes per-row gradients/hessians of the multi-class log-loss from the
current margins and grows one regularized regression tree per class with
exact greedy split search. Leaf weights are Newton steps shrunk by the
learning rate. Split gain:

    1/2 * [ G_L^2/(H_L+lambda) + G_R^2/(H_R+lambda) - G^2/(H+lambda) ] - gamma

Every tie (equal gain, equal probability) breaks toward the lowest feature
index, lowest threshold, or lowest class, so training and prediction are
deterministic regardless of the worker count.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .features import FeatureMatrix, FeatureVector

MODEL_SCHEMA_VERSION = 1
HESS_FLOOR = 1e-16


class ModelError(ValueError):
    """Model file is malformed or carries an unsupported schema version."""


@dataclass
class TrainParams:
    num_classes: int
    num_rounds: int = 160
    learning_rate: float = 0.1
    max_depth: int = 6
    min_child_weight: float = 1.0
    reg_lambda: float = 1.0
    gamma: float = 0.0
    subsample: float = 1.0
    colsample: float = 1.0
    seed: int = 0

    def validate(self) -> None:
        if self.num_classes < 2:
            raise ValueError(f"num_classes must be >= 2, got {self.num_classes}")
        if self.num_rounds < 1:
            raise ValueError(f"num_rounds must be >= 1, got {self.num_rounds}")
        if not 0.0 < self.learning_rate <= 1.0:
            raise ValueError(f"learning_rate must be in (0, 1], got {self.learning_rate}")
        if self.max_depth < 1:
            raise ValueError(f"max_depth must be >= 1, got {self.max_depth}")
        if self.min_child_weight < 0:
            raise ValueError("min_child_weight must be >= 0")
        if self.reg_lambda < 0:
            raise ValueError("reg_lambda must be >= 0")
        if self.gamma < 0:
            raise ValueError("gamma must be >= 0")
        for name in ("subsample", "colsample"):
            value = getattr(self, name)
            if not 0.0 < value <= 1.0:
                raise ValueError(f"{name} must be in (0, 1], got {value}")

    def to_dict(self) -> dict:
        return {
            "num_classes": self.num_classes,
            "num_rounds": self.num_rounds,
            "learning_rate": self.learning_rate,
            "max_depth": self.max_depth,
            "min_child_weight": self.min_child_weight,
            "reg_lambda": self.reg_lambda,
            "gamma": self.gamma,
            "subsample": self.subsample,
            "colsample": self.colsample,
            "seed": self.seed,
        }


@dataclass
class Tree:
    """Flat array representation; feature == -1 marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    weight: np.ndarray

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf weight per row; rule at internal nodes is value < threshold."""
        out = np.empty(X.shape[0], dtype=np.float64)
        stack = [(0, np.arange(X.shape[0]))]
        while stack:
            node, rows = stack.pop()
            if rows.size == 0:
                continue
            feat = self.feature[node]
            if feat < 0:
                out[rows] = self.weight[node]
            else:
                go_left = X[rows, feat] < self.threshold[node]
                stack.append((int(self.left[node]), rows[go_left]))
                stack.append((int(self.right[node]), rows[~go_left]))
        return out

    def num_leaves(self) -> int:
        return int(np.sum(self.feature < 0))


@dataclass
class BoostedModel:
    """Trained ensemble: trees[r][c] contributes to class c's margin.

    Leaf weights already include the learning-rate shrinkage, so the margin
    for class c is base_margin plus the plain sum of tree outputs.
    """

    params: TrainParams
    trees: list[list[Tree]]
    base_margin: float
    feature_layout: list[str]
    meta: dict = field(default_factory=dict)

    def margins(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        out = np.full((X.shape[0], self.params.num_classes), self.base_margin, dtype=np.float64)
        for round_trees in self.trees:
            for c, tree in enumerate(round_trees):
                out[:, c] += tree.apply(X)
        return out

    def predict_proba_matrix(self, X: np.ndarray) -> np.ndarray:
        return softmax(self.margins(X))

    def predict_class_matrix(self, X: np.ndarray) -> np.ndarray:
        return np.argmax(self.predict_proba_matrix(X), axis=1)


def softmax(margins: np.ndarray) -> np.ndarray:
    z = margins - np.max(margins, axis=-1, keepdims=True)
    w = np.exp(z)
    return w / np.sum(w, axis=-1, keepdims=True)


def softmax_grad_hess(margins, label: int) -> tuple[np.ndarray, np.ndarray]:
    """Gradient and (diagonal) hessian of the multi-class log-loss at one row."""
    m = np.asarray(margins, dtype=np.float64)
    if m.ndim != 1 or not np.all(np.isfinite(m)):
        raise ValueError("margins must be a finite 1-D array")
    if not 0 <= label < m.size:
        raise ValueError(f"label {label} outside [0, {m.size - 1}]")
    p = softmax(m)
    grad = p.copy()
    grad[label] -= 1.0
    hess = np.maximum(p * (1.0 - p), HESS_FLOOR)
    return grad, hess


def log_loss(margins: np.ndarray, labels: np.ndarray) -> float:
    z = margins - np.max(margins, axis=1, keepdims=True)
    log_norm = np.log(np.sum(np.exp(z), axis=1))
    return float(np.mean(log_norm - z[np.arange(len(labels)), labels]))


@dataclass(frozen=True)
class Split:
    feature: int
    threshold: float
    gain: float


def _best_split_in_columns(
    X: np.ndarray,
    rows: np.ndarray,
    cols: np.ndarray,
    grads: np.ndarray,
    hesses: np.ndarray,
    params: TrainParams,
) -> tuple[float, int, float] | None:
    """Best (gain, global column, threshold) over a contiguous column chunk.

    One batched argsort/cumsum evaluates every candidate threshold of every
    column; np.argmax's first-occurrence rule realizes the lowest-threshold
    and lowest-feature tie-breaks because thresholds ascend with sort order
    and columns are scanned in ascending index order.
    """
    sub = X[np.ix_(rows, cols)]
    g = grads[rows]
    h = hesses[rows]
    order = np.argsort(sub, axis=0)
    values = np.take_along_axis(sub, order, axis=0)
    g_cum = np.cumsum(g[order], axis=0)
    h_cum = np.cumsum(h[order], axis=0)
    g_total = float(g.sum())
    h_total = float(h.sum())

    g_left = g_cum[:-1]
    h_left = h_cum[:-1]
    g_right = g_total - g_left
    h_right = h_total - h_left
    valid = (
        (values[1:] > values[:-1])
        & (h_left >= params.min_child_weight)
        & (h_right >= params.min_child_weight)
    )
    if not valid.any():
        return None
    parent_score = g_total * g_total / (h_total + params.reg_lambda)
    gains = 0.5 * (
        g_left * g_left / (h_left + params.reg_lambda)
        + g_right * g_right / (h_right + params.reg_lambda)
        - parent_score
    ) - params.gamma
    gains = np.where(valid, gains, -np.inf)

    per_col_pos = np.argmax(gains, axis=0)
    per_col_gain = gains[per_col_pos, np.arange(gains.shape[1])]
    best_col = int(np.argmax(per_col_gain))
    best_gain = float(per_col_gain[best_col])
    if not np.isfinite(best_gain):
        return None
    pos = int(per_col_pos[best_col])
    threshold = 0.5 * (float(values[pos, best_col]) + float(values[pos + 1, best_col]))
    return best_gain, int(cols[best_col]), threshold


def find_best_split(
    X: np.ndarray,
    rows: np.ndarray,
    grads: np.ndarray,
    hesses: np.ndarray,
    params: TrainParams,
    columns: np.ndarray | None = None,
    pool: ThreadPoolExecutor | None = None,
) -> Split | None:
    """Exact greedy split over midpoints of consecutive distinct sorted values.

    Returns None when the best regularized gain is not positive or no
    threshold satisfies min_child_weight on both children.
    """
    rows = np.asarray(rows)
    if rows.size < 2:
        return None
    cols = np.arange(X.shape[1]) if columns is None else np.asarray(columns)
    if pool is None or cols.size < 8:
        chunks = [cols]
    else:
        chunks = np.array_split(cols, pool._max_workers)
        chunks = [c for c in chunks if c.size]
    if len(chunks) == 1:
        results = [_best_split_in_columns(X, rows, chunks[0], grads, hesses, params)]
    else:
        futures = [
            pool.submit(_best_split_in_columns, X, rows, chunk, grads, hesses, params)
            for chunk in chunks
        ]
        results = [f.result() for f in futures]

    best: tuple[float, int, float] | None = None
    for candidate in results:  # chunks ascend in column index: strict > keeps ties low
        if candidate is None:
            continue
        if best is None or candidate[0] > best[0]:
            best = candidate
    if best is None or best[0] <= 0.0:
        return None
    return Split(feature=best[1], threshold=best[2], gain=best[0])


class _TreeBuilder:
    def __init__(self, X, grads, hesses, params, columns, pool):
        self.X = X
        self.grads = grads
        self.hesses = hesses
        self.params = params
        self.columns = columns
        self.pool = pool
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.weight: list[float] = []

    def _alloc(self) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.weight.append(0.0)
        return len(self.feature) - 1

    def _grow(self, rows: np.ndarray, depth: int) -> int:
        node = self._alloc()
        split = None
        if depth < self.params.max_depth and rows.size >= 2:
            split = find_best_split(
                self.X, rows, self.grads, self.hesses, self.params, self.columns, self.pool
            )
        if split is None:
            g = float(self.grads[rows].sum())
            h = float(self.hesses[rows].sum())
            self.weight[node] = -self.params.learning_rate * g / (h + self.params.reg_lambda)
            return node
        go_left = self.X[rows, split.feature] < split.threshold
        left_id = self._grow(rows[go_left], depth + 1)
        right_id = self._grow(rows[~go_left], depth + 1)
        self.feature[node] = split.feature
        self.threshold[node] = split.threshold
        self.left[node] = left_id
        self.right[node] = right_id
        return node

    def build(self, rows: np.ndarray) -> Tree:
        self._grow(rows, depth=0)
        return Tree(
            feature=np.asarray(self.feature, dtype=np.int32),
            threshold=np.asarray(self.threshold, dtype=np.float64),
            left=np.asarray(self.left, dtype=np.int32),
            right=np.asarray(self.right, dtype=np.int32),
            weight=np.asarray(self.weight, dtype=np.float64),
        )


def train(
    matrix: FeatureMatrix,
    params: TrainParams,
    round_callback=None,
    n_jobs: int = 1,
) -> BoostedModel:
    """Fit the boosted ensemble on a labeled feature matrix.

    Deterministic given (matrix, params): subsampling draws come from one
    seeded generator in a fixed (round, class) order, and split search is
    scheduling-independent, so reruns and different n_jobs produce
    bit-identical models. round_callback(round_index, train_log_loss) is
    invoked after each round when given.
    """
    params.validate()
    if matrix.labels is None:
        raise ValueError("training requires a labeled feature matrix")
    X = np.ascontiguousarray(matrix.X, dtype=np.float64)
    y = np.asarray(matrix.labels, dtype=np.int64)
    n, d = X.shape
    if n == 0:
        raise ValueError("empty feature matrix")
    if y.min() < 0 or y.max() >= params.num_classes:
        raise ValueError(
            f"labels outside [0, {params.num_classes - 1}]: found range [{y.min()}, {y.max()}]"
        )
    if np.unique(y).size < 2:
        raise ValueError("training requires at least 2 distinct labels")

    rng = np.random.default_rng(params.seed)
    margins = np.zeros((n, params.num_classes), dtype=np.float64)
    row_index = np.arange(n)
    all_rows = np.arange(n)
    all_cols = np.arange(d)
    trees: list[list[Tree]] = []
    pool = ThreadPoolExecutor(max_workers=n_jobs) if n_jobs > 1 else None
    try:
        for round_idx in range(params.num_rounds):
            probs = softmax(margins)
            grads_all = probs.copy()
            grads_all[row_index, y] -= 1.0
            hess_all = np.maximum(probs * (1.0 - probs), HESS_FLOOR)
            round_trees: list[Tree] = []
            for c in range(params.num_classes):
                if params.colsample < 1.0:
                    n_cols = max(1, int(round(params.colsample * d)))
                    cols = np.sort(rng.choice(d, size=n_cols, replace=False))
                else:
                    cols = all_cols
                if params.subsample < 1.0:
                    n_rows = max(2, int(np.floor(params.subsample * n)))
                    rows = np.sort(rng.choice(n, size=n_rows, replace=False))
                else:
                    rows = all_rows
                builder = _TreeBuilder(
                    X, grads_all[:, c], hess_all[:, c], params, cols, pool
                )
                tree = builder.build(rows)
                margins[:, c] += tree.apply(X)
                round_trees.append(tree)
            trees.append(round_trees)
            if round_callback is not None:
                round_callback(round_idx, log_loss(margins, y))
    finally:
        if pool is not None:
            pool.shutdown()

    return BoostedModel(
        params=params,
        trees=trees,
        base_margin=0.0,
        feature_layout=list(matrix.layout),
    )


def _check_layout(model: BoostedModel, layout: list[str]) -> None:
    if list(layout) != list(model.feature_layout):
        raise ValueError(
            f"feature layout mismatch: model expects {len(model.feature_layout)} features, "
            f"input has {len(layout)}"
        )


def predict_proba(model: BoostedModel, x: FeatureVector) -> np.ndarray:
    _check_layout(model, x.layout)
    return model.predict_proba_matrix(x.values.reshape(1, -1))[0]


def predict_class(model: BoostedModel, x: FeatureVector) -> int:
    return int(np.argmax(predict_proba(model, x)))


def predict_classes(model: BoostedModel, matrix: FeatureMatrix) -> np.ndarray:
    _check_layout(model, matrix.layout)
    return model.predict_class_matrix(matrix.X)


def _tree_to_dict(tree: Tree) -> dict:
    return {
        "feature": tree.feature.tolist(),
        "threshold": tree.threshold.tolist(),
        "left": tree.left.tolist(),
        "right": tree.right.tolist(),
        "weight": tree.weight.tolist(),
    }


def _tree_from_dict(raw: dict) -> Tree:
    try:
        return Tree(
            feature=np.asarray(raw["feature"], dtype=np.int32),
            threshold=np.asarray(raw["threshold"], dtype=np.float64),
            left=np.asarray(raw["left"], dtype=np.int32),
            right=np.asarray(raw["right"], dtype=np.int32),
            weight=np.asarray(raw["weight"], dtype=np.float64),
        )
    except (KeyError, TypeError, ValueError) as err:
        raise ModelError(f"malformed tree record: {err}") from err


def save_model(model: BoostedModel, path) -> None:
    payload = {
        "schema_version": MODEL_SCHEMA_VERSION,
        "params": model.params.to_dict(),
        "base_margin": model.base_margin,
        "feature_layout": list(model.feature_layout),
        "meta": model.meta,
        "trees": [[_tree_to_dict(t) for t in round_trees] for round_trees in model.trees],
    }
    Path(path).write_text(json.dumps(payload), encoding="utf-8")


def load_model(path) -> BoostedModel:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as err:
        raise ModelError(f"{path}: malformed model file: {err}") from err
    if not isinstance(raw, dict) or raw.get("schema_version") != MODEL_SCHEMA_VERSION:
        raise ModelError(
            f"{path}: unsupported model schema version {raw.get('schema_version')!r}"
            if isinstance(raw, dict)
            else f"{path}: malformed model file"
        )
    try:
        params = TrainParams(**raw["params"])
        params.validate()
        trees = [[_tree_from_dict(t) for t in round_trees] for round_trees in raw["trees"]]
        return BoostedModel(
            params=params,
            trees=trees,
            base_margin=float(raw["base_margin"]),
            feature_layout=list(raw["feature_layout"]),
            meta=dict(raw.get("meta", {})),
        )
    except (KeyError, TypeError) as err:
        raise ModelError(f"{path}: malformed model file: {err}") from err
