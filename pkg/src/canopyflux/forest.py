"""Regression random forest, built from scratch.

CART trees with variance-reduction splits: at every node a fresh uniform
sample of ``mtry`` candidate features is drawn, candidate thresholds are
the midpoints between consecutive sorted distinct values, and the split
maximizing ``SSE(parent) - SSE(left) - SSE(right)`` wins. Ties break to
the lowest feature index, then the lowest threshold, so a fit is fully
reproducible. Trees train on bootstrap samples (size n, with replacement)
unless disabled, and the ensemble prediction is the arithmetic mean of
the per-tree leaf means.

Randomness: tree ``i`` of a forest seeded with ``s`` draws from the
stream ``(s, 1, i)``; within a tree the bootstrap indices are drawn
first, then one feature sample per attempted split in depth-first
(left before right) order. Fits are therefore identical regardless of
thread count or evaluation order.

Variable importance is impurity-based: the per-feature sum of SSE
reductions across all splits of all trees.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import EmptyTrainingSet, ModelFormatError, ShapeError
from .rng import derive_rng

FOREST_SCHEMA = "forest-v1"

LEAF = -1


@dataclass(frozen=True)
class SplitCandidate:
    feature_index: int
    threshold: float
    sse_reduction: float  # >= 0


@dataclass
class RegressionTree:
    """Binary tree in flat preorder arrays; ``feature_index == -1`` marks a leaf."""

    feature_index: np.ndarray  # int32
    threshold: np.ndarray  # float64, nan at leaves
    left: np.ndarray  # int32, -1 at leaves
    right: np.ndarray  # int32, -1 at leaves
    value: np.ndarray  # float64, mean of training targets in the node
    n_samples: np.ndarray  # int32
    sse_reduction: np.ndarray  # float64, 0 at leaves

    def predict_row(self, row: np.ndarray) -> float:
        i = 0
        while self.feature_index[i] != LEAF:
            if row[self.feature_index[i]] <= self.threshold[i]:
                i = self.left[i]
            else:
                i = self.right[i]
        return float(self.value[i])

    def n_leaves(self) -> int:
        return int(np.count_nonzero(self.feature_index == LEAF))


@dataclass(frozen=True)
class ForestConfig:
    """Training knobs. ``mtry=None`` resolves to max(p // 3, 1), the usual
    regression default; the cross-validation tuner overrides it anyway."""

    n_trees: int = 500
    mtry: int | None = None
    min_node_size: int = 5
    bootstrap: bool = True
    seed: int = 0


@dataclass
class Forest:
    trees: list[RegressionTree]
    mtry: int
    n_trees: int
    min_node_size: int
    bootstrap: bool
    seed: int
    feature_names: list[str] = field(default_factory=list)

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def predict_row(self, row: np.ndarray) -> float:
        row = np.asarray(row, dtype=np.float64)
        if row.shape != (self.n_features,):
            raise ShapeError(f"expected {self.n_features} features, got shape {row.shape}")
        return math.fsum(t.predict_row(row) for t in self.trees) / len(self.trees)

    def predict(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.n_features:
            raise ShapeError(f"expected (n, {self.n_features}) matrix, got shape {x.shape}")
        return np.array([self.predict_row(row) for row in x])


def _node_mean(ys: np.ndarray) -> float:
    # fsum is exactly rounded, so node statistics do not depend on row order
    if np.ptp(ys) == 0.0:
        return float(ys[0])
    return math.fsum(ys) / len(ys)


def _node_sse(ys: np.ndarray) -> float:
    s = math.fsum(ys)
    return math.fsum(ys * ys) - s * s / len(ys)


def _best_split_indexed(
    x: np.ndarray,
    y: np.ndarray,
    idx: np.ndarray,
    candidate_features: np.ndarray,
    min_node_size: int,
) -> SplitCandidate | None:
    """Exhaustive threshold search over the candidate features for the rows
    in ``idx``. Returns None when no split reduces SSE or every admissible
    split would leave a child below ``min_node_size``."""
    n = len(idx)
    if n < 2:
        return None
    y_node = y[idx]
    sse_parent = _node_sse(y_node)
    best: SplitCandidate | None = None
    positions = np.arange(1, n)
    for j in np.sort(np.asarray(candidate_features)):
        xj = x[idx, j]
        order = np.argsort(xj, kind="stable")
        xs = xj[order]
        if xs[0] == xs[-1]:
            continue  # constant feature in this node
        ys = y_node[order]
        cs = np.cumsum(ys)
        css = np.cumsum(ys * ys)
        left_n = positions
        right_n = n - positions
        valid = xs[1:] > xs[:-1]
        if min_node_size > 1:
            valid &= (left_n >= min_node_size) & (right_n >= min_node_size)
        if not valid.any():
            continue
        sse_left = css[:-1] - cs[:-1] ** 2 / left_n
        sse_right = (css[-1] - css[:-1]) - (cs[-1] - cs[:-1]) ** 2 / right_n
        reduction = sse_parent - sse_left - sse_right
        reduction[~valid] = -np.inf
        pos = int(np.argmax(reduction))  # first max: lowest threshold on ties
        gain = float(reduction[pos])
        if gain <= 0.0:
            continue
        if best is None or gain > best.sse_reduction:
            # strict '>' keeps the lowest feature index on cross-feature ties
            best = SplitCandidate(
                feature_index=int(j),
                threshold=float((xs[pos] + xs[pos + 1]) / 2.0),
                sse_reduction=gain,
            )
    return best


def best_split(
    x: np.ndarray,
    y: np.ndarray,
    candidate_features: list[int] | np.ndarray,
    min_node_size: int = 1,
) -> SplitCandidate | None:
    """Best variance-reduction split of the full row set of ``x``."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if len(candidate_features) == 0:
        raise ValueError("candidate_features must be non-empty")
    return _best_split_indexed(
        x, y, np.arange(len(y)), np.asarray(candidate_features), min_node_size
    )


class _TreeBuilder:
    def __init__(self, x: np.ndarray, y: np.ndarray, mtry: int, min_node_size: int,
                 rng: np.random.Generator):
        self.x = x
        self.y = y
        self.p = x.shape[1]
        self.mtry = mtry
        self.min_node_size = min_node_size
        self.rng = rng
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.value: list[float] = []
        self.n_samples: list[int] = []
        self.gain: list[float] = []

    def _new_node(self, idx: np.ndarray) -> int:
        node = len(self.feature)
        self.feature.append(LEAF)
        self.threshold.append(math.nan)
        self.left.append(LEAF)
        self.right.append(LEAF)
        self.value.append(_node_mean(self.y[idx]))
        self.n_samples.append(len(idx))
        self.gain.append(0.0)
        return node

    def build(self, idx: np.ndarray) -> int:
        node = self._new_node(idx)
        y_node = self.y[idx]
        if len(idx) <= self.min_node_size or np.ptp(y_node) == 0.0:
            return node
        candidates = self.rng.choice(self.p, size=self.mtry, replace=False)
        split = _best_split_indexed(self.x, self.y, idx, candidates, self.min_node_size)
        if split is None:
            return node
        go_left = self.x[idx, split.feature_index] <= split.threshold
        self.feature[node] = split.feature_index
        self.threshold[node] = split.threshold
        self.gain[node] = split.sse_reduction
        self.left[node] = self.build(idx[go_left])
        self.right[node] = self.build(idx[~go_left])
        return node

    def tree(self) -> RegressionTree:
        return RegressionTree(
            feature_index=np.asarray(self.feature, dtype=np.int32),
            threshold=np.asarray(self.threshold, dtype=np.float64),
            left=np.asarray(self.left, dtype=np.int32),
            right=np.asarray(self.right, dtype=np.int32),
            value=np.asarray(self.value, dtype=np.float64),
            n_samples=np.asarray(self.n_samples, dtype=np.int32),
            sse_reduction=np.asarray(self.gain, dtype=np.float64),
        )


def fit_tree(
    x: np.ndarray,
    y: np.ndarray,
    mtry: int,
    min_node_size: int,
    bootstrap: bool,
    rng: np.random.Generator,
) -> RegressionTree:
    """Grow one tree by recursive greedy splitting.

    Recursion stops at ``min_node_size`` samples, a zero-variance target,
    or when no admissible split improves SSE.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = len(y)
    if n == 0:
        raise EmptyTrainingSet("cannot fit a tree on zero rows")
    if x.shape[0] != n:
        raise ShapeError(f"x has {x.shape[0]} rows but y has {n}")
    if not 1 <= mtry <= x.shape[1]:
        raise ValueError(f"mtry must be in [1, {x.shape[1]}], got {mtry}")
    idx = rng.integers(0, n, size=n) if bootstrap else np.arange(n)
    builder = _TreeBuilder(x, y, mtry, min_node_size, rng)
    builder.build(np.asarray(idx))
    return builder.tree()


def fit_forest(
    x: np.ndarray, y: np.ndarray, config: ForestConfig, feature_names: list[str] | None = None,
    threads: int = 1,
) -> Forest:
    """Fit ``config.n_trees`` trees on independent derived random streams.

    The result is identical for any ``threads`` value because stream
    derivation depends only on (seed, tree index).
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if config.n_trees < 1:
        raise ValueError(f"n_trees must be >= 1, got {config.n_trees}")
    p = x.shape[1]
    mtry = config.mtry if config.mtry is not None else max(p // 3, 1)
    if not 1 <= mtry <= p:
        raise ValueError(f"mtry must be in [1, {p}], got {mtry}")
    names = list(feature_names) if feature_names is not None else [f"x{j}" for j in range(p)]
    if len(names) != p:
        raise ShapeError(f"{len(names)} feature names for {p} columns")

    def fit_one(i: int) -> RegressionTree:
        return fit_tree(x, y, mtry, config.min_node_size, config.bootstrap,
                        derive_rng(config.seed, 1, i))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            trees = list(pool.map(fit_one, range(config.n_trees)))
    else:
        trees = [fit_one(i) for i in range(config.n_trees)]
    return Forest(
        trees=trees,
        mtry=mtry,
        n_trees=config.n_trees,
        min_node_size=config.min_node_size,
        bootstrap=config.bootstrap,
        seed=config.seed,
        feature_names=names,
    )


def raw_importance(forest: Forest) -> np.ndarray:
    """Per-feature accumulated SSE reduction over all splits of all trees."""
    acc = np.zeros(forest.n_features, dtype=np.float64)
    for tree in forest.trees:
        internal = tree.feature_index != LEAF
        np.add.at(acc, tree.feature_index[internal], tree.sse_reduction[internal])
    return acc


def forest_to_doc(forest: Forest) -> dict:
    return {
        "schema": FOREST_SCHEMA,
        "config": {
            "n_trees": forest.n_trees,
            "mtry": forest.mtry,
            "min_node_size": forest.min_node_size,
            "bootstrap": forest.bootstrap,
            "seed": forest.seed,
        },
        "feature_names": list(forest.feature_names),
        "trees": [
            {
                "feature_index": t.feature_index.tolist(),
                "threshold": [None if math.isnan(v) else v for v in t.threshold.tolist()],
                "left": t.left.tolist(),
                "right": t.right.tolist(),
                "value": t.value.tolist(),
                "n_samples": t.n_samples.tolist(),
                "sse_reduction": t.sse_reduction.tolist(),
            }
            for t in forest.trees
        ],
    }


def forest_from_doc(doc: dict) -> Forest:
    schema = doc.get("schema")
    if schema != FOREST_SCHEMA:
        raise ModelFormatError(f"unsupported model schema {schema!r}, expected {FOREST_SCHEMA!r}")
    try:
        cfg = doc["config"]
        trees = [
            RegressionTree(
                feature_index=np.asarray(t["feature_index"], dtype=np.int32),
                threshold=np.asarray(
                    [math.nan if v is None else v for v in t["threshold"]], dtype=np.float64
                ),
                left=np.asarray(t["left"], dtype=np.int32),
                right=np.asarray(t["right"], dtype=np.int32),
                value=np.asarray(t["value"], dtype=np.float64),
                n_samples=np.asarray(t["n_samples"], dtype=np.int32),
                sse_reduction=np.asarray(t["sse_reduction"], dtype=np.float64),
            )
            for t in doc["trees"]
        ]
        return Forest(
            trees=trees,
            mtry=int(cfg["mtry"]),
            n_trees=int(cfg["n_trees"]),
            min_node_size=int(cfg["min_node_size"]),
            bootstrap=bool(cfg["bootstrap"]),
            seed=int(cfg["seed"]),
            feature_names=list(doc["feature_names"]),
        )
    except (KeyError, TypeError) as exc:
        raise ModelFormatError(f"malformed model document: {exc}") from exc


def save_forest(forest: Forest, path: str | Path) -> None:
    Path(path).write_text(json.dumps(forest_to_doc(forest), sort_keys=True, separators=(",", ":")))


def load_forest(path: str | Path) -> Forest:
    return forest_from_doc(json.loads(Path(path).read_text()))
