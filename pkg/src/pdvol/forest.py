"""CART decision trees and bootstrap-aggregated random forests.

Splits minimize weighted Gini impurity over midpoint thresholds between
consecutive distinct sorted values, scanning a per-node random feature
subset. Ties break toward the lowest feature index, then the lowest
threshold. Each tree draws its bootstrap sample and feature subsets from its
own RNG stream derived from (seed, tree_index), so the forest is identical
whether trees are built serially or in parallel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dataset import LABEL_HC, LABEL_PD
from .errors import DimensionMismatch

_MIN_GINI_GAIN = 1e-12


@dataclass(frozen=True)
class TreeNode:
    """Internal node (feature >= 0) or leaf (feature == -1, counts kept)."""

    feature: int
    threshold: float
    left: int
    right: int
    n_hc: int
    n_pd: int

    @property
    def is_leaf(self) -> bool:
        return self.feature < 0

    def leaf_label(self) -> int:
        # Leaf tie goes to HC, the lexicographically-first label.
        return LABEL_PD if self.n_pd > self.n_hc else LABEL_HC


@dataclass(frozen=True)
class DecisionTree:
    nodes: tuple[TreeNode, ...]
    max_depth: int
    n_features: int


@dataclass(frozen=True)
class ForestModel:
    trees: tuple[DecisionTree, ...]
    n_estimators: int
    max_depth: int
    seed: int
    feature_subsample: int
    n_features: int
    feature_names: tuple[str, ...] | None = None

    def __post_init__(self):
        if len(self.trees) != self.n_estimators:
            raise ValueError("trees length must equal n_estimators")


def weighted_gini(l0, l1, r0, r1):
    """Size-weighted Gini impurity of a two-way split, from class counts.

    Accepts scalars or aligned arrays; the expression is kept in one place so
    the split scan and any independent re-check share identical arithmetic.
    """
    nl = l0 + l1
    nr = r0 + r1
    pl0 = l0 / nl
    pl1 = l1 / nl
    pr0 = r0 / nr
    pr1 = r1 / nr
    gl = 1.0 - (pl0 * pl0 + pl1 * pl1)
    gr = 1.0 - (pr0 * pr0 + pr1 * pr1)
    return (nl * gl + nr * gr) / (nl + nr)


def gini(n_hc: float, n_pd: float) -> float:
    n = n_hc + n_pd
    p0 = n_hc / n
    p1 = n_pd / n
    return 1.0 - (p0 * p0 + p1 * p1)


def _best_split(X, y, rows, features):
    """Lowest weighted-Gini (feature, threshold) over the candidate features.

    Features are scanned in ascending index order and thresholds in ascending
    value order with strict improvement, which realizes the documented
    tie-break. Returns None when no candidate strictly reduces impurity.
    """
    n = rows.size
    n_pd_total = int(np.count_nonzero(y[rows] == LABEL_PD))
    parent = gini(float(n - n_pd_total), float(n_pd_total))
    best = None  # (weighted_gini, feature, threshold)
    for f in features:
        xs = X[rows, f]
        order = np.argsort(xs, kind="stable")
        xs_sorted = xs[order]
        is_pd = (y[rows][order] == LABEL_PD).astype(np.float64)
        cut = np.flatnonzero(xs_sorted[1:] != xs_sorted[:-1]) + 1
        if cut.size == 0:
            continue
        pd_prefix = np.cumsum(is_pd)
        l1 = pd_prefix[cut - 1]
        l0 = cut.astype(np.float64) - l1
        r1 = n_pd_total - l1
        r0 = (n - cut).astype(np.float64) - r1
        wg = weighted_gini(l0, l1, r0, r1)
        k = int(np.argmin(wg))  # first minimum = lowest threshold
        if best is None or wg[k] < best[0]:
            lo = xs_sorted[cut[k] - 1]
            hi = xs_sorted[cut[k]]
            thr = (lo + hi) / 2.0
            if thr >= hi:  # midpoint rounded up between adjacent floats
                thr = lo
            best = (float(wg[k]), int(f), float(thr))
    if best is None or best[0] >= parent - _MIN_GINI_GAIN:
        return None
    return best[1], best[2]


def fit_tree(
    X,
    y,
    max_depth: int,
    feature_subsample: int,
    rng: np.random.Generator,
) -> DecisionTree:
    """Grow one CART tree; depth counts edges from the root.

    A node becomes a leaf when pure, at max_depth, or when no candidate split
    strictly reduces weighted Gini impurity.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int8)
    if X.ndim != 2 or X.shape[0] < 1:
        raise ValueError("X must be a non-empty (s, n) matrix")
    n_features = X.shape[1]
    m = min(feature_subsample, n_features)
    nodes: list[TreeNode] = []

    def build(rows: np.ndarray, depth: int) -> int:
        node_id = len(nodes)
        nodes.append(None)  # reserve slot; children get appended after
        n_pd = int(np.count_nonzero(y[rows] == LABEL_PD))
        n_hc = rows.size - n_pd
        split = None
        if depth < max_depth and 0 < n_pd < rows.size:
            features = np.sort(rng.choice(n_features, size=m, replace=False))
            split = _best_split(X, y, rows, features)
        if split is None:
            nodes[node_id] = TreeNode(-1, 0.0, -1, -1, n_hc, n_pd)
            return node_id
        f, thr = split
        mask = X[rows, f] <= thr
        left = build(rows[mask], depth + 1)
        right = build(rows[~mask], depth + 1)
        nodes[node_id] = TreeNode(f, thr, left, right, n_hc, n_pd)
        return node_id

    build(np.arange(X.shape[0]), 0)
    return DecisionTree(nodes=tuple(nodes), max_depth=max_depth, n_features=n_features)


def predict_tree(tree: DecisionTree, X) -> np.ndarray:
    """Leaf majority label per row (leaf tie -> HC)."""
    X = np.asarray(X, dtype=np.float64)
    single = X.ndim == 1
    if single:
        X = X.reshape(1, -1)
    if X.shape[1] != tree.n_features:
        raise DimensionMismatch(tree.n_features, X.shape[1])
    out = np.empty(X.shape[0], dtype=np.int8)
    stack = [(0, np.arange(X.shape[0]))]
    while stack:
        node_id, rows = stack.pop()
        if rows.size == 0:
            continue
        node = tree.nodes[node_id]
        if node.is_leaf:
            out[rows] = node.leaf_label()
        else:
            mask = X[rows, node.feature] <= node.threshold
            stack.append((node.left, rows[mask]))
            stack.append((node.right, rows[~mask]))
    return out


def tree_rng(seed: int, tree_index: int) -> np.random.Generator:
    """Independent per-tree RNG stream; depends only on (seed, tree_index)."""
    return np.random.default_rng(np.random.SeedSequence([seed, tree_index]))


def default_feature_subsample(n_features: int) -> int:
    return max(1, math.ceil(math.sqrt(n_features)))


def fit_forest(
    X,
    y,
    n_estimators: int,
    max_depth: int,
    seed: int,
    feature_subsample: int | None = None,
    feature_names: tuple[str, ...] | None = None,
) -> ForestModel:
    """Train n_estimators trees on bootstrap resamples of (X, y).

    feature_subsample defaults to ceil(sqrt(n)); pass n to disable per-split
    feature subsampling (bagging only). Results do not depend on the order
    trees are built in.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int8)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValueError("forest training needs at least 2 rows")
    if n_estimators < 1:
        raise ValueError("n_estimators must be >= 1")
    if seed < 0:
        raise ValueError("seed must be non-negative")
    n_features = X.shape[1]
    fs = feature_subsample if feature_subsample is not None else default_feature_subsample(n_features)
    s = X.shape[0]
    trees = []
    for t in range(n_estimators):
        rng = tree_rng(seed, t)
        boot = rng.integers(0, s, size=s)
        trees.append(fit_tree(X[boot], y[boot], max_depth, fs, rng))
    return ForestModel(
        trees=tuple(trees),
        n_estimators=n_estimators,
        max_depth=max_depth,
        seed=seed,
        feature_subsample=fs,
        n_features=n_features,
        feature_names=feature_names,
    )


def _pd_votes(model: ForestModel, X) -> np.ndarray:
    votes = np.zeros(X.shape[0], dtype=np.int64)
    for tree in model.trees:
        votes += predict_tree(tree, X) == LABEL_PD
    return votes


def _as_matrix(model: ForestModel, x):
    X = np.asarray(x, dtype=np.float64)
    single = X.ndim == 1
    if single:
        X = X.reshape(1, -1)
    if X.shape[1] != model.n_features:
        raise DimensionMismatch(model.n_features, X.shape[1])
    return X, single


def predict_vote_fraction(model: ForestModel, x):
    """Fraction of trees voting PD; the ROC score for forests."""
    X, single = _as_matrix(model, x)
    frac = _pd_votes(model, X) / model.n_estimators
    return float(frac[0]) if single else frac


def predict_forest(model: ForestModel, x):
    """Majority vote over trees; an exact tie goes to HC."""
    X, single = _as_matrix(model, x)
    labels = (2 * _pd_votes(model, X) > model.n_estimators).astype(np.int8)
    return int(labels[0]) if single else labels
