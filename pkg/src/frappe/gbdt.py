"""Least-squares gradient-boosted regression trees, built from scratch.

Exact greedy split search (best variance reduction over every distinct
threshold), leaf-wise growth up to a leaf budget, and deterministic
tie-breaking (lowest feature index, then lowest threshold), so a fit is a
pure function of its inputs. Feature importance is the number of splits that
use each feature.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

MODEL_FORMAT = "frappe-gbdt"
MODEL_VERSION = 1


@dataclass(frozen=True)
class GbdtParams:
    n_trees: int = 100
    learning_rate: float = 0.1
    max_leaves: int = 31
    min_samples_leaf: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if not 0 < self.learning_rate <= 1:
            raise ValueError("learning_rate must lie in (0, 1]")
        if self.max_leaves < 2:
            raise ValueError("max_leaves must be >= 2")
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be >= 1")


class Tree:
    """Binary regression tree in flat-array form; feature == -1 marks a leaf."""

    __slots__ = ("feature", "threshold", "left", "right", "value")

    def __init__(self, feature, threshold, left, right, value):
        self.feature = np.asarray(feature, dtype=np.int64)
        self.threshold = np.asarray(threshold, dtype=np.float64)
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.value = np.asarray(value, dtype=np.float64)

    def predict_one(self, x: np.ndarray) -> float:
        node = 0
        while self.feature[node] >= 0:
            node = self.left[node] if x[self.feature[node]] < self.threshold[node] else self.right[node]
        return float(self.value[node])

    def n_splits(self) -> int:
        return int((self.feature >= 0).sum())


@dataclass
class GbdtModel:
    base_prediction: float
    trees: list[Tree]
    params: GbdtParams
    n_features: int
    feature_split_counts: np.ndarray
    feature_names: tuple[str, ...] | None = None

    def predict(self, x) -> float:
        x = np.asarray(x, dtype=np.float64).reshape(-1)
        if len(x) != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {len(x)}")
        acc = 0.0
        for tree in self.trees:
            acc += tree.predict_one(x)
        return float(self.base_prediction + self.params.learning_rate * acc)

    def predict_batch(self, X) -> np.ndarray:
        return np.array([self.predict(row) for row in np.asarray(X, dtype=np.float64)])


class _Node:
    __slots__ = ("idx", "value", "gain", "feature", "threshold", "left", "right")

    def __init__(self, idx, value, gain, feature, threshold):
        self.idx = idx
        self.value = value
        self.gain = gain
        self.feature = feature
        self.threshold = threshold
        self.left = None
        self.right = None


class _Splitter:
    """Exact greedy split search backed by a single global presort of X.

    A node's per-feature sorted order is recovered by filtering the global
    stable order down to the node's rows, which is bit-identical to stably
    sorting the subset.
    """

    def __init__(self, X: np.ndarray, min_leaf: int):
        self.X = X
        self.n, self.d = X.shape
        self.min_leaf = min_leaf
        self.order_flat = np.argsort(X, axis=0, kind="stable").T.ravel()
        self.col_idx = np.arange(self.d)[:, None]

    def best(self, resid: np.ndarray, idx: np.ndarray):
        """Returns (gain, feature, threshold); gain <= 0 means no usable split.

        Ties resolve to the lowest feature index, then the lowest threshold:
        the argmax scans a feature-major layout and takes the first maximum.
        """
        m = len(idx)
        min_leaf = self.min_leaf
        if m < 2 * min_leaf or m < 2:
            return 0.0, -1, 0.0
        member = np.zeros(self.n, dtype=bool)
        member[idx] = True
        orders = self.order_flat[member[self.order_flat]].reshape(self.d, m)
        sv = self.X[orders, self.col_idx]
        sy = resid[orders]
        csum = np.cumsum(sy, axis=1)
        total = float(resid[idx].sum())

        lcnt = np.arange(1, m, dtype=np.float64)
        lsum = csum[:, :-1]
        rsum = total - lsum
        # parent term total^2/m is a constant shift: apply it only at the end
        score = lsum * lsum
        score /= lcnt
        rpart = rsum * rsum
        rpart /= m - lcnt
        score += rpart

        score[sv[:, 1:] <= sv[:, :-1]] = -np.inf
        if min_leaf > 1:  # left counts run 1..m-1, so the invalid zones are contiguous
            score[:, : min_leaf - 1] = -np.inf
            score[:, m - min_leaf :] = -np.inf

        flat = int(np.argmax(score))
        feat, pos = divmod(flat, m - 1)
        best = float(score[feat, pos]) - total * total / m
        if not np.isfinite(best) or best <= 0.0:
            return 0.0, -1, 0.0
        a, b = sv[feat, pos], sv[feat, pos + 1]
        thr = 0.5 * (a + b)
        if thr <= a:  # midpoint rounded onto the left value
            thr = b
        return best, feat, float(thr)


def _make_node(splitter, resid, idx) -> _Node:
    gain, feat, thr = splitter.best(resid, idx)
    return _Node(idx, float(resid[idx].mean()), gain, feat, thr)


def _build_tree(splitter: _Splitter, resid, params: GbdtParams, split_counts: np.ndarray):
    """Grow one tree leaf-wise against the residuals.

    Returns (Tree, per-training-sample raw output).
    """
    n = len(resid)
    X = splitter.X
    root = _make_node(splitter, resid, np.arange(n))
    leaves = [root]
    while len(leaves) < params.max_leaves:
        best = None
        for leaf in leaves:
            if leaf.gain > 0.0 and (best is None or leaf.gain > best.gain):
                best = leaf
        if best is None:
            break
        mask = X[best.idx, best.feature] < best.threshold
        best.left = _make_node(splitter, resid, best.idx[mask])
        best.right = _make_node(splitter, resid, best.idx[~mask])
        split_counts[best.feature] += 1
        leaves.remove(best)
        leaves.append(best.left)
        leaves.append(best.right)

    feature, threshold, left, right, value = [], [], [], [], []
    outputs = np.empty(n)

    def emit(node) -> int:
        pos = len(feature)
        if node.left is None:
            feature.append(-1)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            value.append(node.value)
            outputs[node.idx] = node.value
        else:
            feature.append(node.feature)
            threshold.append(node.threshold)
            left.append(0)
            right.append(0)
            value.append(0.0)
            left[pos] = emit(node.left)
            right[pos] = emit(node.right)
        return pos

    emit(root)
    return Tree(feature, threshold, left, right, value), outputs


def fit(X, y, params: GbdtParams | None = None, feature_names=None) -> GbdtModel:
    """Fit the boosted ensemble to (X, y) with squared-error loss."""
    params = params or GbdtParams()
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("X must be a 2-D feature matrix")
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if len(X) == 0 or len(y) == 0:
        raise ValueError("empty training data")
    if len(X) != len(y):
        raise ValueError("X and y row counts differ")
    if not np.isfinite(X).all() or not np.isfinite(y).all():
        raise ValueError("training data must be finite")
    if feature_names is not None and len(feature_names) != X.shape[1]:
        raise ValueError("feature_names length mismatch")

    base = float(y.mean())
    resid = y - base
    split_counts = np.zeros(X.shape[1], dtype=np.int64)
    splitter = _Splitter(X, params.min_samples_leaf)
    trees = []
    for _ in range(params.n_trees):
        tree, outputs = _build_tree(splitter, resid, params, split_counts)
        trees.append(tree)
        resid = resid - params.learning_rate * outputs
    return GbdtModel(
        base_prediction=base,
        trees=trees,
        params=params,
        n_features=X.shape[1],
        feature_split_counts=split_counts,
        feature_names=tuple(feature_names) if feature_names is not None else None,
    )


def importances(model: GbdtModel, groups=None) -> tuple[dict[str, int], dict[str, int]]:
    """Per-feature split counts plus sums over feature groups.

    ``groups`` is one label per feature position; when omitted every feature
    forms its own group. Feature keys use the model's stored names when
    present, else ``x000``-style positions.
    """
    counts = model.feature_split_counts
    names = model.feature_names or tuple(f"x{i:03d}" for i in range(model.n_features))
    per_feature = {n: int(c) for n, c in zip(names, counts)}
    if groups is None:
        return per_feature, dict(per_feature)
    if len(groups) != model.n_features:
        raise ValueError("groups length mismatch")
    grouped: dict[str, int] = {}
    for g, c in zip(groups, counts):
        grouped[g] = grouped.get(g, 0) + int(c)
    return per_feature, grouped


def save(model: GbdtModel, path) -> None:
    """Write the model as versioned JSON; load() restores it bit-exactly."""
    doc = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "params": {
            "n_trees": model.params.n_trees,
            "learning_rate": model.params.learning_rate,
            "max_leaves": model.params.max_leaves,
            "min_samples_leaf": model.params.min_samples_leaf,
            "seed": model.params.seed,
        },
        "base_prediction": model.base_prediction,
        "n_features": model.n_features,
        "feature_names": list(model.feature_names) if model.feature_names else None,
        "feature_split_counts": [int(c) for c in model.feature_split_counts],
        "trees": [
            {
                "feature": t.feature.tolist(),
                "threshold": t.threshold.tolist(),
                "left": t.left.tolist(),
                "right": t.right.tolist(),
                "value": t.value.tolist(),
            }
            for t in model.trees
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)


def load(path) -> GbdtModel:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict) or doc.get("format") != MODEL_FORMAT:
        raise ValueError("not a gbdt model file")
    if doc.get("version") != MODEL_VERSION:
        raise ValueError(f"unsupported model version {doc.get('version')!r}")
    params = GbdtParams(**doc["params"])
    trees = [
        Tree(t["feature"], t["threshold"], t["left"], t["right"], t["value"])
        for t in doc["trees"]
    ]
    names = doc.get("feature_names")
    return GbdtModel(
        base_prediction=float(doc["base_prediction"]),
        trees=trees,
        params=params,
        n_features=int(doc["n_features"]),
        feature_split_counts=np.array(doc["feature_split_counts"], dtype=np.int64),
        feature_names=tuple(names) if names else None,
    )
