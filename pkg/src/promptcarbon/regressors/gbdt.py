"""Gradient-boosted regression trees with squared-error loss.

Each tree is grown level by level with an exact greedy split search over
the sorted values of every feature (compiled with numba). For squared loss the gradient of a
sample is its residual and the hessian is 1, so a node holding residual
sum ``G`` over ``n`` samples scores ``G**2 / (n + l2)`` and its leaf
weight is ``G / (n + l2)``. A split is kept only when it raises that score.

Ties in split gain go to the lowest feature index, then the lowest
threshold, so training is a pure function of the data and parameters.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .common import RegressorError, check_training_data, check_width

LEAF = -1


@dataclass(frozen=True)
class GbdtParams:
    n_trees: int = 300
    learning_rate: float = 0.1
    max_depth: int | None = 6  # None grows until leaves are pure or too small
    min_samples_leaf: int = 5
    l2_leaf_penalty: float = 1.0
    seed: int = 0  # training is deterministic; recorded for provenance

    def __post_init__(self):
        if self.n_trees < 0:
            raise RegressorError("n_trees must be >= 0")
        if not 0.0 < self.learning_rate <= 1.0:
            raise RegressorError("learning_rate must lie in (0, 1]")
        if self.max_depth is not None and self.max_depth < 0:
            raise RegressorError("max_depth must be >= 0 or None")
        if self.min_samples_leaf < 1:
            raise RegressorError("min_samples_leaf must be >= 1")
        if self.l2_leaf_penalty < 0:
            raise RegressorError("l2_leaf_penalty must be >= 0")


@dataclass(frozen=True)
class Tree:
    """Flat binary tree. Node 0 is the root; leaves have ``feature == -1``.

    A row goes left when ``x[feature] <= threshold``.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def predict(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(X.shape[0], dtype=np.int64)
        active = self.feature[node] != LEAF
        while active.any():
            idx = np.nonzero(active)[0]
            nd = node[idx]
            go_left = X[idx, self.feature[nd]] <= self.threshold[nd]
            node[idx] = np.where(go_left, self.left[nd], self.right[nd])
            active[idx] = self.feature[node[idx]] != LEAF
        return self.value[node]

    def depth(self) -> int:
        def walk(i):
            if self.feature[i] == LEAF:
                return 0
            return 1 + max(walk(self.left[i]), walk(self.right[i]))

        return walk(0)

    def to_dict(self, i: int = 0, fmt=float) -> dict:
        if self.feature[i] == LEAF:
            return {"leaf": fmt(self.value[i])}
        return {
            "feature": int(self.feature[i]),
            "threshold": fmt(self.threshold[i]),
            "left": self.to_dict(int(self.left[i]), fmt),
            "right": self.to_dict(int(self.right[i]), fmt),
        }

    @classmethod
    def from_dict(cls, d: dict, parse=float) -> "Tree":
        feature, threshold, left, right, value = [], [], [], [], []

        def add(node):
            i = len(feature)
            feature.append(LEAF)
            threshold.append(0.0)
            left.append(LEAF)
            right.append(LEAF)
            value.append(0.0)
            if "leaf" in node:
                value[i] = parse(node["leaf"])
                return i
            feature[i] = int(node["feature"])
            threshold[i] = parse(node["threshold"])
            left[i] = add(node["left"])
            right[i] = add(node["right"])
            return i

        add(d)
        return cls(
            np.array(feature, dtype=np.int64),
            np.array(threshold, dtype=float),
            np.array(left, dtype=np.int64),
            np.array(right, dtype=np.int64),
            np.array(value, dtype=float),
        )


@dataclass(frozen=True)
class GbdtModel:
    base_score: float
    learning_rate: float
    n_features: int
    trees: tuple = field(default_factory=tuple)

    def predict(self, X) -> np.ndarray:
        X = check_width(X, self.n_features)
        out = np.full(X.shape[0], self.base_score)
        for t in self.trees:
            out += self.learning_rate * t.predict(X)
        return out

    def staged_predict(self, X):
        """Yield predictions after 0, 1, ..., n_trees trees."""
        X = check_width(X, self.n_features)
        out = np.full(X.shape[0], self.base_score)
        yield out.copy()
        for t in self.trees:
            out += self.learning_rate * t.predict(X)
            yield out.copy()


@njit(cache=True)
def _grow_tree(X, order, residual, max_depth, min_leaf, lam):
    """Grow one tree on ``residual``; ``order[f]`` is the stable argsort of column f.

    Level-wise: each level scans every presorted feature once, keeping
    running left sums per frontier node. A candidate threshold sits between
    consecutive distinct values of a node; only a strictly larger gain
    replaces the incumbent, so features are preferred in index order and
    thresholds in ascending order. ``max_depth < 0`` means unlimited.
    """
    n, n_feat = X.shape
    cap = 2 * n + 1
    feature = np.full(cap, LEAF, dtype=np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, LEAF, dtype=np.int64)
    right = np.full(cap, LEAF, dtype=np.int64)
    value = np.zeros(cap)
    n_nodes = 1
    value[0] = residual.sum() / (n + lam)

    node_of = np.zeros(n, dtype=np.int64)  # -1 once a row's node is final
    g_tot = np.zeros(cap)
    c_tot = np.zeros(cap)
    sq_tot = np.zeros(cap)
    g_left = np.zeros(cap)
    c_left = np.zeros(cap)
    last_v = np.zeros(cap)
    best_gain = np.zeros(cap)
    best_feat = np.full(cap, LEAF, dtype=np.int64)
    best_thr = np.zeros(cap)
    first_child = np.full(cap, LEAF, dtype=np.int64)

    depth = 0
    level_lo, level_hi = 0, 1  # frontier node ids are [level_lo, level_hi)
    while level_hi > level_lo and (max_depth < 0 or depth < max_depth):
        for nd in range(level_lo, level_hi):
            g_tot[nd] = 0.0
            c_tot[nd] = 0.0
            sq_tot[nd] = 0.0
            best_gain[nd] = 0.0
            best_feat[nd] = LEAF
        for r in range(n):
            nd = node_of[r]
            if nd >= 0:
                g_tot[nd] += residual[r]
                c_tot[nd] += 1.0
                sq_tot[nd] += residual[r] * residual[r]

        for f in range(n_feat):
            for nd in range(level_lo, level_hi):
                g_left[nd] = 0.0
                c_left[nd] = 0.0
            for t in range(n):
                r = order[f, t]
                nd = node_of[r]
                if nd < 0:
                    continue
                x = X[r, f]
                cl = c_left[nd]
                if cl >= min_leaf and c_tot[nd] - cl >= min_leaf and x > last_v[nd]:
                    gl = g_left[nd]
                    gr = g_tot[nd] - gl
                    gain = (gl * gl / (cl + lam) + gr * gr / (c_tot[nd] - cl + lam)
                            - g_tot[nd] * g_tot[nd] / (c_tot[nd] + lam))
                    if gain > best_gain[nd]:
                        lo = last_v[nd]
                        thr = 0.5 * (lo + x)
                        if thr >= x:
                            thr = lo
                        best_gain[nd] = gain
                        best_feat[nd] = f
                        best_thr[nd] = thr
                g_left[nd] += residual[r]
                c_left[nd] = cl + 1.0
                last_v[nd] = x

        next_lo = n_nodes
        for nd in range(level_lo, level_hi):
            first_child[nd] = LEAF
            # gain left over from float cancellation on a pure node is not a split
            if best_feat[nd] != LEAF and best_gain[nd] > 1e-12 * max(sq_tot[nd], 1e-300):
                feature[nd] = best_feat[nd]
                threshold[nd] = best_thr[nd]
                left[nd] = n_nodes
                right[nd] = n_nodes + 1
                first_child[nd] = n_nodes
                value[n_nodes] = 0.0
                value[n_nodes + 1] = 0.0
                c_tot[n_nodes] = 0.0
                c_tot[n_nodes + 1] = 0.0
                n_nodes += 2
        for r in range(n):
            nd = node_of[r]
            if nd < 0:
                continue
            if first_child[nd] == LEAF:
                node_of[r] = -1
            else:
                child = first_child[nd] if X[r, feature[nd]] <= threshold[nd] else first_child[nd] + 1
                node_of[r] = child
                value[child] += residual[r]
                c_tot[child] += 1.0
        for nd in range(next_lo, n_nodes):
            value[nd] = value[nd] / (c_tot[nd] + lam)
        level_lo, level_hi = next_lo, n_nodes
        depth += 1

    return (feature[:n_nodes].copy(), threshold[:n_nodes].copy(), left[:n_nodes].copy(),
            right[:n_nodes].copy(), value[:n_nodes].copy())


def train_gbdt(X, y, params: GbdtParams | None = None) -> GbdtModel:
    """Fit a boosted ensemble on encoded rows ``X`` and targets ``y``."""
    p = params or GbdtParams()
    X, y = check_training_data(X, y)
    X = np.ascontiguousarray(X)
    order = np.ascontiguousarray(np.argsort(X.T, axis=1, kind="stable"))
    max_depth = -1 if p.max_depth is None else int(p.max_depth)
    base = float(y.mean())
    pred = np.full(y.shape, base)
    trees = []
    for _ in range(p.n_trees):
        residual = y - pred
        tree = Tree(*_grow_tree(X, order, residual, max_depth, int(p.min_samples_leaf),
                                float(p.l2_leaf_penalty)))
        trees.append(tree)
        pred = pred + p.learning_rate * tree.predict(X)
    return GbdtModel(base, p.learning_rate, X.shape[1], tuple(trees))


def predict_gbdt(model: GbdtModel, x) -> np.ndarray | float:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        return float(model.predict(x[None, :])[0])
    return model.predict(x)
