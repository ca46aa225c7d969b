from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .common import RegressorError, check_training_data, check_width


@dataclass(frozen=True)
class KnnParams:
    k: int = 5

    def __post_init__(self):
        if self.k < 1:
            raise RegressorError("k must be >= 1")


@dataclass(frozen=True)
class KnnModel:
    """Mean target of the k nearest training rows (Euclidean); ties go to the lower row index."""

    X: np.ndarray
    y: np.ndarray
    k: int

    def predict(self, Q) -> np.ndarray:
        Q = check_width(Q, self.X.shape[1])
        out = np.empty(Q.shape[0])
        for i, q in enumerate(Q):
            d = np.sum((self.X - q) ** 2, axis=1)
            nearest = np.argsort(d, kind="stable")[: self.k]
            out[i] = self.y[nearest].mean()
        return out


def train_knn(X, y, params: KnnParams | None = None) -> KnnModel:
    p = params or KnnParams()
    X, y = check_training_data(X, y)
    return KnnModel(X.copy(), y.copy(), min(p.k, X.shape[0]))
