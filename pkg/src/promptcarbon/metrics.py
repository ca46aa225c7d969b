"""Error metrics and fold assignment shared by training and evaluation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class MetricError(ValueError):
    pass


def _pair(y, y_hat):
    y = np.asarray(y, dtype=float).ravel()
    y_hat = np.asarray(y_hat, dtype=float).ravel()
    if y.shape != y_hat.shape:
        raise MetricError(f"length mismatch: {y.size} targets vs {y_hat.size} predictions")
    if y.size == 0:
        raise MetricError("metrics need at least one value")
    return y, y_hat


def mape(y, y_hat) -> float:
    """Mean absolute percentage error, in percent."""
    y, y_hat = _pair(y, y_hat)
    if np.any(y == 0):
        raise MetricError("MAPE is undefined for zero targets")
    return float(100.0 * np.mean(np.abs(y - y_hat) / np.abs(y)))


def smape(measured, estimated) -> float:
    """Symmetric percentage error ``200 * |a - b| / (a + b)`` of one measured/estimated pair."""
    a, b = float(measured), float(estimated)
    if not a + b > 0:
        raise MetricError(f"symmetric error needs a + b > 0, got {a} + {b}")
    return 100.0 * 2.0 * abs(a - b) / (a + b)


def r_squared(y, y_hat) -> float:
    y, y_hat = _pair(y, y_hat)
    if y.size < 2:
        raise MetricError("R^2 needs at least 2 values")
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0.0:
        raise MetricError("R^2 is undefined for a constant target")
    return 1.0 - float(np.sum((y - y_hat) ** 2)) / ss_tot


def mse(y, y_hat) -> float:
    y, y_hat = _pair(y, y_hat)
    return float(np.mean((y - y_hat) ** 2))


@dataclass(frozen=True)
class FoldAssignment:
    k: int
    seed: int
    folds: tuple[int, ...]  # fold index per record

    def indices(self, fold: int) -> tuple[np.ndarray, np.ndarray]:
        """(train, test) row indices for one fold, both ascending."""
        f = np.asarray(self.folds)
        return np.flatnonzero(f != fold), np.flatnonzero(f == fold)

    def sizes(self) -> list[int]:
        return np.bincount(np.asarray(self.folds), minlength=self.k).tolist()


def kfold_split(n: int, k: int, seed: int = 0) -> FoldAssignment:
    """Seeded shuffle, then round-robin: fold sizes differ by at most one."""
    if k < 2 or k > n:
        raise MetricError(f"k-fold needs 2 <= k <= n, got k={k}, n={n}")
    perm = np.random.default_rng(seed).permutation(n)
    folds = np.empty(n, dtype=np.int64)
    folds[perm] = np.arange(n) % k
    return FoldAssignment(k, seed, tuple(folds.tolist()))
