"""Closed-form ridge regression on centered data."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..metrics import kfold_split, mape, mse
from .common import RegressorError, check_training_data, check_width

ALPHA_GRID = (0.01, 0.1, 1.0, 10.0, 100.0)
INNER_FOLDS = 5


@dataclass(frozen=True)
class RidgeParams:
    alpha: float | None = None  # None selects from alpha_grid by inner CV
    alpha_grid: tuple[float, ...] = ALPHA_GRID
    inner_folds: int = INNER_FOLDS
    seed: int = 0

    def __post_init__(self):
        if self.alpha is not None and self.alpha < 0:
            raise RegressorError("alpha must be >= 0")
        if any(a < 0 for a in self.alpha_grid) or not self.alpha_grid:
            raise RegressorError("alpha_grid must be a non-empty list of values >= 0")


@dataclass(frozen=True)
class RidgeModel:
    weights: np.ndarray
    intercept: float
    alpha: float

    def predict(self, X) -> np.ndarray:
        X = check_width(X, self.weights.size)
        return self.intercept + X @ self.weights


def solve_ridge(X, y, alpha: float) -> RidgeModel:
    """Solve ``(Xc'Xc + alpha I) w = Xc'yc`` and recover the intercept.

    The system is solved as the least-squares problem on ``[Xc; sqrt(alpha) I]``,
    which avoids forming ``Xc'Xc`` and squaring its condition number.
    """
    X, y = check_training_data(X, y)
    x_mean = X.mean(axis=0)
    y_mean = y.mean()
    Xc = X - x_mean
    yc = y - y_mean
    p = X.shape[1]
    if alpha == 0:
        w, _, rank, _ = np.linalg.lstsq(Xc, yc, rcond=None)
        if rank < p:
            raise RegressorError(
                f"centered design matrix is rank-deficient ({rank} < {p}); use alpha > 0"
            )
    else:
        A = np.vstack([Xc, np.sqrt(alpha) * np.eye(p)])
        b = np.concatenate([yc, np.zeros(p)])
        w = np.linalg.lstsq(A, b, rcond=None)[0]
    return RidgeModel(w, float(y_mean - w @ x_mean), float(alpha))


def select_alpha(X, y, params: RidgeParams) -> float:
    """Grid value with the lowest inner-CV error; first grid entry wins ties.

    The error is MAPE when every target is non-zero, MSE otherwise.
    """
    X, y = check_training_data(X, y)
    k = min(params.inner_folds, X.shape[0])
    folds = kfold_split(X.shape[0], k, params.seed)
    score = mape if np.all(y != 0) else mse
    best, best_err = None, np.inf
    for alpha in params.alpha_grid:
        pred = np.empty_like(y)
        try:
            for f in range(k):
                tr, te = folds.indices(f)
                if tr.size < 2:
                    raise RegressorError("inner fold too small")
                pred[te] = solve_ridge(X[tr], y[tr], alpha).predict(X[te])
        except RegressorError:
            continue
        err = score(y, pred)
        if err < best_err:
            best, best_err = alpha, err
    if best is None:
        raise RegressorError("no alpha in the grid produced a solvable system")
    return float(best)


def train_ridge(X, y, params: RidgeParams | None = None) -> RidgeModel:
    p = params or RidgeParams()
    alpha = p.alpha if p.alpha is not None else select_alpha(X, y, p)
    return solve_ridge(X, y, alpha)


def predict_ridge(model: RidgeModel, x):
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        return float(model.predict(x)[0])
    return model.predict(x)
