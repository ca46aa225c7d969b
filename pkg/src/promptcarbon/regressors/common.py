from __future__ import annotations

import numpy as np


class RegressorError(ValueError):
    pass


def check_training_data(X, y):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2:
        raise RegressorError(f"X must be 2-D, got shape {X.shape}")
    if y.ndim != 1 or y.shape[0] != X.shape[0]:
        raise RegressorError(f"y must be 1-D with {X.shape[0]} entries, got shape {y.shape}")
    if X.shape[0] < 2:
        raise RegressorError("need at least 2 training rows")
    if not (np.isfinite(X).all() and np.isfinite(y).all()):
        raise RegressorError("training data contains non-finite values")
    return X, y


def check_width(X, width: int) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != width:
        raise RegressorError(f"row width {X.shape[1]} does not match model width {width}")
    return X
