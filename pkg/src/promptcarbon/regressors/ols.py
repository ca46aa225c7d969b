from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .common import check_training_data
from .ridge import RidgeModel


@dataclass(frozen=True)
class OlsParams:
    pass


def train_ols(X, y, params: OlsParams | None = None) -> RidgeModel:
    """Least squares with intercept.

    Identical to ridge with ``alpha=0`` on full-rank data. Rank-deficient
    designs (the one-hot GPU block always is, once centered) get the
    minimum-norm solution instead of an error so the baseline stays usable.
    """
    X, y = check_training_data(X, y)
    x_mean = X.mean(axis=0)
    y_mean = y.mean()
    w = np.linalg.lstsq(X - x_mean, y - y_mean, rcond=None)[0]
    return RidgeModel(w, float(y_mean - w @ x_mean), 0.0)
