"""Regression cores behind one registry.

``train(kind, X, y, params)`` dispatches on :class:`RegressorKind`;
``predict(model, X)`` works on any returned model. Declaration order of
the enum is the tie-break order used by model selection.
"""

from __future__ import annotations

import enum

import numpy as np

from ..serialize import fmt_num, parse_num
from .common import RegressorError
from .gbdt import GbdtModel, GbdtParams, Tree, predict_gbdt, train_gbdt
from .knn import KnnModel, KnnParams, train_knn
from .ols import OlsParams, train_ols
from .ridge import ALPHA_GRID, RidgeModel, RidgeParams, predict_ridge, solve_ridge, train_ridge


class RegressorKind(str, enum.Enum):
    GRADIENT_BOOSTED_TREES = "gradient_boosted_trees"
    RIDGE = "ridge"
    ORDINARY_LEAST_SQUARES = "ordinary_least_squares"
    K_NEAREST_NEIGHBORS = "k_nearest_neighbors"


_TRAINERS = {
    RegressorKind.GRADIENT_BOOSTED_TREES: (train_gbdt, GbdtParams),
    RegressorKind.RIDGE: (train_ridge, RidgeParams),
    RegressorKind.ORDINARY_LEAST_SQUARES: (train_ols, OlsParams),
    RegressorKind.K_NEAREST_NEIGHBORS: (train_knn, KnnParams),
}

REGISTRY_ORDER = tuple(RegressorKind)


def resolve(kind) -> RegressorKind:
    try:
        return RegressorKind(kind)
    except ValueError:
        raise RegressorError(f"unknown regressor kind {kind!r}") from None


def default_params(kind):
    return _TRAINERS[resolve(kind)][1]()


def train(kind, X, y, params=None):
    fn, param_cls = _TRAINERS[resolve(kind)]
    if params is not None and not isinstance(params, param_cls):
        raise RegressorError(f"{kind} expects {param_cls.__name__}, got {type(params).__name__}")
    return fn(X, y, params)


def predict(model, X):
    X = np.asarray(X, dtype=float)
    out = model.predict(X)
    return float(out[0]) if X.ndim == 1 else out


def model_to_dict(model) -> dict:
    """Portable form of a trained model; every float is 17-significant-digit text."""
    if isinstance(model, GbdtModel):
        return {
            "type": "gbdt",
            "base_score": fmt_num(model.base_score),
            "learning_rate": fmt_num(model.learning_rate),
            "n_features": model.n_features,
            "trees": [t.to_dict(fmt=fmt_num) for t in model.trees],
        }
    if isinstance(model, RidgeModel):
        return {
            "type": "linear",
            "weights": [fmt_num(w) for w in model.weights],
            "intercept": fmt_num(model.intercept),
            "alpha": fmt_num(model.alpha),
        }
    if isinstance(model, KnnModel):
        return {
            "type": "knn",
            "k": model.k,
            "X": [[fmt_num(v) for v in row] for row in model.X],
            "y": [fmt_num(v) for v in model.y],
        }
    raise RegressorError(f"cannot serialize {type(model).__name__}")


def model_from_dict(d: dict):
    t = d.get("type")
    if t == "gbdt":
        trees = tuple(Tree.from_dict(td, parse=parse_num) for td in d["trees"])
        return GbdtModel(parse_num(d["base_score"]), parse_num(d["learning_rate"]), int(d["n_features"]), trees)
    if t == "linear":
        w = np.array([parse_num(v) for v in d["weights"]], dtype=float)
        return RidgeModel(w, parse_num(d["intercept"]), parse_num(d["alpha"]))
    if t == "knn":
        X = np.array([[parse_num(v) for v in row] for row in d["X"]], dtype=float)
        y = np.array([parse_num(v) for v in d["y"]], dtype=float)
        return KnnModel(X, y, int(d["k"]))
    raise RegressorError(f"unknown serialized model type {t!r}")


__all__ = [
    "ALPHA_GRID",
    "GbdtModel",
    "GbdtParams",
    "KnnModel",
    "KnnParams",
    "OlsParams",
    "REGISTRY_ORDER",
    "RegressorError",
    "RegressorKind",
    "RidgeModel",
    "RidgeParams",
    "default_params",
    "model_from_dict",
    "model_to_dict",
    "predict",
    "predict_gbdt",
    "predict_ridge",
    "resolve",
    "solve_ridge",
    "train",
    "train_gbdt",
    "train_knn",
    "train_ols",
    "train_ridge",
]
