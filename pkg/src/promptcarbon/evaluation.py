"""Cross-validation, extrapolation hold-out and per-cell model selection.

Every fit inside an evaluation (GPU vocabulary, scaler, regressor, ridge
alpha search) sees training rows only.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, is_dataclass

import numpy as np

from . import regressors
from .features import FeaturePipeline, PhaseKind, RegimeKind, regime_split
from .ingest import dataset_hash
from .metrics import FoldAssignment, MetricError, kfold_split, mape, r_squared, smape  # noqa: F401
from .regressors import REGISTRY_ORDER, RegressorKind

log = logging.getLogger(__name__)

REPORT_VERSION = 1


class EvaluationError(RuntimeError):
    pass


@dataclass(frozen=True)
class MetricSet:
    mape: float
    r2: float | None
    smape: float | None = None


@dataclass(frozen=True)
class EvalReport:
    phase: PhaseKind
    regime: RegimeKind
    kind: RegressorKind
    fold_mapes: tuple[float, ...]
    mape_mean: float
    mape_std: float
    r2: float | None  # None when the evaluated targets are constant

    def to_dict(self) -> dict:
        return {
            "phase": self.phase.value,
            "regime": self.regime.value,
            "kind": self.kind.value,
            "mape_mean": self.mape_mean,
            "mape_std": self.mape_std,
            "r2": self.r2,
            "fold_mapes": list(self.fold_mapes),
        }


def _pooled_r2(y, y_hat):
    try:
        return r_squared(y, y_hat)
    except MetricError:
        return None


def fit_predict(train_records, test_records, phase, kind, params=None):
    """Fit pipeline + regressor on ``train_records``; predict ``test_records``.

    Returns ``(y_test, y_pred)``.
    """
    pipe, X_tr, y_tr = FeaturePipeline.fit(train_records, phase)
    model = regressors.train(kind, X_tr, y_tr, params)
    X_te, y_te = pipe.transform_records(test_records)
    return y_te, np.asarray(model.predict(X_te), dtype=float)


def cross_validate(records, phase, kind, params=None, k: int = 10, seed: int = 0) -> EvalReport:
    records = list(records)
    phase, kind = PhaseKind(phase), regressors.resolve(kind)
    if len(records) < k:
        raise EvaluationError(f"{k}-fold cross-validation needs at least {k} records, got {len(records)}")
    folds = kfold_split(len(records), k, seed)
    y_all = np.empty(len(records))
    p_all = np.empty(len(records))
    fold_mapes = []
    for f in range(k):
        tr, te = folds.indices(f)
        try:
            y_te, y_hat = fit_predict([records[i] for i in tr], [records[i] for i in te], phase, kind, params)
            fold_mapes.append(mape(y_te, y_hat))
        except (ValueError, ArithmeticError) as exc:
            raise EvaluationError(f"fold {f} ({phase.value}, {kind.value}): {exc}") from exc
        y_all[te], p_all[te] = y_te, y_hat
    fm = np.array(fold_mapes)
    return EvalReport(
        phase, RegimeKind.INTERPOLATION, kind, tuple(fold_mapes),
        float(fm.mean()), float(fm.std()), _pooled_r2(y_all, p_all),
    )


def holdout_validate(train_records, test_records, phase, kind, params=None) -> EvalReport:
    """Train on one record set, score on a disjoint one (one "fold")."""
    phase, kind = PhaseKind(phase), regressors.resolve(kind)
    try:
        y_te, y_hat = fit_predict(list(train_records), list(test_records), phase, kind, params)
        m = mape(y_te, y_hat)
    except (ValueError, ArithmeticError) as exc:
        raise EvaluationError(f"hold-out ({phase.value}, {kind.value}): {exc}") from exc
    return EvalReport(phase, RegimeKind.EXTRAPOLATION, kind, (m,), m, 0.0, _pooled_r2(y_te, y_hat))


def extrapolation_validate(records, phase, kind, params=None, size_quantile: float = 0.8) -> EvalReport:
    """Train below the model-size quantile, score on sizes strictly above it."""
    train, test = regime_split(records, size_quantile)
    return holdout_validate(train, test, phase, kind, params)


def select_model(reports) -> dict:
    """Lowest ``mape_mean`` per (phase, regime); ties go to registry order."""
    cells = {}
    for r in reports:
        cells.setdefault((r.phase, r.regime), []).append(r)
    if not cells:
        raise EvaluationError("no reports to select from")
    rank = {k: i for i, k in enumerate(REGISTRY_ORDER)}
    return {
        cell: min(rs, key=lambda r: (r.mape_mean, rank[r.kind])).kind
        for cell, rs in cells.items()
    }


def evaluate_all(records, kinds=REGISTRY_ORDER, params=None, k: int = 10, seed: int = 0,
                 size_quantile: float = 0.8, phases=tuple(PhaseKind)) -> list[EvalReport]:
    """Sweep kinds x phases x regimes. ``params`` maps kind -> params object."""
    params = params or {}
    records = list(records)
    reports = []
    for phase in phases:
        for kind in kinds:
            kind = regressors.resolve(kind)
            p = params.get(kind)
            log.info("cross-validating %s / %s", phase.value, kind.value)
            reports.append(cross_validate(records, phase, kind, p, k=k, seed=seed))
            log.info("extrapolation hold-out %s / %s", phase.value, kind.value)
            reports.append(extrapolation_validate(records, phase, kind, p, size_quantile))
    return reports


def _params_dict(params) -> dict:
    out = {}
    for kind, p in (params or {}).items():
        out[regressors.resolve(kind).value] = asdict(p) if is_dataclass(p) else p
    return out


def report_document(reports, records=None, seed=0, k=10, size_quantile=0.8, params=None) -> dict:
    """Table-shaped report: one row per evaluated cell plus the selected winners."""
    selection = select_model(reports)
    rows = [r.to_dict() | {"selected": selection[(r.phase, r.regime)] is r.kind} for r in reports]
    winners = []
    for (phase, regime), kind in sorted(selection.items(), key=lambda kv: (kv[0][0].value, kv[0][1].value)):
        r = next(x for x in reports if (x.phase, x.regime, x.kind) == (phase, regime, kind))
        winners.append(r.to_dict())
    return {
        "format_version": REPORT_VERSION,
        "kind": "evaluation-report",
        "provenance": {
            "dataset_hash": dataset_hash(records) if records is not None else None,
            "record_count": len(records) if records is not None else None,
            "seed": seed,
            "k": k,
            "size_quantile": size_quantile,
            "params": _params_dict(params),
        },
        "selected": winners,
        "rows": rows,
    }


def write_report(doc: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def format_table(reports) -> str:
    """Plain-text table of the selected cells, one line per (phase, regime)."""
    selection = select_model(reports)
    lines = [f"{'phase':<8} {'regime':<14} {'MAPE %':>18} {'R2':>8}  regressor"]
    for (phase, regime), kind in sorted(selection.items(), key=lambda kv: (kv[0][0].value, kv[0][1].value)):
        r = next(x for x in reports if (x.phase, x.regime, x.kind) == (phase, regime, kind))
        r2 = "n/a" if r.r2 is None else f"{r.r2:.3f}"
        lines.append(
            f"{phase.value:<8} {regime.value:<14} {r.mape_mean:>8.2f} +/- {r.mape_std:5.2f} {r2:>8}  {kind.value}"
        )
    return "\n".join(lines)
