"""Model bundles: four trained (phase x regime) models plus schema and provenance.

On disk a bundle is one JSON document::

    {format_version, threshold_b, schema, models[4], metadata, checksum}

``checksum`` is the SHA-256 of the canonical JSON of everything else.
Floats inside models and scalers are stored as 17-significant-digit
strings so a load reproduces every prediction bit for bit.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field, is_dataclass

from . import regressors
from .evaluation import evaluate_all, select_model
from .features import (
    CONTINUOUS_FEATURES,
    FeaturePipeline,
    GpuVocabulary,
    PhaseKind,
    RegimeKind,
    ScalerStats,
    build_gpu_vocabulary,
)
from .ingest import dataset_hash
from .regressors import RegressorKind
from .serialize import digest, fmt_num, parse_num

log = logging.getLogger(__name__)

BUNDLE_VERSION = 1
SLOTS = tuple((p, r) for p in PhaseKind for r in RegimeKind)

DEFAULT_SELECTION = {
    (PhaseKind.PREFILL, RegimeKind.INTERPOLATION): RegressorKind.GRADIENT_BOOSTED_TREES,
    (PhaseKind.DECODE, RegimeKind.INTERPOLATION): RegressorKind.GRADIENT_BOOSTED_TREES,
    (PhaseKind.PREFILL, RegimeKind.EXTRAPOLATION): RegressorKind.RIDGE,
    (PhaseKind.DECODE, RegimeKind.EXTRAPOLATION): RegressorKind.RIDGE,
}


class BundleError(ValueError):
    pass


@dataclass(frozen=True)
class TrainedModel:
    phase: PhaseKind
    regime: RegimeKind
    kind: RegressorKind
    scaler: ScalerStats
    model: object
    params: dict = field(default_factory=dict)

    def predict_one(self, row) -> float:
        return float(self.model.predict(row)[0])


@dataclass(frozen=True)
class ModelBundle:
    threshold_b: float
    vocab: GpuVocabulary
    models: dict  # (PhaseKind, RegimeKind) -> TrainedModel
    metadata: dict = field(default_factory=dict)
    feature_order: tuple[str, ...] = CONTINUOUS_FEATURES
    format_version: int = BUNDLE_VERSION

    def __post_init__(self):
        missing = [s for s in SLOTS if s not in self.models]
        if missing:
            raise BundleError(f"bundle is missing model slots: {[(p.value, r.value) for p, r in missing]}")
        if not self.threshold_b > 0:
            raise BundleError("threshold_b must be > 0")
        width = len(self.feature_order) + self.vocab.width
        for slot, tm in self.models.items():
            if len(tm.scaler.mean) != width:
                raise BundleError(f"slot {slot} scaler width {len(tm.scaler.mean)} != schema width {width}")

    def slot(self, phase, regime) -> TrainedModel:
        return self.models[(PhaseKind(phase), RegimeKind(regime))]


def _params_to_dict(p) -> dict:
    return asdict(p) if is_dataclass(p) else dict(p or {})


def fit_bundle(records, seed: int = 0, params: dict | None = None, k: int = 10,
               size_quantile: float = 0.8, kinds=None, selection: dict | None = None,
               created_at: str | None = None) -> tuple[ModelBundle, list]:
    """Select a regressor per cell, then fit each winner on all records.

    With ``selection`` given, the sweep is skipped and those kinds are used.
    Otherwise ``kinds`` (default: the whole registry) is swept with
    ``k``-fold CV for interpolation and a size-quantile hold-out for
    extrapolation. Returns ``(bundle, reports)``.
    """
    records = list(records)
    params = {regressors.resolve(kd): v for kd, v in (params or {}).items()}
    # ride seeded components on the caller's seed unless explicitly set
    if RegressorKind.RIDGE not in params:
        params[RegressorKind.RIDGE] = regressors.RidgeParams(seed=seed)
    if RegressorKind.GRADIENT_BOOSTED_TREES not in params:
        params[RegressorKind.GRADIENT_BOOSTED_TREES] = regressors.GbdtParams(seed=seed)

    reports = []
    if selection is None:
        kinds = tuple(kinds) if kinds else regressors.REGISTRY_ORDER
        reports = evaluate_all(records, kinds, params, k=k, seed=seed, size_quantile=size_quantile)
        selection = select_model(reports)
    selection = {(PhaseKind(p), RegimeKind(r)): regressors.resolve(kd) for (p, r), kd in selection.items()}

    vocab = build_gpu_vocabulary(records)
    models = {}
    for phase, regime in SLOTS:
        kind = selection[(phase, regime)]
        p = params.get(kind)
        log.info("fitting %s / %s with %s", phase.value, regime.value, kind.value)
        pipe, X, y = FeaturePipeline.fit(records, phase, vocab)
        model = regressors.train(kind, X, y, p)
        used = _params_to_dict(p if p is not None else regressors.default_params(kind))
        if isinstance(model, regressors.RidgeModel):
            used["alpha_used"] = model.alpha
        models[(phase, regime)] = TrainedModel(phase, regime, kind, pipe.scaler, model, used)

    metadata = {
        "dataset_hash": dataset_hash(records),
        "record_count": len(records),
        "seed": seed,
        "k": k,
        "size_quantile": size_quantile,
        "created_at": created_at,
        "selection": {f"{p.value}/{r.value}": kd.value for (p, r), kd in sorted(
            selection.items(), key=lambda kv: (kv[0][0].value, kv[0][1].value))},
        "evaluation": [r.to_dict() for r in reports],
    }
    threshold = max(r.perf.model_size_b for r in records)
    return ModelBundle(float(threshold), vocab, models, metadata), reports


# -- persistence -------------------------------------------------------------


def _scaler_to_dict(s: ScalerStats) -> dict:
    return {
        "mean": [fmt_num(v) for v in s.mean],
        "std": [fmt_num(v) for v in s.std],
        "scaled": list(s.scaled),
    }


def _scaler_from_dict(d: dict) -> ScalerStats:
    return ScalerStats(
        tuple(parse_num(v) for v in d["mean"]),
        tuple(parse_num(v) for v in d["std"]),
        tuple(bool(v) for v in d["scaled"]),
    )


def _jsonable(obj):
    # params may carry tuples (alpha grid) and floats; normalize for stable output
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, float):
        return fmt_num(obj)
    return obj


def bundle_to_document(b: ModelBundle) -> dict:
    doc = {
        "format_version": b.format_version,
        "threshold_b": fmt_num(b.threshold_b),
        "schema": {
            "continuous_features": list(b.feature_order),
            "gpu_vocabulary": list(b.vocab.labels),
            "unknown_gpu_slot": len(b.vocab.labels),
        },
        "models": [
            {
                "phase": tm.phase.value,
                "regime": tm.regime.value,
                "kind": tm.kind.value,
                "params": _jsonable(tm.params),
                "scaler": _scaler_to_dict(tm.scaler),
                "model": regressors.model_to_dict(tm.model),
            }
            for tm in (b.models[s] for s in SLOTS)
        ],
        "metadata": _jsonable(b.metadata),
    }
    doc["checksum"] = digest(doc)
    return doc


def dumps_bundle(b: ModelBundle) -> str:
    return json.dumps(bundle_to_document(b), indent=1, sort_keys=True) + "\n"


def save_bundle(b: ModelBundle, destination) -> None:
    text = dumps_bundle(b)
    with open(destination, "w", encoding="utf-8") as fh:
        fh.write(text)


def bundle_from_document(doc: dict) -> ModelBundle:
    if not isinstance(doc, dict):
        raise BundleError("bundle document must be a JSON object")
    version = doc.get("format_version")
    if version != BUNDLE_VERSION:
        raise BundleError(f"unsupported bundle format_version {version!r} (expected {BUNDLE_VERSION})")
    body = {k: v for k, v in doc.items() if k != "checksum"}
    if doc.get("checksum") != digest(body):
        raise BundleError("bundle checksum mismatch")
    try:
        schema = doc["schema"]
        vocab = GpuVocabulary(tuple(schema["gpu_vocabulary"]))
        models = {}
        for m in doc["models"]:
            slot = (PhaseKind(m["phase"]), RegimeKind(m["regime"]))
            if slot in models:
                raise BundleError(f"duplicate model slot {slot}")
            models[slot] = TrainedModel(
                slot[0], slot[1], RegressorKind(m["kind"]), _scaler_from_dict(m["scaler"]),
                regressors.model_from_dict(m["model"]), m.get("params", {}),
            )
        return ModelBundle(
            parse_num(doc["threshold_b"]), vocab, models, doc.get("metadata", {}),
            tuple(schema["continuous_features"]), version,
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, BundleError):
            raise
        raise BundleError(f"malformed bundle: {exc}") from exc


def loads_bundle(text: str) -> ModelBundle:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise BundleError(f"bundle is not valid JSON (truncated?): {exc}") from None
    return bundle_from_document(doc)


def load_bundle(source) -> ModelBundle:
    with open(source, encoding="utf-8") as fh:
        return loads_bundle(fh.read())
