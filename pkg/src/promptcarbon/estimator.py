"""Per-prompt energy estimation from a trained bundle."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

from .bundle import ModelBundle
from .features import CONTINUOUS_FEATURES, FeatureVector, PhaseKind, RegimeKind, apply_scaler, encode


class QueryError(ValueError):
    def __init__(self, field_name: str, message: str):
        self.field = field_name
        super().__init__(f"{field_name}: {message}")


@dataclass(frozen=True)
class EstimateQuery:
    model_size_b: float
    input_tokens: int
    output_tokens: int
    prefill_latency_s_per_input_token: float
    decode_latency_s_per_output_token: float
    gpu: str
    bbh: float
    mmlu_pro: float
    region: str | None = None

    def __post_init__(self):
        for f in fields(self):
            if f.name in ("gpu", "region"):
                continue
            v = getattr(self, f.name)
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise QueryError(f.name, f"must be a number, got {v!r}")
            if not math.isfinite(v):
                raise QueryError(f.name, "must be finite")
        if self.model_size_b <= 0:
            raise QueryError("model_size_b", "must be > 0")
        for name in ("input_tokens", "output_tokens"):
            if getattr(self, name) <= 0:
                raise QueryError(name, "must be > 0")
        for name in ("prefill_latency_s_per_input_token", "decode_latency_s_per_output_token"):
            if getattr(self, name) < 0:
                raise QueryError(name, "must be >= 0")
        for name in ("bbh", "mmlu_pro"):
            if not 0 <= getattr(self, name) <= 100:
                raise QueryError(name, "must lie in [0, 100]")
        if not isinstance(self.gpu, str) or not self.gpu.strip():
            raise QueryError("gpu", "must be a non-empty label")
        if self.region is not None and not isinstance(self.region, str):
            raise QueryError("region", "must be a string")

    def feature_vector(self, phase: PhaseKind) -> FeatureVector:
        latency = (
            self.prefill_latency_s_per_input_token
            if phase is PhaseKind.PREFILL
            else self.decode_latency_s_per_output_token
        )
        return FeatureVector(
            input_tokens=self.input_tokens,
            output_tokens=self.output_tokens,
            model_size_b=self.model_size_b,
            phase_latency_s_per_token=latency,
            gpu=self.gpu,
            bbh=self.bbh,
            mmlu_pro=self.mmlu_pro,
        )


@dataclass(frozen=True)
class EnergyEstimate:
    prefill_j: float
    decode_j: float
    total_j: float
    regime: RegimeKind
    per_token_prefill_j: float
    per_token_decode_j: float
    clamped: tuple[str, ...] = ()  # phases whose raw prediction was negative

    def to_dict(self) -> dict:
        d = asdict(self)
        d["regime"] = self.regime.value
        d["clamped"] = list(self.clamped)
        return d


def route_regime(model_size_b: float, threshold_b: float) -> RegimeKind:
    """Interpolation up to and including the threshold, extrapolation beyond it."""
    if not model_size_b > 0:
        raise QueryError("model_size_b", "must be > 0")
    return RegimeKind.INTERPOLATION if model_size_b <= threshold_b else RegimeKind.EXTRAPOLATION


def derive_latencies(ttft: float, total_latency: float, input_tokens: int, output_tokens: int):
    """Per-token latencies from time-to-first-token and end-to-end latency.

    Returns ``(prefill seconds per input token, decode seconds per output token)``.
    """
    if input_tokens <= 0 or output_tokens <= 0:
        raise QueryError("input_tokens" if input_tokens <= 0 else "output_tokens", "must be > 0")
    if not ttft > 0:
        raise QueryError("ttft_s", "must be > 0")
    if not ttft < total_latency:
        raise QueryError("ttft_s", f"must be below total latency ({ttft} >= {total_latency})")
    return ttft / input_tokens, (total_latency - ttft) / output_tokens


def estimate_energy(bundle: ModelBundle, q: EstimateQuery) -> EnergyEstimate:
    if tuple(bundle.feature_order) != CONTINUOUS_FEATURES:
        raise ValueError(f"bundle feature order {bundle.feature_order} does not match {CONTINUOUS_FEATURES}")
    regime = route_regime(q.model_size_b, bundle.threshold_b)
    per_token = {}
    clamped = []
    for phase in PhaseKind:
        tm = bundle.slot(phase, regime)
        row = apply_scaler(encode(q.feature_vector(phase), bundle.vocab)[None, :], tm.scaler)
        value = tm.predict_one(row)
        if value < 0:
            clamped.append(phase.value)
            value = 0.0
        per_token[phase] = value
    prefill_j = per_token[PhaseKind.PREFILL] * q.input_tokens
    decode_j = per_token[PhaseKind.DECODE] * q.output_tokens
    return EnergyEstimate(
        prefill_j=prefill_j,
        decode_j=decode_j,
        total_j=prefill_j + decode_j,
        regime=regime,
        per_token_prefill_j=per_token[PhaseKind.PREFILL],
        per_token_decode_j=per_token[PhaseKind.DECODE],
        clamped=tuple(clamped),
    )
