"""Request handling shared by the CLI and the HTTP service.

A request is a flat JSON object with the :class:`EstimateQuery` field
names. Latencies come either directly
(``prefill_latency_s_per_input_token`` + ``decode_latency_s_per_output_token``)
or as ``ttft_s`` + ``total_latency_s``, never both.
"""

from __future__ import annotations

import json

from .carbon import IntensityTable, UnknownRegionError, energy_to_carbon
from .estimator import EstimateQuery, QueryError, derive_latencies, estimate_energy

DIRECT = ("prefill_latency_s_per_input_token", "decode_latency_s_per_output_token")
DERIVED = ("ttft_s", "total_latency_s")
REQUIRED = ("model_size_b", "input_tokens", "output_tokens", "gpu", "bbh", "mmlu_pro")
OPTIONAL = ("region",)


class RequestError(ValueError):
    """Malformed request; ``field`` names the offending field."""

    def __init__(self, field_name: str, message: str):
        self.field = field_name
        super().__init__(f"{field_name}: {message}")


class LatencyConflict(RequestError):
    pass


def query_from_payload(payload: dict) -> EstimateQuery:
    if not isinstance(payload, dict):
        raise RequestError("body", "must be a JSON object")
    known = set(REQUIRED) | set(OPTIONAL) | set(DIRECT) | set(DERIVED)
    unknown = sorted(set(payload) - known)
    if unknown:
        raise RequestError(unknown[0], "unknown field")
    for name in REQUIRED:
        if payload.get(name) is None:
            raise RequestError(name, "is required")

    direct = [n for n in DIRECT if payload.get(n) is not None]
    derived = [n for n in DERIVED if payload.get(n) is not None]
    if direct and derived:
        raise LatencyConflict(derived[0], "give either per-token latencies or ttft_s + total_latency_s, not both")
    if derived:
        missing = [n for n in DERIVED if n not in derived]
        if missing:
            raise RequestError(missing[0], "is required together with " + derived[0])
        try:
            pre, dec = derive_latencies(
                _num(payload, "ttft_s"), _num(payload, "total_latency_s"),
                _num(payload, "input_tokens"), _num(payload, "output_tokens"),
            )
        except QueryError as exc:
            raise RequestError(exc.field, str(exc).split(": ", 1)[-1]) from None
    else:
        missing = [n for n in DIRECT if n not in direct]
        if missing:
            raise RequestError(missing[0], "is required (or give ttft_s + total_latency_s)")
        pre, dec = _num(payload, DIRECT[0]), _num(payload, DIRECT[1])

    try:
        return EstimateQuery(
            model_size_b=_num(payload, "model_size_b"),
            input_tokens=_num(payload, "input_tokens"),
            output_tokens=_num(payload, "output_tokens"),
            prefill_latency_s_per_input_token=pre,
            decode_latency_s_per_output_token=dec,
            gpu=payload["gpu"],
            bbh=_num(payload, "bbh"),
            mmlu_pro=_num(payload, "mmlu_pro"),
            region=payload.get("region"),
        )
    except QueryError as exc:
        raise RequestError(exc.field, str(exc).split(": ", 1)[-1]) from None


def _num(payload, name):
    v = payload[name]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise RequestError(name, f"must be a number, got {v!r}")
    return v


def estimate_payload(bundle, payload: dict, table: IntensityTable | None = None) -> dict:
    """Full response document for one request."""
    q = query_from_payload(payload)
    energy = estimate_energy(bundle, q)
    out = {"energy": energy.to_dict(), "carbon": None}
    if q.region is not None:
        if table is None:
            raise RequestError("region", "no intensity table is loaded")
        try:
            out["carbon"] = energy_to_carbon(energy, q.region, table).to_dict()
        except UnknownRegionError as exc:
            raise RequestError("region", str(exc)) from None
    return out


def dumps(doc) -> str:
    return json.dumps(doc, sort_keys=True)
