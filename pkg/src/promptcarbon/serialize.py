"""Number formatting and canonical JSON used by every persisted file."""

from __future__ import annotations

import hashlib
import json
import math


def fmt_num(x) -> str:
    """Decimal text with 17 significant digits; round-trips any double exactly."""
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"cannot serialize non-finite number {x!r}")
    return format(x, ".17g")


def parse_num(s) -> float:
    return float(s)


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=True)


def digest(obj) -> str:
    return hashlib.sha256(canonical_json(obj).encode("utf-8")).hexdigest()
