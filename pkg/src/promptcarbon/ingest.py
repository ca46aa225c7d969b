"""Parsing, key canonicalization, merging and cleanup of leaderboard tables.

Two leaderboard exports feed the estimator: a performance/energy table
(one row per model x precision x hardware run) and a quality table (one
row per model x precision). Both are plain delimited text; which source
column feeds which record field is read from a small mapping file so a
schema change in a new snapshot only needs a new mapping, not new code.

Mapping file syntax, one entry per line::

    record_field=Source Column
    record_field=Source Column;scale=0.001      # multiply after parsing
    record_field=Source Column;per=input        # divide by bench_input_tokens
    record_field=const:256                      # constant for every row
    other:IFEval=IFEval                         # extra quality score

Blank lines and lines starting with ``#`` are ignored.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
from dataclasses import asdict, dataclass, field, fields
from importlib import resources
from typing import Iterable, Union

FORMAT_VERSION = 1

PRECISIONS = ("float32", "float16", "bfloat16", "int8", "int4")
PRECISION_SYNONYMS = {
    "fp16": "float16",
    "fp32": "float32",
    "bf16": "bfloat16",
    "8bit": "int8",
    "4bit": "int4",
}

Source = Union[str, bytes, os.PathLike, io.IOBase]


class IngestError(ValueError):
    """Base class for data problems found while ingesting benchmark tables."""


class SchemaError(IngestError):
    """A mapped column is absent from the table header."""


class InvalidKeyError(IngestError):
    """A model name / precision pair cannot be canonicalized."""


class DuplicateKeyError(IngestError):
    def __init__(self, keys):
        self.keys = list(keys)
        shown = ", ".join(f"({k.canonical_name}, {k.canonical_precision})" for k in self.keys)
        super().__init__(f"duplicate quality keys: {shown}")


@dataclass(frozen=True, order=True)
class ModelKey:
    canonical_name: str
    canonical_precision: str


@dataclass(frozen=True)
class PerfRecord:
    model_name: str
    precision: str
    gpu: str
    prefill_latency_s_per_token: float
    decode_latency_s_per_token: float
    prefill_energy_j_per_token: float
    decode_energy_j_per_token: float
    model_size_b: float
    bench_input_tokens: float
    bench_output_tokens: float


@dataclass(frozen=True)
class QualityRecord:
    model_name: str
    precision: str
    bbh: float
    mmlu_pro: float
    other_scores: dict = field(default_factory=dict, compare=True, hash=False)


@dataclass(frozen=True)
class MergedRecord:
    key: ModelKey
    perf: PerfRecord
    quality: QualityRecord


@dataclass(frozen=True)
class RejectedRow:
    row_index: int  # 0-based data row, header excluded
    reason: str
    raw: dict


@dataclass(frozen=True)
class CleanReport:
    rows_in: int
    rows_dropped_missing: int
    rows_dropped_duplicate: int
    rows_out: int


PERF_TEXT_FIELDS = ("model_name", "precision", "gpu")
PERF_NUMERIC_FIELDS = tuple(f.name for f in fields(PerfRecord) if f.name not in PERF_TEXT_FIELDS)
QUALITY_TEXT_FIELDS = ("model_name", "precision")
QUALITY_NUMERIC_FIELDS = ("bbh", "mmlu_pro")
MAX_OTHER_SCORES = 4


def canonical_key(model_name: str, precision: str) -> ModelKey:
    """Normalize a (model name, precision) pair into the join key.

    The name is trimmed and lowercased; the precision is trimmed, lowercased
    and mapped through a fixed synonym table onto
    ``float32 | float16 | bfloat16 | int8 | int4``.
    """
    name = (model_name or "").strip().lower()
    if not name:
        raise InvalidKeyError("model name is empty")
    prec = (precision or "").strip().lower()
    if not prec:
        raise InvalidKeyError(f"precision is empty for model {name!r}")
    prec = PRECISION_SYNONYMS.get(prec, prec)
    if prec not in PRECISIONS:
        raise InvalidKeyError(f"unknown precision {precision!r} for model {name!r}")
    return ModelKey(name, prec)


# -- column mappings ---------------------------------------------------------


@dataclass(frozen=True)
class ColumnSpec:
    column: str | None = None
    const: str | None = None
    scale: float = 1.0
    per: str | None = None  # "input" | "output"


@dataclass(frozen=True)
class ColumnMapping:
    columns: dict
    other: dict = field(default_factory=dict)

    @classmethod
    def parse(cls, text: str) -> "ColumnMapping":
        columns, other = {}, {}
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise SchemaError(f"mapping line {lineno}: expected field=column, got {line!r}")
            name, rest = line.split("=", 1)
            name = name.strip()
            parts = [p.strip() for p in rest.split(";")]
            source, opts = parts[0], parts[1:]
            spec = {"column": source}
            if source.startswith("const:"):
                spec = {"const": source[len("const:"):].strip()}
            for opt in opts:
                k, _, v = opt.partition("=")
                k = k.strip()
                if k == "scale":
                    spec["scale"] = float(v)
                elif k == "per":
                    if v.strip() not in ("input", "output"):
                        raise SchemaError(f"mapping line {lineno}: per= must be input or output")
                    spec["per"] = v.strip()
                else:
                    raise SchemaError(f"mapping line {lineno}: unknown option {k!r}")
            if name.startswith("other:"):
                other[name[len("other:"):].strip()] = ColumnSpec(**spec)
            else:
                columns[name] = ColumnSpec(**spec)
        return cls(columns, other)

    @classmethod
    def load(cls, path) -> "ColumnMapping":
        with open(path, encoding="utf-8") as fh:
            return cls.parse(fh.read())


def default_mapping(which: str) -> ColumnMapping:
    """Shipped mapping for ``"perf"`` or ``"quality"`` exports."""
    name = {"perf": "perf.map", "quality": "quality.map"}[which]
    text = resources.files("promptcarbon").joinpath("data", name).read_text(encoding="utf-8")
    return ColumnMapping.parse(text)


# -- table reading -----------------------------------------------------------


def _read_text(source: Source) -> str:
    if isinstance(source, bytes):
        return source.decode("utf-8-sig")
    if isinstance(source, (str, os.PathLike)):
        with open(source, "rb") as fh:
            return fh.read().decode("utf-8-sig")
    data = source.read()
    return data.decode("utf-8-sig") if isinstance(data, bytes) else data


def read_table(source: Source) -> tuple[list[str], list[dict]]:
    """Read a comma- or tab-delimited table; the delimiter is taken from the header."""
    text = _read_text(source)
    if not text.strip():
        return [], []
    header_line = text.splitlines()[0]
    delim = "\t" if header_line.count("\t") > header_line.count(",") else ","
    reader = csv.reader(io.StringIO(text), delimiter=delim)
    header = [h.strip() for h in next(reader)]
    rows = []
    for values in reader:
        if not any(v.strip() for v in values):
            continue
        rows.append({h: (values[i] if i < len(values) else "") for i, h in enumerate(header)})
    return header, rows


def _check_columns(header, mapping: ColumnMapping, required: Iterable[str]):
    for name in required:
        if name not in mapping.columns:
            raise SchemaError(f"column mapping has no entry for field {name!r}")
    specs = list(mapping.columns.items()) + [(f"other:{k}", v) for k, v in mapping.other.items()]
    for name, spec in specs:
        if spec.column is not None and spec.column not in header:
            raise SchemaError(f"column {spec.column!r} (for field {name!r}) not found in table header")


def _get_raw(row: dict, spec: ColumnSpec) -> str:
    return spec.const if spec.const is not None else row.get(spec.column, "")


def _to_float(raw: str, name: str) -> float:
    try:
        value = float(raw.strip().replace(",", ""))
    except (ValueError, AttributeError):
        raise ValueError(f"field {name!r}: cannot parse {raw!r} as a number") from None
    if not math.isfinite(value):
        raise ValueError(f"field {name!r}: non-finite value {raw!r}")
    return value


def parse_perf_table(source: Source, mapping: ColumnMapping | None = None):
    """Parse a performance/energy table into ``PerfRecord`` rows.

    Returns ``(records, rejected)``. A row that fails to parse, has a
    negative or non-finite number, a non-positive model size or token
    count, or an unrecognized precision lands in ``rejected`` with its
    0-based row index; nothing is dropped silently.
    """
    mapping = mapping or default_mapping("perf")
    header, rows = read_table(source)
    if not header:
        return [], []
    _check_columns(header, mapping, PERF_TEXT_FIELDS + PERF_NUMERIC_FIELDS)

    records, rejected = [], []
    for i, row in enumerate(rows):
        try:
            text = {n: _get_raw(row, mapping.columns[n]).strip() for n in PERF_TEXT_FIELDS}
            canonical_key(text["model_name"], text["precision"])
            if not text["gpu"]:
                raise ValueError("field 'gpu' is empty")
            nums = {}
            for n in PERF_NUMERIC_FIELDS:
                spec = mapping.columns[n]
                v = _to_float(_get_raw(row, spec), n) * spec.scale
                if v < 0:
                    raise ValueError(f"field {n!r}: negative value {v}")
                nums[n] = v
            for n in ("model_size_b", "bench_input_tokens", "bench_output_tokens"):
                if nums[n] <= 0:
                    raise ValueError(f"field {n!r} must be > 0, got {nums[n]}")
            for n in PERF_NUMERIC_FIELDS:
                per = mapping.columns[n].per
                if per:
                    nums[n] /= nums["bench_input_tokens" if per == "input" else "bench_output_tokens"]
        except (ValueError, IngestError) as exc:
            rejected.append(RejectedRow(i, str(exc), row))
            continue
        records.append(PerfRecord(**text, **nums))
    return records, rejected


def parse_quality_table(source: Source, mapping: ColumnMapping | None = None):
    """Parse a quality-score table into ``QualityRecord`` rows.

    Same contract as :func:`parse_perf_table`. Scores outside [0, 100]
    reject the row. Up to four extra scores may be mapped with ``other:``.
    """
    mapping = mapping or default_mapping("quality")
    if len(mapping.other) > MAX_OTHER_SCORES:
        raise SchemaError(f"at most {MAX_OTHER_SCORES} other: scores may be mapped")
    header, rows = read_table(source)
    if not header:
        return [], []
    _check_columns(header, mapping, QUALITY_TEXT_FIELDS + QUALITY_NUMERIC_FIELDS)

    records, rejected = [], []
    for i, row in enumerate(rows):
        try:
            text = {n: _get_raw(row, mapping.columns[n]).strip() for n in QUALITY_TEXT_FIELDS}
            canonical_key(text["model_name"], text["precision"])
            scores = {}
            named = [(n, mapping.columns[n]) for n in QUALITY_NUMERIC_FIELDS] + list(mapping.other.items())
            for n, spec in named:
                raw = _get_raw(row, spec)
                if n not in QUALITY_NUMERIC_FIELDS and not raw.strip():
                    continue
                v = _to_float(raw, n) * spec.scale
                if not 0.0 <= v <= 100.0:
                    raise ValueError(f"score {n!r} = {v} outside [0, 100]")
                scores[n] = v
        except (ValueError, IngestError) as exc:
            rejected.append(RejectedRow(i, str(exc), row))
            continue
        other = {k: v for k, v in scores.items() if k not in QUALITY_NUMERIC_FIELDS}
        records.append(QualityRecord(**text, bbh=scores["bbh"], mmlu_pro=scores["mmlu_pro"], other_scores=other))
    return records, rejected


# -- merge and clean ---------------------------------------------------------


def dedupe_quality(quality: list[QualityRecord]) -> tuple[list[QualityRecord], int]:
    """Drop quality rows that repeat an earlier row's key *and* scores.

    Rows sharing a key but disagreeing on scores are left in place so that
    :func:`merge_benchmarks` reports them.
    """
    seen = {}
    out = []
    for q in quality:
        k = canonical_key(q.model_name, q.precision)
        sig = (q.bbh, q.mmlu_pro, tuple(sorted(q.other_scores.items())))
        if sig in seen.get(k, ()):
            continue
        seen.setdefault(k, set()).add(sig)
        out.append(q)
    return out, len(quality) - len(out)


def merge_benchmarks(perf: list[PerfRecord], quality: list[QualityRecord]) -> list[MergedRecord]:
    """Inner-join perf rows onto quality rows by canonical key, in perf order."""
    by_key, dupes = {}, []
    for q in quality:
        k = canonical_key(q.model_name, q.precision)
        if k in by_key:
            dupes.append(k)
        by_key[k] = q
    if dupes:
        raise DuplicateKeyError(sorted(set(dupes)))
    merged = []
    for p in perf:
        k = canonical_key(p.model_name, p.precision)
        q = by_key.get(k)
        if q is not None:
            merged.append(MergedRecord(k, p, q))
    return merged


def unmatched_keys(perf: list[PerfRecord], quality: list[QualityRecord]) -> list[ModelKey]:
    """Distinct perf keys with no quality row, sorted."""
    qkeys = {canonical_key(q.model_name, q.precision) for q in quality}
    return sorted({canonical_key(p.model_name, p.precision) for p in perf} - qkeys)


def _numeric_values(r: MergedRecord) -> tuple:
    return tuple(getattr(r.perf, n) for n in PERF_NUMERIC_FIELDS) + (r.quality.bbh, r.quality.mmlu_pro)


def _is_complete(r: MergedRecord) -> bool:
    vals = _numeric_values(r)
    if not all(isinstance(v, (int, float)) and math.isfinite(v) for v in vals):
        return False
    p = r.perf
    # zero energies would make percentage errors undefined downstream
    positive = (p.model_size_b, p.bench_input_tokens, p.bench_output_tokens,
                p.prefill_energy_j_per_token, p.decode_energy_j_per_token)
    nonneg = (p.prefill_latency_s_per_token, p.decode_latency_s_per_token)
    return all(v > 0 for v in positive) and all(v >= 0 for v in nonneg) and bool(p.gpu)


def clean_records(records: list[MergedRecord]) -> tuple[list[MergedRecord], CleanReport]:
    """Drop incomplete rows and exact duplicates.

    Survivors are returned stably sorted by ``(key, gpu)``; of a set of
    duplicates (same key, gpu and every numeric field) the first survives.
    """
    complete = [r for r in records if _is_complete(r)]
    n_missing = len(records) - len(complete)
    ordered = sorted(complete, key=lambda r: (r.key, r.perf.gpu))
    seen, out = set(), []
    for r in ordered:
        sig = (r.key, r.perf.gpu, _numeric_values(r))
        if sig in seen:
            continue
        seen.add(sig)
        out.append(r)
    report = CleanReport(len(records), n_missing, len(complete) - len(out), len(out))
    return out, report


# -- dataset persistence -----------------------------------------------------


def record_to_dict(r: MergedRecord) -> dict:
    return {"key": asdict(r.key), "perf": asdict(r.perf), "quality": asdict(r.quality)}


def record_from_dict(d: dict) -> MergedRecord:
    q = dict(d["quality"])
    q["other_scores"] = dict(q.get("other_scores") or {})
    return MergedRecord(ModelKey(**d["key"]), PerfRecord(**d["perf"]), QualityRecord(**q))


def dataset_hash(records: list[MergedRecord]) -> str:
    """Content hash of a record list, independent of file formatting."""
    payload = json.dumps([record_to_dict(r) for r in records], sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def save_dataset(records: list[MergedRecord], path, report: CleanReport | None = None) -> None:
    doc = {
        "format_version": FORMAT_VERSION,
        "kind": "merged-dataset",
        "record_count": len(records),
        "dataset_hash": dataset_hash(records),
        "clean_report": asdict(report) if report else None,
        "records": [record_to_dict(r) for r in records],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_dataset(path) -> list[MergedRecord]:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise IngestError(f"{path}: not a valid dataset file ({exc})") from None
    if doc.get("kind") != "merged-dataset":
        raise IngestError(f"{path}: not a merged dataset file")
    if doc.get("format_version") != FORMAT_VERSION:
        raise IngestError(f"{path}: unsupported dataset format_version {doc.get('format_version')!r}")
    try:
        return [record_from_dict(d) for d in doc["records"]]
    except (KeyError, TypeError) as exc:
        raise IngestError(f"{path}: malformed record ({exc})") from None
