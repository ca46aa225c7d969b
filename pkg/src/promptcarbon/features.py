"""Seven-attribute feature vectors, GPU one-hot encoding, scaling and regime splits."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .ingest import MergedRecord


class PhaseKind(str, enum.Enum):
    PREFILL = "prefill"
    DECODE = "decode"


class RegimeKind(str, enum.Enum):
    INTERPOLATION = "interpolation"
    EXTRAPOLATION = "extrapolation"


# Order of the continuous block in every encoded row; the GPU one-hot block follows.
CONTINUOUS_FEATURES = (
    "input_tokens",
    "output_tokens",
    "model_size_b",
    "phase_latency_s_per_token",
    "bbh",
    "mmlu_pro",
)
N_CONTINUOUS = len(CONTINUOUS_FEATURES)


class FeatureError(ValueError):
    pass


@dataclass(frozen=True)
class FeatureVector:
    input_tokens: float
    output_tokens: float
    model_size_b: float
    phase_latency_s_per_token: float
    gpu: str
    bbh: float
    mmlu_pro: float

    def continuous(self) -> list[float]:
        return [float(getattr(self, n)) for n in CONTINUOUS_FEATURES]


def extract_features(record: MergedRecord, phase: PhaseKind) -> tuple[FeatureVector, float]:
    """Feature vector and per-token energy target for one phase of a record.

    Only the latency of the requested phase enters the vector: prefill
    latency per input token for prefill, decode latency per output token
    for decode.
    """
    p, q = record.perf, record.quality
    phase = PhaseKind(phase)
    if phase is PhaseKind.PREFILL:
        latency, target = p.prefill_latency_s_per_token, p.prefill_energy_j_per_token
    else:
        latency, target = p.decode_latency_s_per_token, p.decode_energy_j_per_token
    fv = FeatureVector(
        input_tokens=p.bench_input_tokens,
        output_tokens=p.bench_output_tokens,
        model_size_b=p.model_size_b,
        phase_latency_s_per_token=latency,
        gpu=p.gpu,
        bbh=q.bbh,
        mmlu_pro=q.mmlu_pro,
    )
    return fv, target


def extract_all(records, phase: PhaseKind) -> tuple[list[FeatureVector], np.ndarray]:
    pairs = [extract_features(r, phase) for r in records]
    return [fv for fv, _ in pairs], np.array([t for _, t in pairs], dtype=float)


@dataclass(frozen=True)
class GpuVocabulary:
    """Sorted distinct GPU labels; index ``len(labels)`` is the unknown slot."""

    labels: tuple[str, ...]

    @property
    def width(self) -> int:
        return len(self.labels) + 1

    def index(self, label: str) -> int:
        # labels are sorted, so a bisect would do; vocabularies are tiny
        try:
            return self.labels.index(label)
        except ValueError:
            return len(self.labels)


def build_gpu_vocabulary(items) -> GpuVocabulary:
    """Vocabulary over the GPU labels of records, feature vectors or plain strings."""
    labels = set()
    for it in items:
        if isinstance(it, str):
            labels.add(it)
        elif isinstance(it, FeatureVector):
            labels.add(it.gpu)
        else:
            labels.add(it.perf.gpu)
    if not labels:
        raise FeatureError("cannot build a GPU vocabulary from no records")
    return GpuVocabulary(tuple(sorted(labels)))


def encoded_width(vocab: GpuVocabulary) -> int:
    return N_CONTINUOUS + vocab.width


def encode(fv: FeatureVector, vocab: GpuVocabulary) -> np.ndarray:
    row = np.zeros(encoded_width(vocab))
    row[:N_CONTINUOUS] = fv.continuous()
    row[N_CONTINUOUS + vocab.index(fv.gpu)] = 1.0
    return row


def encode_many(fvs, vocab: GpuVocabulary) -> np.ndarray:
    X = np.zeros((len(fvs), encoded_width(vocab)))
    for i, fv in enumerate(fvs):
        X[i, :N_CONTINUOUS] = fv.continuous()
        X[i, N_CONTINUOUS + vocab.index(fv.gpu)] = 1.0
    return X


def continuous_mask(vocab: GpuVocabulary) -> np.ndarray:
    mask = np.zeros(encoded_width(vocab), dtype=bool)
    mask[:N_CONTINUOUS] = True
    return mask


@dataclass(frozen=True)
class ScalerStats:
    """Per-column population mean/std.

    ``scaled[j]`` is False for one-hot columns and for zero-variance
    continuous columns; those pass through unchanged.
    """

    mean: tuple[float, ...]
    std: tuple[float, ...]
    scaled: tuple[bool, ...]

    @property
    def flagged_constant(self) -> tuple[int, ...]:
        return tuple(j for j, s in enumerate(self.std) if s == 0.0)


def fit_scaler(X, mask) -> ScalerStats:
    X = np.asarray(X, dtype=float)
    mask = np.asarray(mask, dtype=bool)
    if X.ndim != 2 or X.shape[0] < 2:
        raise FeatureError("fit_scaler needs at least 2 rows")
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    # ptp guards against std rounding to a tiny non-zero value on a constant column
    constant = np.ptp(X, axis=0) == 0
    std = np.where(constant, 0.0, std)
    scaled = mask & ~constant
    mean = np.where(mask, mean, 0.0)
    std = np.where(mask, std, 0.0)
    return ScalerStats(tuple(mean.tolist()), tuple(std.tolist()), tuple(scaled.tolist()))


def apply_scaler(X, stats: ScalerStats) -> np.ndarray:
    X = np.array(X, dtype=float, copy=True)
    s = np.array(stats.scaled)
    if X.shape[-1] != s.size:
        raise FeatureError(f"row width {X.shape[-1]} does not match scaler width {s.size}")
    mean = np.array(stats.mean)
    std = np.array(stats.std)
    X[..., s] = (X[..., s] - mean[s]) / std[s]
    return X


@dataclass
class FeaturePipeline:
    """Vocabulary + scaler fitted on one set of training records for one phase."""

    phase: PhaseKind
    vocab: GpuVocabulary
    scaler: ScalerStats

    @classmethod
    def fit(cls, records, phase: PhaseKind, vocab: GpuVocabulary | None = None):
        fvs, y = extract_all(records, phase)
        vocab = vocab or build_gpu_vocabulary(fvs)
        X = encode_many(fvs, vocab)
        scaler = fit_scaler(X, continuous_mask(vocab))
        return cls(PhaseKind(phase), vocab, scaler), apply_scaler(X, scaler), y

    def transform_records(self, records) -> tuple[np.ndarray, np.ndarray]:
        fvs, y = extract_all(records, self.phase)
        return self.transform(fvs), y

    def transform(self, fvs) -> np.ndarray:
        return apply_scaler(encode_many(fvs, self.vocab), self.scaler)


def regime_split(records, size_quantile: float = 0.8):
    """Split off the records whose model size lies strictly above a quantile.

    The quantile uses linear interpolation between order statistics
    (numpy's default). Returns ``(train, test)``, each in input order.
    """
    records = list(records)
    if not records:
        raise FeatureError("regime_split needs at least one record")
    if not 0.0 < size_quantile < 1.0:
        raise FeatureError(f"size_quantile must lie in (0, 1), got {size_quantile}")
    sizes = np.array([r.perf.model_size_b for r in records], dtype=float)
    if np.all(sizes == sizes[0]):
        raise FeatureError("all model sizes are equal; there is no extrapolation frontier")
    cut = float(np.quantile(sizes, size_quantile))
    train = [r for r, s in zip(records, sizes) if s <= cut]
    test = [r for r, s in zip(records, sizes) if s > cut]
    if not test:
        raise FeatureError(f"no model size lies above the {size_quantile} quantile ({cut})")
    return train, test
