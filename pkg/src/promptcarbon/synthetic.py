"""Synthetic benchmark data with a known per-token energy function.

Used as a ground-truth oracle when real leaderboard snapshots are not at
hand. Energy per token for either phase is::

    0.05 * model_size_b + 40 * phase_latency + 0.02 * (100 - bbh) + gpu_offset

times ``1 + noise * z`` with standard-normal ``z`` (noise is relative to
the noiseless signal).
"""

from __future__ import annotations

import csv
import io

import numpy as np

from .ingest import MergedRecord, PerfRecord, QualityRecord, canonical_key

GPU_OFFSETS = {"A100-80GB": 0.5, "A10G": 1.5, "H100-80GB": 0.25, "T4": 2.0}
# relative slowness; scales latencies per GPU
GPU_SLOWDOWN = {"A100-80GB": 1.0, "A10G": 2.2, "H100-80GB": 0.6, "T4": 3.5}
BENCH_INPUT_TOKENS = 256
BENCH_OUTPUT_TOKENS = 64


def energy_per_token(model_size_b, phase_latency, bbh, gpu) -> float:
    return 0.05 * model_size_b + 40.0 * phase_latency + 0.02 * (100.0 - bbh) + GPU_OFFSETS[gpu]


def make_records(n_models: int, seed: int = 0, size_range=(1.0, 111.0), gpus=None,
                 noise: float = 0.02, name_prefix: str = "synth") -> list[MergedRecord]:
    """``n_models`` models, each measured on every GPU in ``gpus``.

    Sizes are uniform on ``size_range``; model names are
    ``{name_prefix}/model-{i}`` at float16.
    """
    rng = np.random.default_rng(seed)
    gpus = list(gpus or GPU_OFFSETS)
    lo, hi = size_range
    out = []
    for i in range(n_models):
        size = float(rng.uniform(lo, hi))
        if size <= lo:
            size = float(np.nextafter(lo, hi))
        bbh = float(rng.uniform(5, 70))
        mmlu = float(np.clip(0.6 * bbh + rng.normal(0, 5), 0, 100))
        name = f"{name_prefix}/model-{i:05d}"
        q = QualityRecord(name, "float16", bbh, mmlu, {})
        for gpu in gpus:
            slow = GPU_SLOWDOWN[gpu]
            pre_lat = (2e-5 + 2e-6 * size) * slow * float(rng.uniform(0.8, 1.25))
            dec_lat = (5e-3 + 2.5e-4 * size) * slow * float(rng.uniform(0.8, 1.25))
            pe = energy_per_token(size, pre_lat, bbh, gpu) * (1 + noise * float(rng.standard_normal()))
            de = energy_per_token(size, dec_lat, bbh, gpu) * (1 + noise * float(rng.standard_normal()))
            p = PerfRecord(
                model_name=name, precision="float16", gpu=gpu,
                prefill_latency_s_per_token=pre_lat, decode_latency_s_per_token=dec_lat,
                prefill_energy_j_per_token=pe, decode_energy_j_per_token=de,
                model_size_b=size,
                bench_input_tokens=float(BENCH_INPUT_TOKENS), bench_output_tokens=float(BENCH_OUTPUT_TOKENS),
            )
            out.append(MergedRecord(canonical_key(name, "float16"), p, q))
    return out


def oracle_dataset(seed: int = 0, n_rows: int = 2000, n_extrapolation_rows: int = 400, noise: float = 0.02):
    """In-range rows (sizes in [1, 111]) and a held-out block with sizes in (111, 400]."""
    n_gpus = len(GPU_OFFSETS)
    inside = make_records(n_rows // n_gpus, seed, (1.0, 111.0), noise=noise, name_prefix="synth-in")
    outside = make_records(n_extrapolation_rows // n_gpus, seed + 1, (111.0, 400.0), noise=noise,
                           name_prefix="synth-out")
    return inside, outside


def to_tables(records: list[MergedRecord]) -> tuple[str, str]:
    """CSV exports of ``records`` laid out for the shipped column mappings.

    Perf energies and latencies are written as per-phase totals over the
    fixed benchmark token counts, as the default perf mapping expects.
    """
    perf = io.StringIO()
    w = csv.writer(perf, lineterminator="\n")
    w.writerow(["Model", "Precision", "GPU", "Params (B)", "Prefill Latency (s)", "Decode Latency (s)",
                "Prefill Energy (J)", "Decode Energy (J)"])
    quality = io.StringIO()
    wq = csv.writer(quality, lineterminator="\n")
    wq.writerow(["fullname", "Precision", "BBH", "MMLU-PRO", "IFEval", "MATH Lvl 5", "GPQA", "MUSR"])
    seen = set()
    for r in records:
        p = r.perf
        w.writerow([p.model_name, p.precision, p.gpu, repr(p.model_size_b),
                    repr(p.prefill_latency_s_per_token * p.bench_input_tokens),
                    repr(p.decode_latency_s_per_token * p.bench_output_tokens),
                    repr(p.prefill_energy_j_per_token * p.bench_input_tokens),
                    repr(p.decode_energy_j_per_token * p.bench_output_tokens)])
        if r.key not in seen:
            seen.add(r.key)
            q = r.quality
            wq.writerow([q.model_name, q.precision, repr(q.bbh), repr(q.mmlu_pro), "", "", "", ""])
    return perf.getvalue(), quality.getvalue()
