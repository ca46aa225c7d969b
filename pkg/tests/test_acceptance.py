"""Acceptance suite: one PASS/FAIL/SKIP line per criterion, tolerances pinned below.

Real leaderboard snapshots are not bundled. Point ``PROMPTCARBON_SNAPSHOTS``
at a directory holding ``perf.csv`` and ``quality.csv`` (plus optional
``perf.map`` / ``quality.map``) to run the real-data checks; set
``PROMPTCARBON_SNAPSHOTS_ORIGINAL=1`` when those are the original-era
snapshots whose exact row counts are pinned in criterion 2.
"""

import json
import os
import threading
import urllib.request
from pathlib import Path

import numpy as np
import pytest

from promptcarbon.api import estimate_payload
from promptcarbon.bundle import fit_bundle, load_bundle, save_bundle
from promptcarbon.carbon import IntensityTable, energy_to_carbon
from promptcarbon.cli import main
from promptcarbon.estimator import EnergyEstimate, EstimateQuery, estimate_energy
from promptcarbon.evaluation import cross_validate, evaluate_all, holdout_validate, select_model
from promptcarbon.features import PhaseKind, RegimeKind
from promptcarbon.ingest import (
    ColumnMapping,
    canonical_key,
    clean_records,
    dedupe_quality,
    default_mapping,
    merge_benchmarks,
    parse_perf_table,
    parse_quality_table,
)
from promptcarbon.metrics import smape
from promptcarbon.regressors import GbdtParams, RegressorKind, solve_ridge, train_gbdt, train_ridge
from promptcarbon.regressors import RidgeParams
from promptcarbon.service import make_server
from promptcarbon.synthetic import make_records, oracle_dataset, to_tables
from promptcarbon.validation import LLAMA2_CASES, external_validation

# pinned tolerances
C1_TOL_7B, C1_TOL_13B, C1_TOL_MEAN = 0.01, 0.05, 0.05
C2_COUNTS = (3173, 2045, 3042)
C3_INTERP_BAND, C3_MIN_R2 = (3.0, 15.0), 0.98
C4_GBDT_MAX, C4_RIDGE_MAX = 10.0, 5.0
C5_TOL = 1e-9
C6_BAND = 0.5

SNAPSHOTS = os.environ.get("PROMPTCARBON_SNAPSHOTS")
ORIGINAL_ERA = os.environ.get("PROMPTCARBON_SNAPSHOTS_ORIGINAL") == "1"
K = RegressorKind


@pytest.fixture
def verdict(capsys):
    """Print one verdict line past pytest's capture, then assert it."""

    def emit(criterion, ok, detail):
        with capsys.disabled():
            print(f"\n[acceptance] {criterion}: {'PASS' if ok else 'FAIL'} - {detail}")
        assert ok, detail

    return emit


def skip_line(capsys, criterion, reason):
    with capsys.disabled():
        print(f"\n[acceptance] {criterion}: SKIP - {reason}")
    pytest.skip(reason)


def load_snapshots():
    d = Path(SNAPSHOTS)
    pm = ColumnMapping.load(d / "perf.map") if (d / "perf.map").exists() else default_mapping("perf")
    qm = ColumnMapping.load(d / "quality.map") if (d / "quality.map").exists() else default_mapping("quality")
    perf, _ = parse_perf_table(d / "perf.csv", pm)
    quality, _ = parse_quality_table(d / "quality.csv", qm)
    return perf, quality


@pytest.fixture(scope="module")
def real_records():
    if not SNAPSHOTS:
        return None
    perf, quality = load_snapshots()
    quality, _ = dedupe_quality(quality)
    records, _ = clean_records(merge_benchmarks(perf, quality))
    return records


# -- 1 ----------------------------------------------------------------------


def test_c1_table2_metric(verdict):
    e7 = smape(349.96, 425.60)
    e13 = smape(602.27, 707.20)
    mean = (e7 + e13) / 2
    ok = abs(e7 - 19.51) <= C1_TOL_7B and abs(e13 - 16.02) <= C1_TOL_13B and abs(mean - 17.76) <= C1_TOL_MEAN
    verdict("C1 error metric", ok, f"7B {e7:.4f}% (19.51), 13B {e13:.4f}% (16.02), mean {mean:.4f}% (17.76)")


# -- 2 ----------------------------------------------------------------------


def _structural(perf, quality):
    merged = merge_benchmarks(perf, quality)
    qkeys = {canonical_key(q.model_name, q.precision) for q in quality}
    expected = [p for p in perf if canonical_key(p.model_name, p.precision) in qkeys]
    sound = all(r.key == canonical_key(r.perf.model_name, r.perf.precision)
                == canonical_key(r.quality.model_name, r.quality.precision) for r in merged)
    complete = [r.perf for r in merged] == expected
    return merged, sound and complete and len(merged) <= len(perf)


def test_c2_merge_invariants_synthetic(verdict):
    recs = make_records(40, seed=21)
    perf_csv, quality_csv = to_tables(recs)
    lines = quality_csv.splitlines()
    quality_csv = "\n".join(lines[:-10]) + "\n"  # drop some models so the join is partial
    perf, _ = parse_perf_table(perf_csv.encode(), default_mapping("perf"))
    quality, _ = parse_quality_table(quality_csv.encode(), default_mapping("quality"))
    merged, ok = _structural(perf, quality)
    verdict("C2 merge invariants (synthetic)", ok and len(merged) == 4 * 30,
            f"perf {len(perf)}, quality {len(quality)}, merged {len(merged)}; soundness+completeness checked")


def test_c2_snapshot_counts(verdict, capsys):
    if not SNAPSHOTS:
        skip_line(capsys, "C2 snapshot counts", "PROMPTCARBON_SNAPSHOTS not set; leaderboard snapshots unavailable")
    perf, quality = load_snapshots()
    merged, ok = _structural(perf, quality)
    counts = (len(perf), len(quality), len(merged))
    if ORIGINAL_ERA:
        verdict("C2 snapshot counts", ok and counts == C2_COUNTS, f"counts {counts}, expected {C2_COUNTS}")
    else:
        verdict("C2 snapshot invariants", ok, f"counts {counts} (exact counts only pinned for original snapshots)")


# -- 3 ----------------------------------------------------------------------


@pytest.mark.slow
def test_c3_table1_property_band(verdict, capsys, real_records):
    if real_records is None:
        skip_line(capsys, "C3 model comparison band", "PROMPTCARBON_SNAPSHOTS not set; no real merged snapshot")
    reports = evaluate_all(real_records, k=10, seed=0)
    sel = select_model(reports)
    by = {(r.phase, r.regime, r.kind): r for r in reports}
    a = all(sel[(p, RegimeKind.INTERPOLATION)] is K.GRADIENT_BOOSTED_TREES for p in PhaseKind) and all(
        sel[(p, RegimeKind.EXTRAPOLATION)] is K.RIDGE for p in PhaseKind)
    lo, hi = C3_INTERP_BAND
    interp = {p: by[(p, RegimeKind.INTERPOLATION, sel[(p, RegimeKind.INTERPOLATION)])] for p in PhaseKind}
    extrap = {p: by[(p, RegimeKind.EXTRAPOLATION, sel[(p, RegimeKind.EXTRAPOLATION)])] for p in PhaseKind}
    b = all(lo <= interp[p].mape_mean <= hi and (interp[p].r2 or 0) >= C3_MIN_R2 for p in PhaseKind)
    c = all(extrap[p].mape_mean > interp[p].mape_mean for p in PhaseKind)
    detail = ", ".join(
        f"{p.value}: interp {interp[p].mape_mean:.2f}% R2 {interp[p].r2} / extrap {extrap[p].mape_mean:.2f}%"
        for p in PhaseKind)
    verdict("C3 model comparison band", a and b and c, f"winners={a} band={b} extrap>interp={c}; {detail}")


# -- 4 ----------------------------------------------------------------------


def test_c4_synthetic_oracle(verdict):
    inside, outside = oracle_dataset(seed=0, n_rows=2000, n_extrapolation_rows=400)
    assert len(inside) == 2000 and max(r.perf.model_size_b for r in inside) <= 111
    assert min(r.perf.model_size_b for r in outside) > 111
    gbdt_cv = [cross_validate(inside, p, K.GRADIENT_BOOSTED_TREES, k=10, seed=0).mape_mean for p in PhaseKind]
    ridge_ex = [holdout_validate(inside, outside, p, K.RIDGE).mape_mean for p in PhaseKind]
    gbdt_ex = [holdout_validate(inside, outside, p, K.GRADIENT_BOOSTED_TREES).mape_mean for p in PhaseKind]
    ok = (all(m <= C4_GBDT_MAX for m in gbdt_cv) and all(m <= C4_RIDGE_MAX for m in ridge_ex)
          and all(r < g for r, g in zip(ridge_ex, gbdt_ex)))
    verdict("C4 synthetic oracle", ok,
            "GBDT 10-fold MAPE prefill/decode {:.2f}/{:.2f}% (<=10); ridge >111 block {:.2f}/{:.2f}% (<=5); "
            "GBDT >111 block {:.2f}/{:.2f}%".format(*gbdt_cv, *ridge_ex, *gbdt_ex))


# -- 5 ----------------------------------------------------------------------


def test_c5_regressor_micro_oracles(verdict):
    stump = dict(n_trees=1, max_depth=1, learning_rate=1.0, min_samples_leaf=1)
    p0 = train_gbdt([[0], [1]], [0, 10], GbdtParams(l2_leaf_penalty=0.0, **stump)).predict([[0], [1]])
    p1 = train_gbdt([[0], [1]], [0, 10], GbdtParams(l2_leaf_penalty=1.0, **stump)).predict([[0], [1]])
    r = train_ridge([[1], [2]], [1, 2], RidgeParams(alpha=1.0))
    hand = (np.abs(p0 - [0, 10]).max() <= C5_TOL and np.abs(p1 - [2.5, 7.5]).max() <= C5_TOL
            and abs(r.weights[0] - 1 / 3) <= C5_TOL and abs(r.intercept - 1.0) <= C5_TOL
            and abs(r.predict([[3.0]])[0] - 2.0) <= C5_TOL)

    rng = np.random.default_rng(2024)
    boost_ok = shrink_ok = 0
    for _ in range(100):
        n, d = int(rng.integers(6, 40)), int(rng.integers(1, 5))
        X = rng.normal(size=(n, d))
        y = X @ rng.normal(size=d) + np.sin(3 * X[:, 0]) + rng.normal(scale=0.2, size=n)
        m = train_gbdt(X, y, GbdtParams(n_trees=20, learning_rate=float(rng.uniform(0.05, 1)),
                                        max_depth=int(rng.integers(1, 5)), min_samples_leaf=int(rng.integers(1, 4))))
        mses = [np.mean((y - s) ** 2) for s in m.staged_predict(X)]
        boost_ok += all(b <= a + 1e-12 for a, b in zip(mses, mses[1:]))
        norms = [np.linalg.norm(solve_ridge(X, y, a).weights) for a in (0.0, 0.01, 0.1, 1, 10, 100)]
        shrink_ok += all(b <= a * (1 + 1e-12) for a, b in zip(norms, norms[1:]))
    verdict("C5 regressor micro-oracles", hand and boost_ok == 100 and shrink_ok == 100,
            f"hand traces {'match' if hand else 'differ'} at 1e-9; boosting monotone {boost_ok}/100; "
            f"ridge shrinkage monotone {shrink_ok}/100")


# -- 6 ----------------------------------------------------------------------


def _check_report(doc):
    ok = len(doc["rows"]) == len(LLAMA2_CASES)
    for row, case in zip(doc["rows"], LLAMA2_CASES):
        recomputed = 200.0 * abs(row["measured_j"] - row["estimated_j"]) / (row["measured_j"] + row["estimated_j"])
        ok &= row["error_pct"] == recomputed
        ok &= (row["input_tokens"], row["output_tokens"]) == (38, 64)
        ok &= row["measured_j"] == case.measured_j and row["reference_estimate_j"] == case.reference_estimate_j
        ok &= row["within_band"] == (abs(row["estimated_j"] - case.reference_estimate_j)
                                     <= C6_BAND * case.reference_estimate_j)
    ok &= doc["mean_error_pct"] == float(np.mean([r["error_pct"] for r in doc["rows"]]))
    return ok


def _band_summary(doc):
    return "; ".join(f"{r['llm']} est {r['estimated_j']:.2f} J vs {r['reference_estimate_j']} J "
                     f"({'within' if r['within_band'] else 'outside'} +/-50%)" for r in doc["rows"])


def test_c6_validation_harness_synthetic(verdict, small_bundle, small_records):
    doc = external_validation(small_bundle, small_records)
    verdict("C6 validation harness arithmetic (synthetic bundle)", _check_report(doc),
            "sMAPE recomputed exactly from report columns; band flag (informational): " + _band_summary(doc))


@pytest.mark.slow
def test_c6_validation_real(verdict, capsys, real_records):
    if real_records is None:
        skip_line(capsys, "C6 validation on real bundle", "PROMPTCARBON_SNAPSHOTS not set; no real bundle")
    bundle, _ = fit_bundle(real_records, seed=0)
    doc = external_validation(bundle, real_records)
    verdict("C6 validation on real bundle", _check_report(doc),
            "arithmetic exact; band flag (informational): " + _band_summary(doc))


# -- 7 ----------------------------------------------------------------------


def random_queries(n, seed):
    rng = np.random.default_rng(seed)
    gpus = ["A100-80GB", "A10G", "H100-80GB", "T4", "L4"]
    out = []
    for _ in range(n):
        out.append(dict(
            model_size_b=float(np.round(rng.uniform(0.5, 450), 3)),
            input_tokens=int(rng.integers(1, 4096)),
            output_tokens=int(rng.integers(1, 2048)),
            prefill_latency_s_per_input_token=float(np.round(rng.uniform(1e-5, 1e-3), 8)),
            decode_latency_s_per_output_token=float(np.round(rng.uniform(1e-3, 0.2), 6)),
            gpu=gpus[int(rng.integers(0, len(gpus)))],
            bbh=float(np.round(rng.uniform(0, 100), 2)),
            mmlu_pro=float(np.round(rng.uniform(0, 100), 2)),
        ))
    return out


def test_c7_end_to_end_determinism(verdict, tmp_path):
    perf_csv, quality_csv = to_tables(make_records(40, seed=5))
    (tmp_path / "perf.csv").write_text(perf_csv)
    (tmp_path / "quality.csv").write_text(quality_csv)
    blobs = []
    for i in range(2):
        ds, b = tmp_path / f"d{i}.json", tmp_path / f"b{i}.json"
        assert main(["ingest", "--perf", str(tmp_path / "perf.csv"), "--quality", str(tmp_path / "quality.csv"),
                     "--out", str(ds)]) == 0
        assert main(["train", "--dataset", str(ds), "--out", str(b), "--seed", "7"]) == 0
        blobs.append(b.read_bytes())
    bundle = load_bundle(tmp_path / "b0.json")
    save_bundle(bundle, tmp_path / "again.json")
    reloaded = load_bundle(tmp_path / "again.json")
    same = sum(estimate_energy(bundle, EstimateQuery(**q)) == estimate_energy(reloaded, EstimateQuery(**q))
               for q in random_queries(100, seed=1))
    ok = blobs[0] == blobs[1] and same == 100
    verdict("C7 end-to-end determinism", ok,
            f"bundles byte-identical: {blobs[0] == blobs[1]} ({len(blobs[0])} bytes); "
            f"round-trip exact on {same}/100 queries")


# -- 8 ----------------------------------------------------------------------


def test_c8_carbon_conversion(verdict):
    def energy(j):
        return EnergyEstimate(j, 0.0, j, RegimeKind.INTERPOLATION, 0.0, 0.0)

    exact = energy_to_carbon(energy(3.6e6), "R", IntensityTable({"R": 500.0}, pue=1.0)).grams_co2e
    rng = np.random.default_rng(8)
    linear = 0
    for _ in range(200):
        e1, e2 = rng.uniform(0, 1e7, 2)
        i1, i2 = rng.uniform(1, 1000, 2)
        c = lambda e, i: energy_to_carbon(energy(e), "R", IntensityTable({"R": i})).grams_co2e  # noqa: E731
        linear += bool(np.isclose(c(e1 + e2, i1), c(e1, i1) + c(e2, i1), rtol=1e-12)
                       and np.isclose(c(e1, i1 + i2), c(e1, i1) + c(e1, i2), rtol=1e-12))
    verdict("C8 carbon conversion", exact == 500.0 and linear == 200,
            f"3.6e6 J @ 500 g/kWh -> {exact!r} g; linear in energy and intensity on {linear}/200 draws")


# -- 9 ----------------------------------------------------------------------


def test_c9_cli_service_parity(verdict, small_bundle, tmp_path, capsys):
    path = tmp_path / "bundle.json"
    save_bundle(small_bundle, path)
    bundle = load_bundle(path)
    srv = make_server(bundle, "127.0.0.1", 0)
    threading.Thread(target=srv.serve_forever, daemon=True).start()
    url = f"http://127.0.0.1:{srv.server_address[1]}/v1/estimate"
    matches = 0
    try:
        for q in random_queries(20, seed=9):
            argv = ["estimate", "--bundle", str(path), "--model-size-b", repr(q["model_size_b"]),
                    "--input-tokens", str(q["input_tokens"]), "--output-tokens", str(q["output_tokens"]),
                    "--lat-prefill-s", repr(q["prefill_latency_s_per_input_token"]),
                    "--lat-decode-s", repr(q["decode_latency_s_per_output_token"]),
                    "--gpu", q["gpu"], "--bbh", repr(q["bbh"]), "--mmlu-pro", repr(q["mmlu_pro"])]
            capsys.readouterr()
            assert main(argv) == 0
            cli_doc = json.loads(capsys.readouterr().out)
            req = urllib.request.Request(url, data=json.dumps(q).encode(), headers={"Content-Type": "application/json"})
            with urllib.request.urlopen(req, timeout=10) as resp:
                http_doc = json.loads(resp.read())
            lib_doc = json.loads(json.dumps(estimate_payload(bundle, q)))
            matches += cli_doc == http_doc == lib_doc
    finally:
        srv.shutdown()
        srv.server_close()
    verdict("C9 CLI/service parity", matches == 20, f"{matches}/20 requests identical via CLI and HTTP")
