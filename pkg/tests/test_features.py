import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from promptcarbon.features import (
    CONTINUOUS_FEATURES,
    FeatureError,
    FeatureVector,
    GpuVocabulary,
    PhaseKind,
    apply_scaler,
    build_gpu_vocabulary,
    continuous_mask,
    encode,
    encoded_width,
    extract_features,
    fit_scaler,
    regime_split,
)
from promptcarbon.ingest import MergedRecord, PerfRecord, QualityRecord, canonical_key


def rec(size=7.0, pe=2.0, de=4.0, gpu="A100", nin=256.0, nout=64.0, name=None):
    name = name or f"m-{size}-{gpu}"
    p = PerfRecord(name, "float16", gpu, 0.001, 0.03, pe, de, size, nin, nout)
    return MergedRecord(canonical_key(name, "float16"), p, QualityRecord(name, "float16", 50.0, 40.0, {}))


def fv(gpu="A", **kw):
    base = dict(input_tokens=38, output_tokens=64, model_size_b=7, phase_latency_s_per_token=0.01,
                gpu=gpu, bbh=50, mmlu_pro=40)
    base.update(kw)
    return FeatureVector(**base)


def test_extract_prefill_target_and_latency():
    f, t = extract_features(rec(), PhaseKind.PREFILL)
    assert t == 2.0 and f.phase_latency_s_per_token == 0.001


def test_extract_decode_target_and_latency():
    f, t = extract_features(rec(), PhaseKind.DECODE)
    assert t == 4.0 and f.phase_latency_s_per_token == 0.03


def test_extract_token_counts():
    f, _ = extract_features(rec(nin=256, nout=64), "prefill")
    assert (f.input_tokens, f.output_tokens) == (256, 64)


def test_seven_features():
    f, _ = extract_features(rec(), PhaseKind.DECODE)
    assert len(f.continuous()) + 1 == 7 == len(CONTINUOUS_FEATURES) + 1


@given(st.floats(0.01, 100), st.floats(0.01, 100))
def test_phase_dispatch_sums_targets(pe, de):
    r = rec(pe=pe, de=de)
    assert extract_features(r, "prefill")[1] + extract_features(r, "decode")[1] == pe + de


def test_vocabulary_sorted_distinct():
    assert build_gpu_vocabulary(["B", "A", "A"]).labels == ("A", "B")
    assert build_gpu_vocabulary(["X"]).labels == ("X",)
    with pytest.raises(FeatureError):
        build_gpu_vocabulary([])


def test_unknown_gpu_goes_to_reserved_slot():
    v = GpuVocabulary(("A", "B"))
    assert list(encode(fv("B"), v)[-3:]) == [0, 1, 0]
    assert list(encode(fv("C"), v)[-3:]) == [0, 0, 1]


@given(st.integers(1, 12))
def test_encoded_width(k):
    v = GpuVocabulary(tuple(f"g{i}" for i in range(k)))
    row = encode(fv("g0"), v)
    assert row.size == encoded_width(v) == 6 + k + 1
    assert row[6:].sum() == 1


@given(st.lists(st.floats(0, 1e3), min_size=6, max_size=6), st.lists(st.floats(0, 1e3), min_size=6, max_size=6),
       st.sampled_from(["A", "B"]), st.sampled_from(["A", "B"]))
def test_encoding_injective(c1, c2, g1, g2):
    v = GpuVocabulary(("A", "B"))
    names = CONTINUOUS_FEATURES
    a = fv(g1, **dict(zip(names, c1)))
    b = fv(g2, **dict(zip(names, c2)))
    if (c1, g1) != (c2, g2):
        assert not np.array_equal(encode(a, v), encode(b, v))


def test_scaler_two_point_column():
    s = fit_scaler([[1.0], [3.0]], [True])
    assert s.mean == (2.0,) and s.std == (1.0,)
    assert apply_scaler([[1.0], [3.0]], s).ravel().tolist() == [-1.0, 1.0]


def test_scaler_constant_column_passthrough_flagged():
    s = fit_scaler([[5.0], [5.0], [5.0]], [True])
    assert s.scaled == (False,) and s.flagged_constant == (0,)
    assert apply_scaler([[5.0], [7.0]], s).ravel().tolist() == [5.0, 7.0]


def test_scaler_needs_two_rows():
    with pytest.raises(FeatureError):
        fit_scaler([[1.0]], [True])


@settings(max_examples=50)
@given(st.integers(2, 40), st.integers(0, 2**16))
def test_scaler_round_trip(n, seed):
    rng = np.random.default_rng(seed)
    vocab = GpuVocabulary(("A", "B"))
    X = np.zeros((n, encoded_width(vocab)))
    X[:, :6] = rng.normal(size=(n, 6)) * rng.uniform(0.1, 100, 6) + rng.uniform(-50, 50, 6)
    X[np.arange(n), 6 + rng.integers(0, 2, n)] = 1
    s = fit_scaler(X, continuous_mask(vocab))
    Z = apply_scaler(X, s)
    cols = np.array(s.scaled)
    assert np.all(np.abs(Z[:, cols].mean(axis=0)) <= 1e-9)
    assert np.all(np.abs(Z[:, cols].std(axis=0) - 1) <= 1e-9)
    np.testing.assert_array_equal(Z[:, 6:], X[:, 6:])


def test_regime_split_quantile_examples():
    rs = [rec(size=s) for s in [1, 2, 3, 4, 5]]
    train, test = regime_split(rs, 0.8)
    assert [r.perf.model_size_b for r in test] == [5]
    assert [r.perf.model_size_b for r in train] == [1, 2, 3, 4]
    train, test = regime_split([rec(size=s) for s in [1, 2, 3, 4]], 0.5)
    assert [r.perf.model_size_b for r in test] == [3, 4]


def test_regime_split_degenerate():
    with pytest.raises(FeatureError):
        regime_split([rec(size=7), rec(size=7, gpu="B")], 0.5)
    with pytest.raises(FeatureError):
        regime_split([rec(size=1), rec(size=2)], 1.0)


@given(st.lists(st.integers(1, 30), min_size=2, max_size=30), st.floats(0.05, 0.95))
def test_regime_split_partition(sizes, q):
    rs = [rec(size=float(s), name=f"m{i}") for i, s in enumerate(sizes)]
    try:
        train, test = regime_split(rs, q)
    except FeatureError:
        return
    assert len(train) + len(test) == len(rs)
    assert {id(r) for r in train}.isdisjoint({id(r) for r in test})
    assert max(r.perf.model_size_b for r in train) < min(r.perf.model_size_b for r in test)
