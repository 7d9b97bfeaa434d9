import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import min_max_loop, moving_average_loop
from respnet.rsm import RespiratoryPattern, Waveform, default_templates, generate_waveform
from respnet.signal import (
    DegenerateSignalError,
    PreprocessConfig,
    min_max_normalize,
    moving_average,
    preprocess,
    preprocess_batch,
    resample_linear,
)

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


def signals(min_size=1, max_size=80):
    return arrays(np.float64, st.integers(min_size, max_size), elements=finite)


# ---------------------------------------------------------------- smoothing


def test_linear_sequence_preserved():
    np.testing.assert_allclose(moving_average([1, 2, 3, 4, 5, 6, 7], 5), [1, 2, 3, 4, 5, 6, 7])


def test_edge_windows_by_hand():
    x = [0.0, 0.0, 10.0, 0.0, 0.0, 0.0]
    # spans used: 1, 3, 5, 5, 3, 1
    np.testing.assert_allclose(moving_average(x, 5), [0, 10 / 3, 2, 2, 0, 0])


def test_constant_unchanged():
    np.testing.assert_array_equal(moving_average(np.full(9, 2.5), 5), np.full(9, 2.5))


def test_span_one_identity():
    x = np.random.default_rng(0).normal(size=20)
    np.testing.assert_array_equal(moving_average(x, 1), x)


@pytest.mark.parametrize("span", [2, 4, 0, -1])
def test_bad_span(span):
    with pytest.raises(ValueError):
        moving_average(np.arange(10.0), span)


def test_span_longer_than_signal():
    with pytest.raises(ValueError, match="exceeds"):
        moving_average([1.0, 2.0, 3.0], 5)


@given(x=signals(), span=st.sampled_from([1, 3, 5, 7, 9]))
@settings(max_examples=200)
def test_moving_average_matches_loop(x, span):
    assume(span <= x.size)
    np.testing.assert_allclose(moving_average(x, span), moving_average_loop(list(x), span),
                               rtol=1e-12, atol=1e-9)


# ---------------------------------------------------------------- normalize


def test_normalize_basic():
    np.testing.assert_array_equal(min_max_normalize([1, 3, 5]), [0, 0.5, 1])


def test_normalize_idempotent_example():
    np.testing.assert_array_equal(min_max_normalize([0, 0.5, 1]), [0, 0.5, 1])


def test_normalize_degenerate():
    with pytest.raises(DegenerateSignalError, match="degenerate signal"):
        min_max_normalize([2, 2, 2])


@given(x=signals(min_size=2))
@settings(max_examples=200)
def test_normalize_matches_loop_and_hits_bounds(x):
    assume(x.max() - x.min() > 1e-6)
    y = min_max_normalize(x)
    np.testing.assert_allclose(y, min_max_loop(list(x)), atol=1e-12)
    assert y.min() == 0.0 and y.max() == 1.0


@given(x=signals(min_size=2), alpha=st.floats(1e-2, 1e2), beta=finite)
@settings(max_examples=200)
def test_normalize_affine_invariant(x, alpha, beta):
    assume(x.max() - x.min() > 1e-3)
    np.testing.assert_allclose(min_max_normalize(alpha * x + beta), min_max_normalize(x),
                               atol=1e-9)


@given(x=signals(min_size=2))
@settings(max_examples=100)
def test_normalize_idempotent(x):
    assume(x.max() - x.min() > 1e-6)
    y = min_max_normalize(x)
    np.testing.assert_allclose(min_max_normalize(y), y, atol=1e-12)


# ---------------------------------------------------------------- resample


def test_resample_midpoint():
    np.testing.assert_allclose(resample_linear([0.0, 1.0], 3), [0, 0.5, 1])


def test_resample_same_length_identity():
    x = np.random.default_rng(1).normal(size=50)
    np.testing.assert_array_equal(resample_linear(x, 50), x)


def test_resample_ramp_stays_linear():
    ramp = np.linspace(-3.0, 7.0, 601)
    out = resample_linear(ramp, 600)
    np.testing.assert_allclose(out, np.linspace(-3.0, 7.0, 600), atol=1e-12)


def test_resample_accepts_waveform():
    w = Waveform(np.array([0.0, 2.0, 4.0]), 10.0)
    np.testing.assert_allclose(resample_linear(w, 5), [0, 1, 2, 3, 4])


@given(x=signals(min_size=2), n=st.integers(2, 200))
@settings(max_examples=100)
def test_resample_endpoints_and_range(x, n):
    y = resample_linear(x, n)
    assert y.size == n
    assert y[0] == x[0] and y[-1] == pytest.approx(x[-1], abs=1e-9)
    assert x.min() - 1e-9 <= y.min() and y.max() <= x.max() + 1e-9


def test_resample_too_short():
    with pytest.raises(ValueError):
        resample_linear([1.0], 5)
    with pytest.raises(ValueError):
        resample_linear([1.0, 2.0], 1)


# ---------------------------------------------------------------- pipeline


def test_preprocess_simulated_window():
    lw = generate_waveform(default_templates()[RespiratoryPattern.EUPNEA], np.random.default_rng(0))
    y = preprocess(lw.waveform)
    assert y.shape == (600,)
    assert y.min() == 0.0 and y.max() == 1.0


def test_preprocess_resamples_other_lengths():
    t = np.arange(432) / 7.2
    y = preprocess(Waveform(np.sin(t), 7.2))
    assert y.shape == (600,)


def test_preprocess_order_smooth_resample_normalize():
    x = np.random.default_rng(3).normal(size=300)
    cfg = PreprocessConfig(smooth_span=5, target_len=450)
    expected = min_max_normalize(resample_linear(moving_average(x, 5), 450))
    np.testing.assert_array_equal(preprocess(x, cfg), expected)


def test_preprocess_without_normalize():
    x = np.linspace(2.0, 4.0, 600)
    y = preprocess(x, PreprocessConfig(normalize=False))
    np.testing.assert_allclose(y, x, atol=1e-12)


def test_preprocess_constant_rejected():
    with pytest.raises(DegenerateSignalError):
        preprocess(np.full(600, 0.3))


def test_preprocess_deterministic_batch():
    rng = np.random.default_rng(5)
    waves = [rng.normal(size=600) for _ in range(3)]
    a, b = preprocess_batch(waves), preprocess_batch(waves)
    assert a.shape == (3, 600)
    np.testing.assert_array_equal(a, b)


@pytest.mark.parametrize("kwargs", [{"smooth_span": 4}, {"smooth_span": 0}, {"target_len": 1}])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        PreprocessConfig(**kwargs)
