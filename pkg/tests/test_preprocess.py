import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mibci.data import FeatureDescriptor, FeatureMatrix
from mibci.preprocess import apply_fir, design_bandpass, segment_epochs, standardize_apply, standardize_fit


@pytest.fixture(scope="module")
def bp():
    return design_bandpass(0.5, 35.0, 250.0, 501)


def _gain(taps, f, fs):
    return abs(sum(h * np.exp(-2j * np.pi * f / fs * n) for n, h in enumerate(taps)))


def test_default_band_edges(bp):
    assert _gain(bp.taps, 0.0, 250.0) < 0.05
    assert _gain(bp.taps, 17.75, 250.0) > 0.9
    assert _gain(bp.taps, 0.9 * 125.0, 250.0) < 0.05
    assert np.allclose(abs(bp.response([0.0, 17.75])), [_gain(bp.taps, 0, 250), _gain(bp.taps, 17.75, 250)])


def test_taps_symmetric_and_odd(bp):
    assert len(bp.taps) % 2 == 1
    assert np.array_equal(bp.taps, bp.taps[::-1])
    assert bp.delay == 250


@pytest.mark.parametrize("lo,hi,n", [(35.0, 0.5, 501), (10.0, 10.0, 501), (0.0, 10.0, 501), (1.0, 200.0, 501), (1.0, 30.0, 500)])
def test_invalid_design(lo, hi, n):
    with pytest.raises(ValueError):
        design_bandpass(lo, hi, 250.0, n)


def test_zero_in_zero_out(bp):
    assert np.array_equal(apply_fir(bp, np.zeros(2000)), np.zeros(2000))


def test_sinusoid_steady_state_amplitude(bp):
    fs, f = 250.0, 10.0
    t = np.arange(5000) / fs
    y = apply_fir(bp, np.sin(2 * np.pi * f * t))
    core = slice(600, 4400)  # away from the zero-padded edges
    A = np.column_stack([np.sin(2 * np.pi * f * t[core]), np.cos(2 * np.pi * f * t[core])])
    coef, *_ = np.linalg.lstsq(A, y[core], rcond=None)
    assert abs(np.hypot(*coef) / _gain(bp.taps, f, fs) - 1) < 0.05


def test_impulse_recovers_taps(bp):
    x = np.zeros(1501)
    x[750] = 1.0
    y = apply_fir(bp, x)
    assert np.allclose(y[750 - bp.delay:750 + bp.delay + 1], bp.taps, atol=1e-15)


def test_output_aligned_same_length(bp):
    x = np.random.default_rng(0).standard_normal((3, 900))
    y = apply_fir(bp, x)
    assert y.shape == x.shape
    assert np.allclose(y[1], apply_fir(bp, x[1]))


def test_short_signal_rejected(bp):
    with pytest.raises(ValueError):
        apply_fir(bp, np.zeros(501))


@given(st.integers(0, 10_000), st.floats(-3, 3), st.floats(-3, 3))
def test_fir_linearity(seed, a, b):
    filt = design_bandpass(1.0, 30.0, 250.0, 101)
    rng = np.random.default_rng(seed)
    x, y = rng.standard_normal((2, 400))
    lhs = apply_fir(filt, a * x + b * y)
    rhs = a * apply_fir(filt, x) + b * apply_fir(filt, y)
    assert np.max(np.abs(lhs - rhs)) <= 1e-9


def test_default_window_has_175_samples():
    x = np.arange(3 * 1000, dtype=float).reshape(3, 1000)
    ep, skipped = segment_epochs(x, [(400, 1, 0)], 250.0)
    assert ep.n_samples == 175 and skipped == 0


def test_event_at_zero_skipped():
    x = np.zeros((2, 1000))
    ep, skipped = segment_epochs(x, [(0, 0, 0), (500, 1, 0)], 250.0)
    assert skipped == 1 and ep.n_epochs == 1


def test_two_events_in_order():
    x = np.random.default_rng(1).standard_normal((2, 1000))
    ep, _ = segment_epochs(x, [(600, 3, 2), (300, 1, 2)], 250.0)
    assert ep.labels.tolist() == [3, 1]
    assert np.array_equal(ep.data[1], x[:, 250:425])


@given(st.lists(st.integers(0, 1200), min_size=1, max_size=6), st.integers(0, 99))
def test_segments_bit_equal_to_slices(onsets, seed):
    x = np.random.default_rng(seed).standard_normal((2, 1200))
    ep, skipped = segment_epochs(x, [(o, 0, 0) for o in onsets], 250.0, 0.2, 0.5)
    inside = [o for o in onsets if o - 50 >= 0 and o + 125 <= 1200]
    assert skipped == len(onsets) - len(inside)
    for k, o in enumerate(inside):
        assert np.array_equal(ep.data[k], x[:, o - 50:o + 125])


def _fm(values):
    values = np.asarray(values, dtype=float)
    desc = [FeatureDescriptor(0, "statistical", f"f{i}") for i in range(values.shape[1])]
    return FeatureMatrix(values, desc, np.arange(values.shape[0]) % 2)


def test_standardize_example_column():
    z = standardize_apply(standardize_fit(_fm([[1.0], [2.0], [3.0]])), _fm([[1.0], [2.0], [3.0]]))
    assert np.allclose(z.values[:, 0], [-1.224744871391589, 0.0, 1.224744871391589], atol=1e-12)


def test_constant_column_maps_to_zero():
    fm = _fm([[0.1, 1.0], [0.1, 2.0], [0.1, 5.0]])
    s = standardize_fit(fm)
    out = standardize_apply(s, fm).values
    assert np.array_equal(out[:, 0], np.zeros(3))
    assert s.stds[0] == 1.0


def test_apply_uses_training_statistics():
    s = standardize_fit(_fm([[0.0], [2.0]]))
    out = standardize_apply(s, _fm([[10.0], [12.0]])).values
    assert np.allclose(out[:, 0], [9.0, 11.0])


def test_column_count_mismatch():
    s = standardize_fit(_fm([[0.0, 1.0], [2.0, 3.0]]))
    with pytest.raises(ValueError):
        standardize_apply(s, _fm([[0.0], [1.0]]))


@given(st.integers(0, 10_000), st.integers(3, 40))
def test_standardize_moments_and_rank_order(seed, n):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, 4)) * rng.uniform(0.01, 100, 4) + rng.uniform(-50, 50, 4)
    Z = standardize_apply(standardize_fit(X), X)
    assert np.all(np.abs(Z.mean(axis=0)) < 1e-9)
    assert np.all(np.abs(Z.std(axis=0) - 1) < 1e-9)
    for j in range(4):
        assert np.array_equal(np.argsort(X[:, j], kind="stable"), np.argsort(Z[:, j], kind="stable"))
