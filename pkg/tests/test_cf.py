import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ibccf import cf, oracles
from ibccf.errors import ParameterError
from ibccf.features import FeatureMap
from ibccf.geometry import Side, gaussian_label_1d, gaussian_label_2d


def _label(r, c):
    return gaussian_label_2d(r, c, 0.1 * r + 0.5, 0.1 * c + 0.5).values


def test_impulse_gives_label_back():
    x = np.zeros((1, 6, 5))
    x[0, 0, 0] = 1.0
    y = _label(6, 5)
    w = cf.train_center_filter(x, y, lam=0.0).spatial()
    np.testing.assert_allclose(w[0], y, rtol=0, atol=1e-15)


def test_impulse_with_asymmetric_label_gives_reflection(rng):
    # correlation with an impulse at the origin reads the filter backwards
    x = np.zeros((1, 4, 7))
    x[0, 0, 0] = 1.0
    y = rng.standard_normal((4, 7))
    w = cf.train_center_filter(x, y, lam=0.0).spatial()[0]
    reflected = np.roll(y[::-1, ::-1], (1, 1), axis=(0, 1))
    np.testing.assert_allclose(w, reflected, atol=1e-14)


def test_default_lambda():
    assert cf.train_center_filter(np.ones((1, 2, 2)), np.ones((2, 2))).lam == 1e-4


def test_center_matches_dense_oracle_8x8(rng):
    x = rng.standard_normal((8, 8))
    y = _label(8, 8)
    w = cf.train_center_filter(x, y, 1e-4).spatial()
    ref = oracles.dense_ridge(x[None], y, 1e-4)
    assert np.abs(w - ref).max() <= 1e-8


@settings(max_examples=15, deadline=None)
@given(st.integers(1, 3), st.integers(1, 8), st.integers(1, 8), st.integers(0, 2 ** 32 - 1))
def test_center_matches_dense_oracle_property(ch, r, c, seed):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((ch, r, c))
    y = _label(r, c)
    f = cf.train_center_filter(x, y, 1e-3)
    assert np.abs(f.spatial() - oracles.dense_ridge(x, y, 1e-3)).max() <= 1e-8
    assert np.all(f.denominator_freq.real >= 1e-3)
    assert np.abs(np.fft.ifftn(f.coeffs_freq, axes=(1, 2)).imag).max() <= 1e-8


def test_ridge_with_prior_matches_dense(rng):
    x = rng.standard_normal((3, 5, 4))
    y = _label(5, 4)
    prior = rng.standard_normal(x.shape)
    wf = cf.solve_ridge_freq(cf.fft_nd(x, 2), cf.fft_nd(y, 2), 1e-2, cf.fft_nd(prior, 2), 0.7)
    ref = oracles.dense_ridge(x, y, 1e-2, prior, 0.7)
    assert np.abs(cf.real_ifft(wf, 2) - ref).max() <= 1e-10


def test_correlation_matches_loop(rng):
    w = rng.standard_normal((2, 4, 5))
    x = rng.standard_normal((2, 4, 5))
    fast = cf.real_ifft(cf.correlate_freq(cf.fft_nd(w, 2), cf.fft_nd(x, 2), 2), 2)
    np.testing.assert_allclose(fast, oracles.correlation_loop(w, x, 2), atol=1e-12)


def test_parseval_inner_product(rng):
    a = rng.standard_normal((3, 6, 6))
    b = rng.standard_normal((3, 6, 6))
    freq = np.vdot(cf.fft_nd(a, 2), cf.fft_nd(b, 2)).real / 36
    assert abs(freq - float((a * b).sum())) <= 1e-8


def test_detect_on_training_patch_peaks_at_label(rng):
    x = FeatureMap(rng.standard_normal((3, 12, 10)))
    f = cf.train_center_filter(x, _label(12, 10), 1e-4)
    resp = cf.detect_center(f, x)
    assert resp.peak == (0, 0) and resp.displacement == (0, 0)


@pytest.mark.parametrize("shift", [(2, -3), (-5, 4), (6, 0)])
def test_detect_follows_circular_shift(rng, shift):
    x = rng.standard_normal((2, 12, 10))
    f = cf.train_center_filter(x, _label(12, 10), 1e-4)
    moved = np.roll(x, shift, axis=(1, 2))
    assert cf.detect_center(f, moved).displacement == shift


def test_detect_zero_features():
    f = cf.train_center_filter(np.ones((1, 4, 4)), _label(4, 4))
    resp = cf.detect_center(f, np.zeros((1, 4, 4)))
    assert np.all(resp.values == 0)


def test_detect_shape_mismatch():
    f = cf.train_center_filter(np.ones((1, 4, 4)), _label(4, 4))
    with pytest.raises(ParameterError):
        cf.detect_center(f, np.zeros((1, 4, 5)))


def test_unwrap_index():
    assert [cf.unwrap_index(i, 6) for i in range(6)] == [0, 1, 2, 3, -2, -1]
    assert [cf.unwrap_index(i, 5) for i in range(5)] == [0, 1, 2, -2, -1]


def test_boundary_impulse_identity():
    x = np.zeros((1, 1, 9))
    x[0, 0, 0] = 1.0
    y = gaussian_label_1d(9, 1.5).values
    w = cf.train_boundary_filter(x, y, lam=0.0).spatial()
    np.testing.assert_allclose(w[0, 0], y, atol=1e-15)


def test_boundary_matches_dense_oracle(rng):
    x = rng.standard_normal((3, 16))
    y = gaussian_label_1d(16, 1.0).values
    f = cf.train_boundary_filter(x, y, 1e-4)
    ref = oracles.dense_ridge(x, y, 1e-4)
    assert np.abs(f.spatial()[0] - ref).max() <= 1e-8
    # one denominator for all channels
    assert f.shared_denominator_freq.shape == (16,)


def test_boundary_identical_channels_identical_filters(rng):
    row = rng.standard_normal(12)
    f = cf.train_boundary_filter(np.stack([row, row]), gaussian_label_1d(12, 1.0).values)
    w = f.spatial()[0]
    np.testing.assert_allclose(w[0], w[1], atol=1e-15)


def test_boundary_detect_training_and_shift(rng):
    x = rng.standard_normal((2, 3, 20))
    f = cf.train_boundary_filter(x, gaussian_label_1d(20, 1.0).values, 1e-4, Side.TOP)
    assert cf.detect_boundary(f, x).displacement == (0,)
    assert cf.detect_boundary(f, np.roll(x, -3, axis=-1)).displacement == (-3,)
    assert np.all(cf.detect_boundary(f, np.zeros_like(x)).values == 0)


def test_update_model_endpoints_and_midpoint(rng):
    y = _label(4, 4)
    a = cf.train_center_filter(rng.standard_normal((2, 4, 4)), y)
    b = cf.train_center_filter(rng.standard_normal((2, 4, 4)), y)
    assert cf.update_model(a, b, 0.0) is a
    assert cf.update_model(a, b, 1.0) is b
    m = cf.update_model(a, b, 0.5)
    np.testing.assert_allclose(m.numerator_freq, (a.numerator_freq + b.numerator_freq) / 2, atol=1e-15)
    np.testing.assert_allclose(m.denominator_freq, (a.denominator_freq + b.denominator_freq) / 2, atol=1e-15)
    np.testing.assert_allclose(m.coeffs_freq, m.numerator_freq / m.denominator_freq)


def test_update_model_rejects_bad_eta():
    f = cf.train_center_filter(np.ones((1, 2, 2)), np.ones((2, 2)))
    with pytest.raises(ParameterError):
        cf.update_model(f, f, 1.5)


def test_coeff_wrappers_keep_ratio(rng):
    x = rng.standard_normal((2, 5, 5))
    xf = cf.fft_nd(x, 2)
    c = cf.fft_nd(rng.standard_normal(x.shape), 2)
    f = cf.center_filter_from_coeffs(xf, c, 1e-3)
    np.testing.assert_allclose(f.numerator_freq / f.denominator_freq, c, atol=1e-12)
