import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import ndimage as ndi

from conftest import stripes
from ridgekit.enhance import GaborBank, binarize, build_gabor_bank, frequency_bins, gabor_enhance, gabor_kernel, thin
from ridgekit.ridgefield import FrequencyField, OrientationField, RoiMask

EIGHT = np.ones((3, 3), bool)


@settings(max_examples=50, deadline=None)
@given(st.floats(0, math.pi), st.floats(0.04, 0.33), st.floats(1, 8), st.floats(1, 8), st.integers(1, 12))
def test_kernel_centre_and_symmetry(theta, f, sx, sy, h):
    raw = gabor_kernel(theta, f, sx, sy, h, dc_remove=False)
    assert raw[h, h] == 1.0
    np.testing.assert_array_equal(raw, raw[::-1, ::-1])
    k = gabor_kernel(theta, f, sx, sy, h)
    np.testing.assert_array_equal(k, k[::-1, ::-1])
    assert abs(k.mean()) < 1e-9


def test_kernel_spot_value():
    h = 11
    k = gabor_kernel(0.0, 0.125, 4.0, 4.0, h, dc_remove=False)
    oracle = math.exp(-0.5 * 16 / 16) * math.cos(2 * math.pi * 0.125 * 4)
    assert k[h, h + 4] == pytest.approx(oracle, abs=1e-12)
    assert k[h, h + 4] == pytest.approx(-0.60653, abs=1e-5)


@pytest.mark.parametrize("kw", [dict(freq=0.0), dict(freq=0.5), dict(sigma_x=0.0), dict(h=0)])
def test_kernel_parameter_checks(kw):
    args = dict(theta=0.0, freq=0.1, sigma_x=4.0, sigma_y=4.0, h=11)
    args.update(kw)
    with pytest.raises(ValueError):
        gabor_kernel(**args)


def test_bank_orientations():
    bank = build_gabor_bank(16, [0.1])
    np.testing.assert_allclose(bank.orientations, np.arange(16) * math.pi / 16)


def test_bank_frequency_bins():
    assert list(frequency_bins([0.123, 0.1249])) == [0.12]
    bank = build_gabor_bank(16, [0.08, 0.125])
    assert len(bank.frequencies) == 2 and len(bank) == 32


def test_bank_kernels_zero_mean_and_even():
    bank = build_gabor_bank(8, [0.05, 0.1, 0.2, 0.3])
    for k in bank.kernels.values():
        assert abs(k.mean()) < 1e-9
        np.testing.assert_array_equal(k, k[::-1, ::-1])


def test_bank_errors():
    with pytest.raises(ValueError):
        build_gabor_bank(3, [0.1])
    with pytest.raises(ValueError):
        build_gabor_bank(16, [])


def test_select_nearest_angle():
    bank = GaborBank(np.array([0.0, math.pi / 8]), np.array([0.1]), 4.0, 4.0, 11)
    oi, fi = bank.select(np.array([0.2]), np.array([0.1]))
    assert oi[0] == 1 and fi[0] == 0
    # distances are taken mod pi
    oi, _ = bank.select(np.array([math.pi - 0.01]), np.array([0.1]))
    assert oi[0] == 0


def _fields(shape, theta, f, b=16):
    g = (-(-shape[0] // b), -(-shape[1] // b))
    return (
        OrientationField(b, np.full(g, theta)),
        FrequencyField(b, np.full(g, f), np.ones(g, bool)),
        RoiMask(b, np.ones(g, bool)),
    )


def test_enhance_matched_sinusoid_correlates():
    img = 1.0 - stripes(10, math.pi / 2)  # bright ridges
    field, freq, roi = _fields(img.shape, math.pi / 2, 0.1)
    bank = build_gabor_bank(16, [0.1])
    out = gabor_enhance(img, field, freq, roi, bank)
    r = np.corrcoef(out.ravel(), img.ravel())[0, 1]
    assert r >= 0.95
    assert out.min() >= 0.0 and out.max() <= 1.0


def test_enhance_empty_roi():
    img = stripes(8, 0.3, (64, 64))
    field, freq, roi = _fields(img.shape, 0.3, 0.125)
    roi = RoiMask(16, np.zeros_like(roi.flags))
    out = gabor_enhance(img, field, freq, roi, build_gabor_bank(16, [0.125]))
    assert np.all(out == 0.5)


@settings(max_examples=10, deadline=None)
@given(st.floats(0.1, 10.0), st.floats(0, math.pi), st.floats(6.0, 12.0))
def test_enhance_gain_equivariance(a, theta, period):
    img = stripes(period, theta, (64, 64)) - 0.5
    field, freq, roi = _fields(img.shape, theta, 1 / period)
    roi.flags[0, 0] = False
    bank = build_gabor_bank(16, [1 / period])
    np.testing.assert_allclose(
        gabor_enhance(a * img, field, freq, roi, bank), gabor_enhance(img, field, freq, roi, bank), atol=1e-6
    )


def test_enhance_background_half():
    img = stripes(8, 0.0, (64, 64))
    field, freq, roi = _fields(img.shape, 0.0, 0.125)
    roi.flags[:, 2:] = False
    out = gabor_enhance(img, field, freq, roi, build_gabor_bank(16, [0.125]))
    assert np.all(out[:, 32:] == 0.5)
    assert out[:, :32].std() > 0.1


def test_binarize_rules():
    roi = RoiMask(2, np.array([[True, False]]))
    img = np.array([[0.7, 0.5, 0.9, 0.9], [0.2, 0.5, 1.0, 0.5]])
    np.testing.assert_array_equal(binarize(img, roi), [[True, True, False, False], [False, True, False, False]])


def test_thin_empty():
    assert not thin(np.zeros((10, 10), bool)).any()


def test_thin_bar():
    img = np.zeros((11, 30), bool)
    img[4:7, 5:25] = True
    sk = thin(img)
    # oracle: width one along the bar, one 8-connected piece, inside the bar
    assert sk.any() and not (sk & ~img).any()
    assert sk.sum(axis=0).max() == 1
    assert np.array_equal(np.nonzero(sk.any(axis=1))[0], [5])
    assert ndi.label(sk, EIGHT)[1] == 1


def test_thin_diagonal_fixed_point():
    img = np.zeros((12, 12), bool)
    idx = np.arange(1, 11)
    img[idx, idx] = True
    np.testing.assert_array_equal(thin(img), img)


def no_full_square(sk):
    return not (sk[:-1, :-1] & sk[1:, :-1] & sk[:-1, 1:] & sk[1:, 1:]).any()


def blobs(seed, shape=(48, 48)):
    rng = np.random.default_rng(seed)
    field = ndi.gaussian_filter(rng.random(shape), rng.uniform(1.0, 3.0))
    return field > np.quantile(field, rng.uniform(0.4, 0.8))


def check_skeleton(img):
    sk = thin(img)
    assert not (sk & ~img).any()
    assert no_full_square(sk)
    np.testing.assert_array_equal(thin(sk), sk)
    labels, n = ndi.label(img, EIGHT)
    sizes = np.bincount(labels.ravel())
    for lab in range(1, n + 1):
        if sizes[lab] > 4:
            assert ndi.label(sk & (labels == lab), EIGHT)[1] == 1


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_thin_properties_random_blobs(seed):
    check_skeleton(blobs(seed))


def test_thin_solid_square_and_cross():
    img = np.zeros((20, 20), bool)
    img[3:15, 3:15] = True
    check_skeleton(img)
    img = np.zeros((21, 21), bool)
    img[9:12, :] = True
    img[:, 9:12] = True
    check_skeleton(img)
