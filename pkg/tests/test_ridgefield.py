import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import ndimage as ndi

from conftest import stripes
from ridgekit.exceptions import FrequencyEstimationError
from ridgekit.imgio import normalize
from ridgekit.ridgefield import (
    F_MAX,
    F_MIN,
    FrequencyField,
    OrientationField,
    RoiMask,
    angle_diff_pi,
    estimate_frequency,
    estimate_orientation,
    grid_shape,
    interpolate_frequency,
    read_grid,
    segment_roi,
    smooth_orientation,
    trimmed_mean,
    write_grid,
)


def full_roi(shape, b=16):
    return RoiMask(b, np.ones(grid_shape(shape, b), dtype=bool))


def test_grid_shape_ceil():
    assert grid_shape((256, 256), 16) == (16, 16)
    assert grid_shape((100, 33), 16) == (7, 3)


def test_roi_constant_is_background():
    assert not segment_roi(np.full((64, 64), 0.5)).flags.any()


def test_roi_half_stripes():
    img = stripes(8, math.pi / 2, (128, 256))
    img[:, 128:] = 0.5
    img = normalize(img)
    roi = segment_roi(img, 16, 0.05)
    # oracle: block-mean of the Sobel magnitude, computed independently
    gx = ndi.convolve(img, np.array([[1, 0, -1], [2, 0, -2], [1, 0, -1]]) / 8.0, mode="nearest")
    gy = ndi.convolve(img, np.array([[1, 2, 1], [0, 0, 0], [-1, -2, -1]]) / 8.0, mode="nearest")
    mag = np.hypot(gx, gy).reshape(8, 16, 16, 16).mean(axis=(1, 3))
    np.testing.assert_array_equal(roi.flags, mag >= 0.05)
    assert roi.flags[:, :8].all() and not roi.flags[:, 8:].any()


def test_roi_isolated_block_demoted():
    img = np.full((64, 64), 0.5)
    img[16:32, 16:32] = stripes(6, 0.0, (16, 16))
    # the patch block alone passes the threshold; demotion removes it
    assert segment_roi(img, 16, 0.05).flags.sum() == 0


def test_orientation_vertical_stripes():
    field = estimate_orientation(normalize(stripes(8, math.pi / 2)), 16)
    assert np.all(angle_diff_pi(field.angles, math.pi / 2) <= 0.05)


def test_orientation_rotated_30():
    # vertical ridges turned 30 degrees counter-clockwise on screen
    field = estimate_orientation(normalize(stripes(8, math.pi / 2 - math.radians(30))), 16)
    inner = field.angles[2:-2, 2:-2]
    assert np.all(angle_diff_pi(inner, math.pi / 2 - math.radians(30)) <= 0.05)


def test_orientation_constant_zero():
    assert not estimate_orientation(np.full((48, 48), 0.3)).angles.any()


def test_orientation_range(rng):
    a = estimate_orientation(rng.random((80, 80)), 8).angles
    assert np.all((a >= 0) & (a < math.pi))


@settings(max_examples=25, deadline=None)
@given(st.floats(0, math.pi), st.floats(-math.pi / 2, math.pi / 2), st.floats(6.0, 12.0))
def test_orientation_rotation_equivariance(theta, alpha, period):
    img = stripes(period, theta, (192, 192))
    rot = ndi.rotate(img, math.degrees(alpha), reshape=False, order=3, mode="reflect")
    a0 = estimate_orientation(img, 16).angles[2:-2, 2:-2]
    a1 = estimate_orientation(rot, 16).angles[2:-2, 2:-2]
    # ndimage rotates counter-clockwise on screen, i.e. by -alpha in the y-down frame
    assert np.all(angle_diff_pi(a1, a0 - alpha) <= 0.05)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.1, 10.0), st.floats(-5.0, 5.0), st.integers(0, 2**31))
def test_orientation_affine_intensity_invariance(a, c, seed):
    img = np.random.default_rng(seed).random((64, 64))
    np.testing.assert_allclose(
        estimate_orientation(a * img + c, 16).angles, estimate_orientation(img, 16).angles, atol=1e-9
    )


def test_smooth_window_one_identity(rng):
    f = OrientationField(16, rng.uniform(0, math.pi, (5, 5)))
    np.testing.assert_array_equal(smooth_orientation(f, 1).angles, f.angles)


@settings(max_examples=40, deadline=None)
@given(st.floats(0, math.pi, exclude_max=True), st.integers(1, 8), st.integers(1, 8), st.sampled_from([1, 3, 5]))
def test_smooth_uniform_fixed_point(theta, rows, cols, window):
    f = OrientationField(16, np.full((rows, cols), theta))
    np.testing.assert_array_equal(smooth_orientation(f, window).angles, f.angles)


def test_smooth_center_example():
    angles = np.full((3, 3), math.pi / 2 + 0.1)
    angles[1, 1] = math.pi / 2 - 0.1
    out = smooth_orientation(OrientationField(16, angles), 3).angles[1, 1]
    # oracle: doubled-angle vector average of the nine entries
    s = sum(math.sin(2 * a) for a in angles.ravel())
    c = sum(math.cos(2 * a) for a in angles.ravel())
    oracle = (0.5 * math.atan2(s, c)) % math.pi
    assert out == pytest.approx(oracle, abs=1e-12)
    assert out == pytest.approx(math.pi / 2 + 0.0781881, abs=1e-7)


def test_smooth_rejects_even_window():
    with pytest.raises(ValueError):
        smooth_orientation(OrientationField(16, np.zeros((3, 3))), 2)


def test_trimmed_mean():
    assert trimmed_mean([1, 2, 3, 100], 1) == 2.5
    assert trimmed_mean([4.0, 6.0], 1) == 5.0
    assert trimmed_mean([7.0], 1) == 7.0


def _freq(img, theta, b=16):
    img = normalize(img)
    field = OrientationField(b, np.full(grid_shape(img.shape, b), theta))
    roi = segment_roi(img, b)
    return estimate_frequency(img, field, roi, b), roi


@pytest.mark.parametrize("period", [8, 12])
def test_frequency_sinusoid(period):
    raw, roi = _freq(stripes(period, math.pi / 2), math.pi / 2)
    assert raw.valid.any()
    assert np.all(np.abs(raw.freqs[raw.valid] - 1 / period) <= 0.05 / period)
    full = interpolate_frequency(raw, roi)
    assert np.all(np.abs(full.freqs[roi.flags] - 1 / period) <= 0.05 / period)


def test_frequency_constant_block_invalid():
    img = np.full((64, 64), 0.5)
    field = OrientationField(16, np.zeros((4, 4)))
    out = estimate_frequency(img, field, full_roi(img.shape), 16)
    assert not out.valid.any() and not out.freqs.any()


def test_frequency_translation_by_blocks():
    img = stripes(9, 1.0, (224, 224))
    moved = stripes(9, 1.0, (224, 224), phase=2 * math.pi * (16 * -math.sin(1.0) + 16 * math.cos(1.0)) / 9)
    a, _ = _freq(img, 1.0)
    b_, _ = _freq(moved, 1.0)
    both = a.valid[2:-3, 2:-3] & b_.valid[3:-2, 3:-2]
    assert both.sum() > 50
    ratio = b_.freqs[3:-2, 3:-2][both] / a.freqs[2:-3, 2:-3][both]
    assert np.all(np.abs(ratio - 1) <= 0.02)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31), st.floats(3.5, 20.0))
def test_frequency_bounds_on_valid_blocks(seed, period):
    rng = np.random.default_rng(seed)
    img = np.clip(stripes(period, rng.uniform(0, math.pi), (96, 96)) + rng.normal(0, 0.2, (96, 96)), 0, 1)
    img = normalize(img)
    field = estimate_orientation(img, 16)
    out = estimate_frequency(img, field, full_roi(img.shape), 16)
    v = out.freqs[out.valid]
    assert np.all((v >= F_MIN) & (v <= F_MAX))
    assert not out.freqs[~out.valid].any()


def test_frequency_argument_checks():
    img = np.zeros((64, 64))
    f = OrientationField(16, np.zeros((4, 4)))
    with pytest.raises(ValueError):
        estimate_frequency(img, f, full_roi(img.shape), 16, S=4, trim=2)
    with pytest.raises(ValueError):
        estimate_frequency(img, OrientationField(16, np.zeros((3, 4))), full_roi(img.shape), 16)


def _field(freqs, valid):
    return FrequencyField(16, np.array(freqs, float), np.array(valid, bool))


def test_interpolate_identity():
    f = _field(np.full((3, 3), 0.1), np.ones((3, 3)))
    out = interpolate_frequency(f, full_roi((48, 48)))
    np.testing.assert_array_equal(out.freqs, f.freqs)


def test_interpolate_constant_neighbourhood():
    freqs = np.full((3, 3), 0.125)
    valid = np.ones((3, 3), bool)
    freqs[1, 1], valid[1, 1] = 0.0, False
    out = interpolate_frequency(_field(freqs, valid), full_roi((48, 48)))
    assert out.freqs[1, 1] == 0.125 and out.valid.all()


def test_interpolate_two_neighbour_mean():
    out = interpolate_frequency(_field([[0.10, 0.0, 0.14]], [[1, 0, 1]]), full_roi((16, 48)))
    assert out.freqs[0, 1] == pytest.approx(0.12, abs=1e-12)


def test_interpolate_expands_radius():
    freqs = np.zeros((5, 5))
    valid = np.zeros((5, 5), bool)
    freqs[0, 0], valid[0, 0] = 0.1, True
    out = interpolate_frequency(_field(freqs, valid), full_roi((80, 80)))
    assert np.all(out.freqs == 0.1)


def test_interpolate_failure():
    with pytest.raises(FrequencyEstimationError, match="frequency estimation failed"):
        interpolate_frequency(_field(np.zeros((2, 2)), np.zeros((2, 2))), full_roi((32, 32)))


def test_grid_dump_round_trip(tmp_path, rng):
    values = rng.random((4, 6))
    write_grid(tmp_path / "g.txt", values, 16, "frequency", "config=abc")
    back, b = read_grid(tmp_path / "g.txt")
    assert b == 16
    np.testing.assert_allclose(back, values, atol=1e-6)
    assert (tmp_path / "g.txt").read_text().startswith("# frequency b=16 rows=4 cols=6")
