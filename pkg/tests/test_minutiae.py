import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ridgekit.enhance import thin
from ridgekit.minutiae import (
    BIFURCATION,
    ENDING,
    Minutia,
    MinutiaList,
    QualityMask,
    compute_quality_mask,
    crossing_transitions,
    extract_minutiae,
    minutia_direction,
    read_minutiae,
    remove_false_minutiae,
    write_minutiae,
)
from ridgekit.exceptions import CodeFormatError
from ridgekit.pipeline import process_image
from ridgekit.ridgefield import FrequencyField, OrientationField, RoiMask
from ridgekit.synth import random_finger, generate


def brute_transitions(ring):
    """Boundary (0, 1) pairs walking the closed 8-cycle."""
    count = 0
    for k in range(8):
        a, b = ring[k], ring[(k + 1) % 8]
        if (a, b) == (0, 1):
            count += 1
    return count


def test_crossing_oracle_all_256():
    for code in range(256):
        ring = [(code >> k) & 1 for k in range(8)]
        assert crossing_transitions(ring) == brute_transitions(ring)


@settings(max_examples=100)
@given(st.lists(st.booleans(), min_size=8, max_size=8), st.integers(0, 7))
def test_crossing_rotation_invariant(ring, k):
    assert crossing_transitions(ring) == crossing_transitions(ring[k:] + ring[:k])


def test_crossing_examples():
    assert crossing_transitions([1, 1, 1, 0, 0, 0, 0, 0]) == 1
    assert crossing_transitions([1, 0, 1, 0, 0, 1, 0, 0]) == 3
    assert crossing_transitions([0] * 8) == 0
    with pytest.raises(ValueError):
        crossing_transitions([0] * 7)


def _grids(shape, b=16):
    return tuple(-(-s // b) for s in shape)


def ok_mask(shape, b=16):
    return QualityMask(b, np.ones(_grids(shape, b), bool))


def test_quality_uniform_all_ok():
    g = (4, 5)
    q = compute_quality_mask(
        OrientationField(16, np.full(g, 0.7)), FrequencyField(16, np.full(g, 0.1), np.ones(g, bool)), RoiMask(16, np.ones(g, bool))
    )
    assert q.ok.all()


def test_quality_curvature_threshold():
    g = (3, 3)
    angles = np.zeros(g)
    angles[1, 1] = math.pi / 2
    q = compute_quality_mask(
        OrientationField(16, angles), FrequencyField(16, np.full(g, 0.1), np.ones(g, bool)), RoiMask(16, np.ones(g, bool))
    )
    assert not q.ok[1, 1] and not q.ok[0, 1] and q.ok[0, 0]


def test_quality_checkerboard_frequency():
    g = (4, 4)
    valid = (np.indices(g).sum(axis=0) % 2) == 0
    q = compute_quality_mask(
        OrientationField(16, np.zeros(g)), FrequencyField(16, np.where(valid, 0.1, 0), valid), RoiMask(16, np.ones(g, bool))
    )
    np.testing.assert_array_equal(q.ok, valid)


def test_quality_implies_roi_and_valid(rng):
    g = (6, 6)
    roi = rng.random(g) > 0.3
    valid = rng.random(g) > 0.3
    q = compute_quality_mask(
        OrientationField(16, rng.uniform(0, math.pi, g)), FrequencyField(16, np.full(g, 0.1), valid), RoiMask(16, roi)
    )
    assert not (q.ok & ~(roi & valid)).any()


def hline(shape=(40, 40), row=20, c0=10, c1=19):
    sk = np.zeros(shape, bool)
    sk[row, c0 : c1 + 1] = True
    return sk


def test_line_interior_has_no_minutiae():
    sk = hline(c0=5, c1=34)
    ml = extract_minutiae(sk, ok_mask(sk.shape))
    assert sorted(ml.x.tolist()) == [5.0, 34.0]


def test_line_of_ten_gives_two_endings():
    sk = hline()
    ml = extract_minutiae(sk, ok_mask(sk.shape))
    assert len(ml) == 2 and ml.kind == [ENDING, ENDING]
    assert [(m.x, m.y) for m in ml] == [(10.0, 20.0), (19.0, 20.0)]


def y_shape(arm=10, shape=(48, 48), r=20, c=24):
    sk = np.zeros(shape, bool)
    sk[r, c] = True
    for k in range(1, arm + 1):
        sk[r - k, c - k] = True
        sk[r - k, c + k] = True
        sk[r + k, c] = True
    return sk


def test_y_junction():
    sk = y_shape()
    ml = extract_minutiae(sk, ok_mask(sk.shape))
    kinds = {(m.x, m.y): m.kind for m in ml}
    assert kinds == {(24.0, 20.0): BIFURCATION, (14.0, 10.0): ENDING, (34.0, 10.0): ENDING, (24.0, 30.0): ENDING}
    # detector order is row-major
    assert [m.y for m in ml] == sorted(m.y for m in ml)


def test_direction_line_tips():
    sk = hline()
    assert minutia_direction(sk, 19, 20, ENDING) == pytest.approx(math.pi)
    assert minutia_direction(sk, 10, 20, ENDING) == pytest.approx(0.0)


def test_direction_y():
    # branch displacements (-10,-10), (10,-10), (0,10) sum to (0,-10); the opposite points to +y
    assert minutia_direction(y_shape(), 24, 20, BIFURCATION) == pytest.approx(math.pi / 2)


def test_direction_short_branch():
    sk = np.zeros((10, 10), bool)
    sk[5, 5:7] = True
    assert minutia_direction(sk, 5, 5, ENDING) == pytest.approx(0.0)
    assert minutia_direction(sk, 6, 5, ENDING) == pytest.approx(math.pi)


def test_direction_follows_staircase():
    # a ridge climbing two rows per column with "##" steps; the walk must not
    # dead-end on the 4-neighbour of each step
    sk = np.zeros((40, 40), bool)
    path = []
    r, c = 30, 10
    for _ in range(5):
        path += [(r, c), (r - 1, c), (r - 2, c), (r - 2, c + 1)]
        r, c = r - 3, c + 2
    for p in path:
        sk[p] = True
    theta = minutia_direction(sk, 10, 30, ENDING, trace_len=10)
    # ten steps end at (22, 14): displacement (4, -8)
    assert theta == pytest.approx(math.atan2(-8, 4) % (2 * math.pi))


def test_direction_range(rng):
    for _ in range(20):
        sk = thin(rng.random((40, 40)) > 0.5)
        ml = extract_minutiae(sk, ok_mask(sk.shape))
        assert np.all((ml.theta >= 0) & (ml.theta < 2 * math.pi))


def test_remove_empty():
    sk = np.zeros((40, 40), bool)
    assert len(remove_false_minutiae(MinutiaList.empty(), sk, ok_mask(sk.shape))) == 0


def test_remove_broken_ridge_pair():
    sk = np.zeros((64, 96), bool)
    sk[32, 10:31] = True
    sk[32, 34:80] = True
    q = ok_mask(sk.shape)
    ml = extract_minutiae(sk, q)
    assert {(m.x, m.kind) for m in ml} >= {(30.0, ENDING), (34.0, ENDING)}
    kept = remove_false_minutiae(ml, sk, q, d_min=8)
    assert not {30.0, 34.0} & set(kept.x.tolist())


def test_remove_keeps_lone_genuine_ending():
    sk = np.zeros((100, 128), bool)
    sk[50, 40:100] = True
    q = ok_mask(sk.shape)
    ml = MinutiaList.from_minutiae([Minutia(40.0, 50.0, 0.0, ENDING)])
    kept = remove_false_minutiae(ml, sk, q)
    assert len(kept) == 1


def test_remove_mask_border():
    sk = np.zeros((64, 64), bool)
    sk[20, 20:60] = True
    q = ok_mask(sk.shape)
    q.ok[:, 3] = False  # pixels 48..63 not ok
    ml = MinutiaList.from_minutiae([Minutia(20.0, 20.0, 0.0, ENDING), Minutia(42.0, 20.0, 0.0, ENDING)])
    kept = remove_false_minutiae(ml, sk, q, border=8)
    assert kept.x.tolist() == [20.0]


def test_remove_spur():
    sk = np.zeros((64, 64), bool)
    sk[32, 10:54] = True
    sk[27:32, 30] = True  # 5-px spur
    q = ok_mask(sk.shape)
    ml = extract_minutiae(sk, q)
    kept = remove_false_minutiae(ml, sk, q)
    assert (30.0, 27.0) in {(m.x, m.y) for m in ml}
    assert (30.0, 27.0) not in {(m.x, m.y) for m in kept}


def test_remove_rejects_even_window():
    sk = np.zeros((40, 40), bool)
    with pytest.raises(ValueError):
        remove_false_minutiae(MinutiaList.empty(), sk, ok_mask(sk.shape), W=16)


@pytest.fixture(scope="module")
def finger_result():
    img, _ = generate(random_finger(11))
    return process_image(img)


def test_pipeline_minutiae_invariants(finger_result):
    res = finger_result
    ml = res.minutiae
    assert len(ml) > 5
    assert np.all(res.skeleton[ml.y.astype(int), ml.x.astype(int)])
    ok = res.quality.pixel_mask(res.skeleton.shape)
    assert np.all(ok[ml.y.astype(int), ml.x.astype(int)])
    p = ml.positions()
    d = np.hypot(p[:, None, 0] - p[None, :, 0], p[:, None, 1] - p[None, :, 1])
    np.fill_diagonal(d, np.inf)
    assert d.min() >= 8.0


@pytest.mark.parametrize("shift", [(16, 0), (0, 32), (16, 16)])
def test_translation_equivariance(finger_result, shift):
    sx, sy = shift
    res = finger_result
    b = res.quality.block_size
    sk = np.pad(res.skeleton, ((sy, 0), (sx, 0)))
    q = QualityMask(b, np.pad(res.quality.ok, ((sy // b, 0), (sx // b, 0))))
    a = remove_false_minutiae(extract_minutiae(res.skeleton, res.quality), res.skeleton, res.quality)
    t = remove_false_minutiae(extract_minutiae(sk, q), sk, q)
    np.testing.assert_array_equal(t.x, a.x + sx)
    np.testing.assert_array_equal(t.y, a.y + sy)
    np.testing.assert_array_equal(t.theta, a.theta)
    assert t.kind == a.kind


def test_minutiae_file_round_trip(tmp_path, finger_result):
    ml = finger_result.minutiae
    write_minutiae(ml, tmp_path / "m.min", "config=x")
    back = read_minutiae(tmp_path / "m.min")
    np.testing.assert_allclose(back.positions(), ml.positions())
    np.testing.assert_allclose(back.theta, ml.theta, atol=1e-8)
    assert back.kind == ml.kind


def test_minutiae_file_errors(tmp_path):
    (tmp_path / "a.min").write_text("nope\n")
    with pytest.raises(CodeFormatError):
        read_minutiae(tmp_path / "a.min")
    (tmp_path / "b.min").write_text("#ridgekit-minutiae v1 x\n1\t2\t3\tloop\n")
    with pytest.raises(CodeFormatError):
        read_minutiae(tmp_path / "b.min")
