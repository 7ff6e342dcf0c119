import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from xviewtrack.core import BBox, cosine_distance, ema_update, iou

coord = st.floats(-500, 500, allow_nan=False)
size = st.floats(0.5, 300, allow_nan=False)
boxes = st.builds(BBox, coord, coord, size, size)


def test_iou_identical():
    b = BBox(3, 4, 10, 20)
    assert iou(b, b) == 1.0


def test_iou_disjoint():
    assert iou(BBox(0, 0, 10, 10), BBox(20, 20, 5, 5)) == 0.0


def test_iou_half_shift():
    # overlap 5x10 = 50, union 100 + 100 - 50 = 150
    assert iou(BBox(0, 0, 10, 10), BBox(5, 0, 10, 10)) == pytest.approx(1 / 3, abs=1e-15)


def test_iou_touching_edges_is_zero():
    assert iou(BBox(0, 0, 10, 10), BBox(10, 0, 10, 10)) == 0.0


@pytest.mark.parametrize("w,h", [(0, 5), (5, 0), (-1, 5)])
def test_bbox_rejects_degenerate(w, h):
    with pytest.raises(ValueError):
        BBox(0, 0, w, h)


@settings(max_examples=1000)
@given(boxes, boxes)
def test_iou_symmetric_and_bounded(a, b):
    x = iou(a, b)
    assert x == iou(b, a)
    assert 0.0 <= x <= 1.0 + 1e-12


def test_cosine_distance_examples():
    assert cosine_distance([0.3, -2.0, 1.0], [0.3, -2.0, 1.0]) == pytest.approx(0.0, abs=1e-15)
    assert cosine_distance([1, 0], [0, 1]) == 1.0
    assert cosine_distance([1, 0], [-1, 0]) == 2.0


def test_cosine_distance_zero_norm():
    with pytest.raises(ValueError, match="zero-norm"):
        cosine_distance([0, 0], [1, 0])


def test_cosine_distance_dim_mismatch():
    with pytest.raises(ValueError):
        cosine_distance([1, 0, 0], [1, 0])


vec3 = st.lists(st.floats(-10, 10, allow_nan=False), min_size=3, max_size=3).filter(
    lambda v: np.linalg.norm(v) > 1e-3)


@given(vec3, vec3, st.floats(1e-3, 1e3), st.floats(1e-3, 1e3))
def test_cosine_distance_scale_invariant(a, b, s, t):
    a, b = np.array(a), np.array(b)
    assert cosine_distance(s * a, t * b) == pytest.approx(cosine_distance(a, b), abs=1e-9)


def test_ema_extremes():
    old = np.array([3.0, 4.0])
    new = np.array([0.0, 2.0])
    np.testing.assert_allclose(ema_update(old, new, 0.0), [0.0, 1.0])
    np.testing.assert_allclose(ema_update(old, new, 1.0), [0.6, 0.8])


def test_ema_half():
    out = ema_update([1.0, 0.0], [0.0, 1.0], 0.5)
    np.testing.assert_allclose(out, [1 / math.sqrt(2), 1 / math.sqrt(2)], atol=1e-15)


def test_ema_rejects_bad_alpha():
    with pytest.raises(ValueError):
        ema_update([1.0], [1.0], 1.5)


@given(vec3, vec3, st.floats(0, 1))
def test_ema_unit_norm(old, new, alpha):
    old, new = np.array(old), np.array(new)
    blend = alpha * old + (1 - alpha) * new
    if np.linalg.norm(blend) < 1e-6:
        return
    assert np.linalg.norm(ema_update(old, new, alpha)) == pytest.approx(1.0, abs=1e-9)
