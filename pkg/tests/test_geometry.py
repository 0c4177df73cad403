"""Rectangle arithmetic."""

import hypothesis.strategies as st
from hypothesis import given

from sartriage.geometry import (BoundingBox, clamp_box, enclose,
                                intersection_area, iou, overlaps)

boxes = st.builds(
    BoundingBox,
    x=st.floats(-100, 100), y=st.floats(-100, 100),
    w=st.floats(0.1, 50), h=st.floats(0.1, 50))


def test_iou_identical_is_one():
    a = BoundingBox(3, 4, 10, 12)
    assert iou(a, a) == 1.0


def test_iou_disjoint_is_zero():
    assert iou(BoundingBox(0, 0, 10, 10), BoundingBox(20, 0, 10, 10)) == 0.0


def test_iou_half_overlap_example():
    # Direct area arithmetic: intersection 50, union 150.
    a = BoundingBox(0, 0, 10, 10)
    b = BoundingBox(5, 0, 10, 10)
    assert abs(iou(a, b) - 1 / 3) < 1e-12


def test_touching_edges_do_not_overlap():
    a = BoundingBox(0, 0, 10, 10)
    b = BoundingBox(10, 0, 10, 10)
    assert intersection_area(a, b) == 0.0
    assert not overlaps(a, b)


def test_contains_and_enclose():
    outer = BoundingBox(0, 0, 20, 20)
    inner = BoundingBox(5, 5, 4, 4)
    assert outer.contains(inner)
    assert not inner.contains(outer)
    hull = enclose([BoundingBox(0, 0, 5, 5), BoundingBox(10, 12, 5, 5)])
    assert (hull.x, hull.y, hull.w, hull.h) == (0, 0, 15, 17)


def test_clamp_box():
    clipped = clamp_box(BoundingBox(-5, -5, 20, 20), 10, 10)
    assert (clipped.x, clipped.y, clipped.w, clipped.h) == (0, 0, 10, 10)
    assert clamp_box(BoundingBox(20, 20, 5, 5), 10, 10) is None


def test_translated_preserves_size_changes_frame():
    b = BoundingBox(1, 2, 3, 4, frame="tile").translated(10, 20, frame="image")
    assert (b.x, b.y, b.w, b.h, b.frame) == (11, 22, 3, 4, "image")


@given(a=boxes, b=boxes)
def test_iou_symmetric_and_bounded(a, b):
    v = iou(a, b)
    assert 0.0 <= v <= 1.0 + 1e-12
    assert v == iou(b, a)


@given(boxes_list=st.lists(boxes, min_size=1, max_size=6))
def test_enclose_contains_every_member(boxes_list):
    hull = enclose(boxes_list)
    eps = 1e-9
    for b in boxes_list:
        assert hull.x <= b.x + eps and hull.y <= b.y + eps
        assert hull.x2 >= b.x2 - eps and hull.y2 >= b.y2 - eps


@given(b=boxes)
def test_clamp_result_inside_bounds(b):
    clipped = clamp_box(b, 40, 30)
    if clipped is not None:
        assert 0 <= clipped.x and clipped.x2 <= 40 + 1e-9
        assert 0 <= clipped.y and clipped.y2 <= 30 + 1e-9
        assert clipped.w > 0 and clipped.h > 0
