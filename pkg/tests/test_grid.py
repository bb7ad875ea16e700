import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from pln.grid import (
    CORNER_KINDS,
    Box,
    CornerKind,
    GridSpec,
    Point2D,
    QuadrantViolation,
    box_from_pair,
    center_of,
    corner_of,
    iou,
    locate,
)

from .conftest import boxes, unit


def test_gridspec_rejects_nonpositive():
    with pytest.raises(ValueError):
        GridSpec(0, 1, 1)
    with pytest.raises(ValueError):
        GridSpec(4, 0, 1)
    assert GridSpec(4, 2, 3).cell_size == 0.25


def test_point_clamps():
    p = Point2D(-0.5, 1.5)
    assert (p.x, p.y) == (0.0, 1.0)
    with pytest.raises(ValueError):
        Point2D(float("nan"), 0.0)


@pytest.mark.parametrize(
    "x, y, row, col, ox, oy",
    [
        (0.5, 0.5, 2, 2, 0.0, 0.0),
        (1.0, 1.0, 3, 3, 1.0, 1.0),
        (0.30, 0.70, 2, 1, 0.2, 0.8),
        (0.0, 0.0, 0, 0, 0.0, 0.0),
    ],
)
def test_locate_examples(x, y, row, col, ox, oy):
    loc = locate(Point2D(x, y), GridSpec(4, 1, 1))
    assert (loc.row, loc.col) == (row, col)
    assert loc.ox == pytest.approx(ox, abs=1e-12)
    assert loc.oy == pytest.approx(oy, abs=1e-12)


@given(unit, unit, st.integers(1, 64))
def test_locate_roundtrip(x, y, S):
    loc = locate(Point2D(x, y), GridSpec(S, 1, 1))
    assert 0 <= loc.row < S and 0 <= loc.col < S
    assert 0.0 <= loc.ox <= 1.0 and 0.0 <= loc.oy <= 1.0
    tol = 2 * math.ulp(max(x, 1e-300)) + 2 * math.ulp(1.0)
    assert abs((loc.col + loc.ox) / S - x) <= tol
    assert abs((loc.row + loc.oy) / S - y) <= tol


def test_corner_of_examples():
    b = Box(0.25, 0.25, 0.75, 0.75)
    assert corner_of(b, CornerKind.LEFT_TOP) == Point2D(0.25, 0.25)
    assert corner_of(b, CornerKind.RIGHT_BOTTOM) == Point2D(0.75, 0.75)
    assert corner_of(Box(0.1, 0.2, 0.5, 0.4), CornerKind.RIGHT_TOP) == Point2D(0.5, 0.2)
    assert corner_of(Box(0.1, 0.2, 0.5, 0.4), CornerKind.LEFT_BOTTOM) == Point2D(0.1, 0.4)
    assert center_of(b) == Point2D(0.5, 0.5)


def test_box_from_pair_examples():
    c = Point2D(0.5, 0.5)
    assert box_from_pair(c, Point2D(0.25, 0.25), CornerKind.LEFT_TOP) == Box(0.25, 0.25, 0.75, 0.75)
    zero = box_from_pair(c, c, CornerKind.LEFT_TOP)
    assert zero == Box(0.5, 0.5, 0.5, 0.5) and zero.area == 0.0
    b = box_from_pair(Point2D(0.4, 0.6), Point2D(0.7, 0.9), CornerKind.RIGHT_BOTTOM)
    assert b.as_tuple() == pytest.approx((0.1, 0.3, 0.7, 0.9), abs=1e-12)


@pytest.mark.parametrize("k", CORNER_KINDS)
def test_box_from_pair_rejects_wrong_quadrant(k):
    c = Point2D(0.5, 0.5)
    dx = 0.2 if k.is_left else -0.2
    dy = 0.2 if k.is_top else -0.2
    with pytest.raises(QuadrantViolation):
        box_from_pair(c, Point2D(0.5 + dx, 0.5 + dy), k)


@given(boxes(), st.sampled_from(CORNER_KINDS))
def test_box_from_pair_inverts_corner_extraction(b, k):
    r = box_from_pair(center_of(b), corner_of(b, k), k)
    assert r.as_tuple() == pytest.approx(b.as_tuple(), abs=1e-15)


def test_iou_examples():
    a = Box(0.1, 0.1, 0.4, 0.5)
    assert iou(a, a) == 1.0
    assert iou(a, Box(0.6, 0.6, 0.9, 0.9)) == 0.0
    assert iou(Box(0, 0, 1, 0.5), Box(0, 0.25, 1, 0.75)) == pytest.approx(1 / 3, abs=1e-15)
    # zero-area boxes never overlap anything
    pt = Box(0.2, 0.2, 0.2, 0.2)
    assert iou(pt, pt) == 0.0
    assert iou(pt, a) == 0.0


@given(boxes(), boxes())
def test_iou_properties(a, b):
    v = iou(a, b)
    assert 0.0 <= v <= 1.0
    assert v == iou(b, a)
    if a.area > 0:
        assert iou(a, a) == pytest.approx(1.0, abs=1e-12)


def test_corner_kind_parse():
    assert CornerKind.parse("rb") is CornerKind.RIGHT_BOTTOM
    assert CornerKind.parse("left-top") is CornerKind.LEFT_TOP
    assert [k.index for k in CORNER_KINDS] == [0, 1, 2, 3]
