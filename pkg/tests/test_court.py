import itertools

import pytest
from hypothesis import given
from hypothesis import strategies as st

from rallyshot.court import Side, build_roi, contains, side_of
from rallyshot.errors import GeometryError
from rallyshot.ingest import CornerBoxSet


def corner_set(boxes, width=1280, height=1024):
    return CornerBoxSet(width=width, height=height, boxes=tuple(boxes))


UNIT_BOXES = ((0, 0, 0, 0), (10, 0, 10, 0), (10, 10, 10, 10), (0, 10, 0, 10))


@pytest.fixture
def unit_roi():
    return build_roi(corner_set(UNIT_BOXES, width=20, height=20))


class TestBuildRoi:
    def test_farthest_vertex_hand_geometry(self):
        # 20x20 boxes centered on (100,100), (900,100), (100,700), (900,700);
        # centroid of centers is (500,400), so the outermost vertex of each
        # box wins.
        boxes = ((90, 90, 110, 110), (890, 90, 910, 110),
                 (90, 690, 110, 710), (890, 690, 910, 710))
        roi = build_roi(corner_set(boxes))
        assert roi.quad == ((90, 90), (910, 90), (910, 710), (90, 710))

    def test_zero_area_boxes_collapse_to_centers(self):
        roi = build_roi(corner_set(UNIT_BOXES, width=20, height=20))
        assert roi.quad == ((0, 0), (10, 0), (10, 10), (0, 10))

    def test_collinear_points_rejected(self):
        boxes = ((0, 0, 0, 0), (5, 0, 5, 0), (10, 0, 10, 0), (15, 0, 15, 0))
        with pytest.raises(GeometryError):
            build_roi(corner_set(boxes, width=20, height=20))

    def test_permutation_invariance(self):
        boxes = ((90, 90, 110, 110), (890, 90, 910, 110),
                 (90, 690, 110, 710), (890, 690, 910, 710))
        reference = build_roi(corner_set(boxes)).quad
        for perm in itertools.permutations(boxes):
            assert build_roi(corner_set(perm)).quad == reference

    def test_net_line_joins_side_edge_midpoints(self):
        boxes = ((90, 90, 110, 110), (890, 90, 910, 110),
                 (90, 690, 110, 710), (890, 690, 910, 710))
        roi = build_roi(corner_set(boxes))
        assert sorted(roi.net_line) == [(90.0, 400.0), (910.0, 400.0)]


class TestContains:
    def test_interior(self, unit_roi):
        assert contains(unit_roi, (5, 5))

    def test_exterior(self, unit_roi):
        assert not contains(unit_roi, (15, 5))

    def test_edge_counts_inside(self, unit_roi):
        assert contains(unit_roi, (10, 5))
        assert contains(unit_roi, (0, 0))

    @given(
        ax=st.floats(0.5, 9.5), ay=st.floats(0.5, 9.5),
        bx=st.floats(0.5, 9.5), by=st.floats(0.5, 9.5),
        t=st.floats(0.0, 1.0),
    )
    def test_convexity(self, ax, ay, bx, by, t):
        roi = build_roi(corner_set(UNIT_BOXES, width=20, height=20))
        assert contains(roi, (ax, ay)) and contains(roi, (bx, by))
        mix = (ax + t * (bx - ax), ay + t * (by - ay))
        assert contains(roi, mix)


class TestSideOf:
    def test_larger_y_is_front(self, unit_roi):
        assert side_of(unit_roi, (5, 8)) is Side.FRONT

    def test_smaller_y_is_back(self, unit_roi):
        assert side_of(unit_roi, (5, 2)) is Side.BACK

    def test_on_net_line_is_front(self, unit_roi):
        assert side_of(unit_roi, (5, 5)) is Side.FRONT

    def test_outside_point_rejected(self, unit_roi):
        with pytest.raises(GeometryError):
            side_of(unit_roi, (15, 5))

    @given(x=st.floats(0.01, 9.99), y=st.floats(0.01, 9.99))
    def test_partition(self, x, y):
        roi = build_roi(corner_set(UNIT_BOXES, width=20, height=20))
        assert side_of(roi, (x, y)) in (Side.FRONT, Side.BACK)

    def test_trapezoid_net_line(self):
        # Broadcast-style trapezoid: narrower at the back.
        boxes = ((200, 100, 200, 100), (800, 100, 800, 100),
                 (0, 700, 0, 700), (1000, 700, 1000, 700))
        roi = build_roi(corner_set(boxes, width=1200, height=800))
        assert side_of(roi, (500, 150)) is Side.BACK
        assert side_of(roi, (500, 650)) is Side.FRONT
