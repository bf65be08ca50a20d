"""Court region of interest built from four corner boxes, plus the spatial
queries the tracker and pipeline need: on-court containment and front/back
side assignment relative to the net line.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .errors import GeometryError
from .ingest import CornerBoxSet

Point = tuple[float, float]

DEFAULT_AREA_EPS = 1e-6


class Side(enum.Enum):
    FRONT = "front"
    BACK = "back"


@dataclass(frozen=True)
class CourtROI:
    """Court quadrilateral (counter-clockwise vertex order) and its net line,
    the segment joining the midpoints of the two side edges."""

    quad: tuple[Point, Point, Point, Point]
    net_line: tuple[Point, Point]


def _box_vertices(box) -> list[Point]:
    x1, y1, x2, y2 = box
    return [(x1, y1), (x2, y1), (x2, y2), (x1, y2)]


def _signed_area(points) -> float:
    s = 0.0
    n = len(points)
    for i in range(n):
        x1, y1 = points[i]
        x2, y2 = points[(i + 1) % n]
        s += x1 * y2 - x2 * y1
    return s / 2.0


def build_roi(corners: CornerBoxSet, area_eps: float = DEFAULT_AREA_EPS) -> CourtROI:
    """Construct the court ROI from four corner boxes.

    For each box, the vertex farthest from the centroid of the four box
    centers is selected; the four selected vertices are ordered
    counter-clockwise and joined into the court quadrilateral. The net line
    connects the midpoints of the two edges that link the far (small-y) vertex
    pair to the near (large-y) pair.
    """
    centers = [((b[0] + b[2]) / 2.0, (b[1] + b[3]) / 2.0) for b in corners.boxes]
    cx = sum(p[0] for p in centers) / 4.0
    cy = sum(p[1] for p in centers) / 4.0

    selected: list[Point] = []
    for box in corners.boxes:
        best = max(_box_vertices(box), key=lambda p: (p[0] - cx) ** 2 + (p[1] - cy) ** 2)
        selected.append(best)

    qx = sum(p[0] for p in selected) / 4.0
    qy = sum(p[1] for p in selected) / 4.0
    ordered = sorted(selected, key=lambda p: (math.atan2(p[1] - qy, p[0] - qx), p[0], p[1]))

    area = _signed_area(ordered)
    if abs(area) < area_eps:
        raise GeometryError(f"selected corner points are degenerate (area {abs(area):.3g})")
    if area < 0:  # atan2 sort yields positive orientation unless points coincide
        ordered.reverse()

    quad = tuple(ordered)
    if _self_intersects(quad):
        raise GeometryError("selected corner points form a self-intersecting quad")

    net_line = _net_line(quad)
    return CourtROI(quad=quad, net_line=net_line)


def _self_intersects(quad) -> bool:
    # A quad ordered by angle around its centroid can only self-intersect in
    # pathological (non-star-shaped) configurations; check opposite edges.
    def crosses(a, b, c, d):
        def orient(p, q, r):
            return (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])
        o1, o2 = orient(a, b, c), orient(a, b, d)
        o3, o4 = orient(c, d, a), orient(c, d, b)
        return (o1 * o2 < 0) and (o3 * o4 < 0)

    e = [(quad[i], quad[(i + 1) % 4]) for i in range(4)]
    return crosses(*e[0], *e[2]) or crosses(*e[1], *e[3])


def _net_line(quad) -> tuple[Point, Point]:
    ys = sorted(range(4), key=lambda i: (quad[i][1], quad[i][0]))
    far = {ys[0], ys[1]}  # small-y pair: farther from the camera
    mids = []
    for i in range(4):
        j = (i + 1) % 4
        if (i in far) != (j in far):
            mids.append((
                (quad[i][0] + quad[j][0]) / 2.0,
                (quad[i][1] + quad[j][1]) / 2.0,
            ))
    if len(mids) != 2:
        raise GeometryError("cannot locate side edges for the net line")
    return (mids[0], mids[1])


def contains(roi: CourtROI, point: Point) -> bool:
    """Ray-casting containment test; points on the boundary count as inside."""
    x, y = point
    quad = roi.quad
    n = len(quad)

    for i in range(n):
        x1, y1 = quad[i]
        x2, y2 = quad[(i + 1) % n]
        cross = (x2 - x1) * (y - y1) - (y2 - y1) * (x - x1)
        scale = max(1.0, abs(x2 - x1) + abs(y2 - y1))
        if abs(cross) <= 1e-9 * scale:
            if min(x1, x2) - 1e-9 <= x <= max(x1, x2) + 1e-9 and \
               min(y1, y2) - 1e-9 <= y <= max(y1, y2) + 1e-9:
                return True

    inside = False
    for i in range(n):
        x1, y1 = quad[i]
        x2, y2 = quad[(i + 1) % n]
        if (y1 > y) != (y2 > y):
            x_int = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
            if x < x_int:
                inside = not inside
    return inside


def net_side(roi: CourtROI, point: Point) -> Side:
    """Front/back classification by the net line alone, without requiring the
    point to lie inside the ROI (for approximate reference points)."""
    (ax, ay), (bx, by) = roi.net_line
    dx, dy = bx - ax, by - ay
    # Normal pointing toward smaller y; undefined for a vertical net line.
    nx, ny = (-dy, dx) if dx < 0 else (dy, -dx)
    if ny == 0.0 and nx == 0.0:
        raise GeometryError("net line is degenerate")
    if ny == 0.0:
        raise GeometryError("net line is vertical; front/back is undefined")
    s = nx * (point[0] - ax) + ny * (point[1] - ay)
    return Side.BACK if s > 0 else Side.FRONT


def side_of(roi: CourtROI, point: Point) -> Side:
    """Assign an on-court point to the front or back side of the net line.

    Back is the smaller-y (farther-from-camera) side; points exactly on the
    net line are Front.
    """
    if not contains(roi, point):
        raise GeometryError(f"point {point} is outside the court ROI")
    return net_side(roi, point)
