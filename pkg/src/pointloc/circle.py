"""Dispersion circle of a small 2D point set.

Exact minimum enclosing circle (incremental Welzl construction) up to
``EXACT_MAX_POINTS`` points, centroid + farthest-point circle beyond that.
Circles are ``(cx, cy, r)`` tuples.
"""
from __future__ import annotations

import math
from typing import Sequence

EXACT_MAX_POINTS = 64
_EPS = 1e-9

Point = tuple[float, float]
Circle = tuple[float, float, float]


def _contains(c: Circle, p: Point) -> bool:
    return math.hypot(p[0] - c[0], p[1] - c[1]) <= c[2] * (1 + 1e-12) + _EPS


def _diameter(a: Point, b: Point) -> Circle:
    cx = (a[0] + b[0]) / 2.0
    cy = (a[1] + b[1]) / 2.0
    return cx, cy, max(math.hypot(cx - a[0], cy - a[1]), math.hypot(cx - b[0], cy - b[1]))


def _circumcircle(a: Point, b: Point, c: Point):
    # translate to the bounding-box centre for accuracy
    ox = (min(a[0], b[0], c[0]) + max(a[0], b[0], c[0])) / 2.0
    oy = (min(a[1], b[1], c[1]) + max(a[1], b[1], c[1])) / 2.0
    ax, ay = a[0] - ox, a[1] - oy
    bx, by = b[0] - ox, b[1] - oy
    cx, cy = c[0] - ox, c[1] - oy
    d = 2.0 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by))
    if d == 0.0:
        return None
    a2, b2, c2 = ax * ax + ay * ay, bx * bx + by * by, cx * cx + cy * cy
    x = ox + (a2 * (by - cy) + b2 * (cy - ay) + c2 * (ay - by)) / d
    y = oy + (a2 * (cx - bx) + b2 * (ax - cx) + c2 * (bx - ax)) / d
    r = max(math.hypot(x - p[0], y - p[1]) for p in (a, b, c))
    return x, y, r


def _cross(ox, oy, ax, ay, bx, by) -> float:
    return (ax - ox) * (by - oy) - (ay - oy) * (bx - ox)


def _with_two(points: Sequence[Point], p: Point, q: Point) -> Circle:
    circ = _diameter(p, q)
    left = right = None
    px, py = p
    qx, qy = q
    for r in points:
        if _contains(circ, r):
            continue
        cross = _cross(px, py, qx, qy, r[0], r[1])
        c = _circumcircle(p, q, r)
        if c is None:
            continue
        side = _cross(px, py, qx, qy, c[0], c[1])
        if cross > 0.0 and (left is None or side > _cross(px, py, qx, qy, left[0], left[1])):
            left = c
        elif cross < 0.0 and (right is None or side < _cross(px, py, qx, qy, right[0], right[1])):
            right = c
    if left is None and right is None:
        return circ
    if left is None:
        return right
    if right is None:
        return left
    return left if left[2] <= right[2] else right


def _with_one(points: Sequence[Point], p: Point) -> Circle:
    c = (p[0], p[1], 0.0)
    for i, q in enumerate(points):
        if not _contains(c, q):
            if c[2] == 0.0:
                c = _diameter(p, q)
            else:
                c = _with_two(points[: i + 1], p, q)
    return c


def min_enclosing_circle(points: Sequence[Point]) -> Circle:
    """Smallest circle containing every point. Deterministic for a given input order."""
    pts = [(float(x), float(y)) for x, y in points]
    if not pts:
        raise ValueError("no points")
    # extreme points first: the circle is nearly final after a few insertions
    cx = sum(p[0] for p in pts) / len(pts)
    cy = sum(p[1] for p in pts) / len(pts)
    pts.sort(key=lambda p: -((p[0] - cx) ** 2 + (p[1] - cy) ** 2))
    c = None
    for i, p in enumerate(pts):
        if c is None or not _contains(c, p):
            c = _with_one(pts[: i + 1], p)
    return c


def centroid_circle(points: Sequence[Point]) -> Circle:
    n = len(points)
    cx = sum(p[0] for p in points) / n
    cy = sum(p[1] for p in points) / n
    return cx, cy, max(math.hypot(p[0] - cx, p[1] - cy) for p in points)


def dispersion_circle(points: Sequence[Point], exact_max: int = EXACT_MAX_POINTS) -> Circle:
    if len(points) <= exact_max:
        return min_enclosing_circle(points)
    return centroid_circle(points)
