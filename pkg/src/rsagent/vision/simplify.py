"""Douglas-Peucker polyline simplification and mask polygonization."""
from __future__ import annotations

import math

from ..core import Polygon, Raster
from .contours import trace_boundaries

Point = tuple[float, float]


def _perpendicular_distance(point: Point, a: Point, b: Point) -> float:
    """Distance from point to the chord segment ab (clamped projection)."""
    ax, ay = a
    bx, by = b
    px, py = point
    dx, dy = bx - ax, by - ay
    denom = dx * dx + dy * dy
    if denom == 0.0:
        return math.hypot(px - ax, py - ay)
    t = max(0.0, min(1.0, ((px - ax) * dx + (py - ay) * dy) / denom))
    return math.hypot(px - (ax + t * dx), py - (ay + t * dy))


def _simplify_indices(points: list[Point], lo: int, hi: int, epsilon: float, keep: set[int]) -> None:
    """Mark kept indices between the already-kept endpoints lo and hi."""
    stack = [(lo, hi)]
    while stack:
        lo, hi = stack.pop()
        if hi - lo < 2:
            continue
        best, best_dist = lo + 1, -1.0
        for i in range(lo + 1, hi):
            d = _perpendicular_distance(points[i], points[lo], points[hi])
            if d > best_dist:
                best, best_dist = i, d
        if best_dist > epsilon:
            keep.add(best)
            stack.append((lo, best))
            stack.append((best, hi))


def dp_simplify(points: list[Point], epsilon: float, closed: bool = False) -> list[Point]:
    """Classic recursion by maximum perpendicular deviation against epsilon.

    Output is an order-preserving subsequence of the input with the endpoints
    kept. A point is retained only when its deviation strictly exceeds
    epsilon, so epsilon = 0 drops exactly-collinear vertices only. Closed
    rings are anchored at the two mutually farthest vertices and each arc is
    simplified as an open polyline.
    """
    if len(points) < 2:
        raise ValueError("need at least 2 points to simplify")
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    pts = [(float(x), float(y)) for x, y in points]
    n = len(pts)
    if n == 2:
        return pts

    keep: set[int] = set()
    if closed:
        anchor_a, anchor_b, best = 0, 1, -1.0
        for i in range(n):
            xi, yi = pts[i]
            for j in range(i + 1, n):
                d = (pts[j][0] - xi) ** 2 + (pts[j][1] - yi) ** 2
                if d > best:
                    anchor_a, anchor_b, best = i, j, d
        keep.update((anchor_a, anchor_b))
        _simplify_indices(pts, anchor_a, anchor_b, epsilon, keep)
        # Wrap-around arc, unrolled so the open-polyline recursion applies.
        tail = pts[anchor_b:] + pts[: anchor_a + 1]
        tail_keep: set[int] = set()
        _simplify_indices(tail, 0, len(tail) - 1, epsilon, tail_keep)
        keep.update((anchor_b + k) % n for k in tail_keep)
    else:
        keep.update((0, n - 1))
        _simplify_indices(pts, 0, n - 1, epsilon, keep)
    return [pts[i] for i in sorted(keep)]


def polygonize(mask: Raster, class_id: int, epsilon: float) -> list[Polygon]:
    """Trace class boundaries and simplify each closed ring.

    Rings that simplify below 3 distinct vertices are discarded.
    """
    polygons = []
    for ring in trace_boundaries(mask, class_id):
        if len(ring) < 3:
            continue
        simplified = dp_simplify([(float(x), float(y)) for x, y in ring], epsilon, closed=True)
        cleaned: list[Point] = []
        for pt in simplified:  # collapse consecutive duplicates, cyclically
            if not cleaned or cleaned[-1] != pt:
                cleaned.append(pt)
        while len(cleaned) > 1 and cleaned[0] == cleaned[-1]:
            cleaned.pop()
        if len(cleaned) >= 3:
            polygons.append(Polygon(ring=tuple(cleaned)))
    return polygons
