"""Moore-neighbor boundary tracing over label masks, 8-connected."""
from __future__ import annotations

import numpy as np
from scipy import ndimage

from ..core import Raster

# Moore neighborhood in clockwise order starting west, (dx, dy) with y down.
_NEIGHBORS = [(-1, 0), (-1, -1), (0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1)]


def _signed_area(ring: list[tuple[int, int]]) -> float:
    total = 0.0
    n = len(ring)
    for i in range(n):
        x0, y0 = ring[i]
        x1, y1 = ring[(i + 1) % n]
        total += x0 * y1 - x1 * y0
    return total / 2.0


def _trace_component(inside: np.ndarray, start: tuple[int, int]) -> list[tuple[int, int]]:
    """Outer boundary from the component's raster-scan-first pixel.

    Terminates on returning to the start pixel when the following move would
    repeat the first move of the trace (so one-pixel-wide spurs are walked
    out and back exactly once), with a hard iteration cap as a safety net.
    """
    h, w = inside.shape

    def is_set(x: int, y: int) -> bool:
        return 0 <= x < w and 0 <= y < h and bool(inside[y, x])

    def next_from(point: tuple[int, int], backtrack: tuple[int, int]):
        """Clockwise Moore scan from the backtrack; returns (next, new backtrack)."""
        px, py = point
        start_idx = _NEIGHBORS.index((backtrack[0] - px, backtrack[1] - py))
        for step in range(1, len(_NEIGHBORS) + 1):
            dx, dy = _NEIGHBORS[(start_idx + step) % len(_NEIGHBORS)]
            cand = (px + dx, py + dy)
            if is_set(*cand):
                return cand, backtrack
            backtrack = cand
        return None, backtrack

    sx, sy = start
    ring = [start]
    point, backtrack = start, (sx - 1, sy)  # scan order guarantees west is outside
    first_move = None
    cap = 4 * int(inside.sum()) + 8
    for _ in range(cap):
        nxt, backtrack = next_from(point, backtrack)
        if nxt is None:
            return ring  # isolated pixel
        if first_move is None:
            first_move = nxt
        elif point == start and nxt == first_move:
            return ring[:-1]  # drop the re-appended start closing the loop
        ring.append(nxt)
        point = nxt
    return ring


def trace_boundaries(mask: Raster, class_id: int) -> list[list[tuple[int, int]]]:
    """One closed pixel ring per 8-connected component of {mask == class_id}.

    Points are pixel centers as (x, y); rings are oriented so their shoelace
    area is non-negative (counter-clockwise in the coordinate sense). An
    absent class gives an empty list.
    """
    if mask.channels != 1:
        raise ValueError("trace_boundaries expects a single-channel label mask")
    binary = mask.pixels == class_id
    if not binary.any():
        return []
    labels, count = ndimage.label(binary, structure=np.ones((3, 3), dtype=int))
    rings = []
    for component in range(1, count + 1):
        inside = labels == component
        ys, xs = np.nonzero(inside)
        first = int(np.argmin(ys * inside.shape[1] + xs))  # raster-scan order
        ring = _trace_component(inside, (int(xs[first]), int(ys[first])))
        if _signed_area(ring) < 0:
            ring = [ring[0]] + ring[1:][::-1]
        rings.append(ring)
    return rings
