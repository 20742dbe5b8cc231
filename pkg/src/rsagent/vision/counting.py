"""Region-aware object counting over detection sets."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

from ..core import Detection, Polygon, Raster


@dataclass(frozen=True)
class MaskRegion:
    """Label-mask region: membership means the pixel under a point equals class_id."""

    mask: Raster
    class_id: int

    def __post_init__(self):
        if self.mask.channels != 1:
            raise ValueError("region mask must be single-channel")


Region = Union[Polygon, MaskRegion, tuple]


@dataclass
class CountRequest:
    detections: list[Detection]
    category: Optional[str] = None
    region: Optional[Region] = None  # a tuple/list of Polygons means union membership


@dataclass
class CountResult:
    count: int
    kept: list[Detection]


def point_in_polygon(point: tuple[float, float], polygon: Polygon) -> bool:
    """Even-odd ray casting toward +x, with a bounding-box precheck.

    Edges are counted with the half-open rule (y1 > py) != (y2 > py), so
    vertices on the ray are counted exactly once; points exactly on a
    boundary follow whichever side the crossing rule assigns.
    """
    px, py = point
    ring = polygon.ring
    xs = [p[0] for p in ring]
    ys = [p[1] for p in ring]
    if px < min(xs) or px > max(xs) or py < min(ys) or py > max(ys):
        return False
    inside = False
    n = len(ring)
    for i in range(n):
        x0, y0 = ring[i]
        x1, y1 = ring[(i + 1) % n]
        if (y0 > py) != (y1 > py):
            x_cross = x0 + (py - y0) * (x1 - x0) / (y1 - y0)
            if px < x_cross:
                inside = not inside
    return inside


def _in_region(center: tuple[float, float], region: Region) -> bool:
    if isinstance(region, (tuple, list)):
        return any(point_in_polygon(center, poly) for poly in region)
    if isinstance(region, Polygon):
        return point_in_polygon(center, region)
    cx, cy = int(math.floor(center[0])), int(math.floor(center[1]))
    mask = region.mask
    if not (0 <= cx < mask.width and 0 <= cy < mask.height):
        return False
    return int(mask.pixels[cy, cx]) == region.class_id


def count_objects(request: CountRequest) -> CountResult:
    """Filter by category, then keep detections whose bbox center lies in the region."""
    kept = request.detections
    if request.category is not None:
        kept = [d for d in kept if d.category == request.category]
    if request.region is not None:
        kept = [d for d in kept if _in_region(d.center, request.region)]
    return CountResult(count=len(kept), kept=list(kept))
