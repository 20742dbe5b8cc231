"""Native image-interpretation tools: edge detection, mask polygonization, counting."""

from .canny import CannyParams, GradientField, canny, gaussian_blur, sobel_gradients
from .contours import trace_boundaries
from .counting import CountRequest, CountResult, MaskRegion, count_objects, point_in_polygon
from .simplify import dp_simplify, polygonize

__all__ = [
    "CannyParams",
    "GradientField",
    "canny",
    "gaussian_blur",
    "sobel_gradients",
    "trace_boundaries",
    "dp_simplify",
    "polygonize",
    "CountRequest",
    "CountResult",
    "MaskRegion",
    "count_objects",
    "point_in_polygon",
]
