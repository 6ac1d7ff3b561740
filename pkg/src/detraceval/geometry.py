"""Rectangle arithmetic: IoU, ignore-region coverage, scale and occlusion bands.

Band boundaries are upper-inclusive: scale (0,50] small, (50,150] medium,
(150,inf) large; occlusion [0,0.01) none, [0.01,0.5] partial, (0.5,1] heavy.
Boxes are half-open rectangles, so touching edges intersect with zero area.
"""

from __future__ import annotations

import enum
import math
from typing import Sequence

from .datamodel import BBox, IgnoreRegion


class ScaleClass(enum.Enum):
    SMALL = "small"
    MEDIUM = "medium"
    LARGE = "large"


class OcclusionClass(enum.Enum):
    NONE = "none"
    PARTIAL = "partial"
    HEAVY = "heavy"


def intersection_area(a: BBox, b: BBox) -> float:
    w = min(a.right, b.right) - max(a.left, b.left)
    h = min(a.bottom, b.bottom) - max(a.top, b.top)
    if w <= 0.0 or h <= 0.0:
        return 0.0
    return w * h


def iou(a: BBox, b: BBox) -> float:
    inter = intersection_area(a, b)
    if inter == 0.0:
        return 0.0
    # derive areas from the same corner coordinates as the intersection so
    # that identical boxes give exactly 1.0 and rounding stays monotone
    area_a = (a.right - a.left) * (a.bottom - a.top)
    area_b = (b.right - b.left) * (b.bottom - b.top)
    return inter / (area_a + area_b - inter)


def scale_class(box: BBox) -> ScaleClass:
    scale = math.sqrt(box.area)
    if scale <= 50.0:
        return ScaleClass.SMALL
    if scale <= 150.0:
        return ScaleClass.MEDIUM
    return ScaleClass.LARGE


def occlusion_class(ratio: float) -> OcclusionClass:
    if ratio < 0.01:
        return OcclusionClass.NONE
    if ratio <= 0.5:
        return OcclusionClass.PARTIAL
    return OcclusionClass.HEAVY


def _union_area(rects: list[tuple[float, float, float, float]]) -> float:
    """Exact area of a union of (x0, y0, x1, y1) rectangles by coordinate
    compression: sweep x-strips, merge y-intervals inside each strip."""
    xs = sorted({x for r in rects for x in (r[0], r[2])})
    total = 0.0
    for x0, x1 in zip(xs, xs[1:]):
        if x1 <= x0:
            continue
        intervals = sorted((r[1], r[3]) for r in rects if r[0] <= x0 and r[2] >= x1)
        covered = 0.0
        cur_lo = cur_hi = None
        for lo, hi in intervals:
            if cur_hi is None or lo > cur_hi:
                if cur_hi is not None:
                    covered += cur_hi - cur_lo
                cur_lo, cur_hi = lo, hi
            else:
                cur_hi = max(cur_hi, hi)
        if cur_hi is not None:
            covered += cur_hi - cur_lo
        total += (x1 - x0) * covered
    return total


def ignore_coverage(box: BBox, regions: Sequence[IgnoreRegion], frame: int) -> float:
    """Fraction of `box` covered by the union of ignore regions active at `frame`."""
    clipped = []
    for region in regions:
        if not region.active_at(frame):
            continue
        r = region.box
        x0 = max(box.left, r.left)
        y0 = max(box.top, r.top)
        x1 = min(box.right, r.right)
        y1 = min(box.bottom, r.bottom)
        if x1 > x0 and y1 > y0:
            clipped.append((x0, y0, x1, y1))
    if not clipped:
        return 0.0
    return _union_area(clipped) / box.area
