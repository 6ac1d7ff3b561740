import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from detraceval.datamodel import BBox, IgnoreRegion
from detraceval.geometry import (OcclusionClass, ScaleClass, ignore_coverage,
                                 iou, occlusion_class, scale_class)

boxes = st.builds(
    BBox,
    left=st.floats(-500, 500),
    top=st.floats(-500, 500),
    width=st.floats(0.5, 300),
    height=st.floats(0.5, 300),
)


def test_iou_identical():
    b = BBox(3, 4, 10, 20)
    assert iou(b, b) == 1.0


def test_iou_disjoint():
    assert iou(BBox(0, 0, 10, 10), BBox(20, 20, 5, 5)) == 0.0


def test_iou_closed_form():
    # intersection 5x10 = 50, union 200 - 50 = 150
    assert iou(BBox(0, 0, 10, 10), BBox(5, 0, 10, 10)) == pytest.approx(50 / 150)


def test_touching_edges_zero_area():
    assert iou(BBox(0, 0, 10, 10), BBox(10, 0, 10, 10)) == 0.0


@given(boxes, boxes)
def test_iou_symmetric_and_bounded(a, b):
    v = iou(a, b)
    assert v == iou(b, a)
    assert 0.0 <= v <= 1.0


@given(boxes, boxes, st.floats(-100, 100), st.floats(-100, 100))
def test_iou_translation_invariance(a, b, tx, ty):
    shifted_a = BBox(a.left + tx, a.top + ty, a.width, a.height)
    shifted_b = BBox(b.left + tx, b.top + ty, b.width, b.height)
    assert iou(shifted_a, shifted_b) == pytest.approx(iou(a, b), abs=1e-9)


def test_scale_bands():
    assert scale_class(BBox(0, 0, 50, 50)) is ScaleClass.SMALL
    assert scale_class(BBox(0, 0, 51, 51)) is ScaleClass.MEDIUM
    assert scale_class(BBox(0, 0, 150, 150)) is ScaleClass.MEDIUM
    assert scale_class(BBox(0, 0, 151, 151)) is ScaleClass.LARGE


def test_occlusion_bands():
    assert occlusion_class(0.0) is OcclusionClass.NONE
    assert occlusion_class(0.009) is OcclusionClass.NONE
    assert occlusion_class(0.01) is OcclusionClass.PARTIAL
    assert occlusion_class(0.5) is OcclusionClass.PARTIAL
    assert occlusion_class(0.51) is OcclusionClass.HEAVY


def test_ignore_coverage_no_regions():
    assert ignore_coverage(BBox(0, 0, 10, 10), [], 1) == 0.0


def test_ignore_coverage_fully_inside():
    box = BBox(5, 5, 10, 10)
    region = IgnoreRegion(BBox(0, 0, 50, 50))
    assert ignore_coverage(box, [region], 1) == 1.0


def test_ignore_coverage_overlapping_regions_not_double_counted():
    box = BBox(0, 0, 10, 10)
    regions = [IgnoreRegion(BBox(0, 0, 6, 10)), IgnoreRegion(BBox(4, 0, 6, 10))]
    assert ignore_coverage(box, regions, 1) == pytest.approx(1.0)


def test_ignore_coverage_respects_frame_range():
    box = BBox(0, 0, 10, 10)
    region = IgnoreRegion(BBox(0, 0, 10, 10), first_frame=3, last_frame=5)
    assert ignore_coverage(box, [region], 2) == 0.0
    assert ignore_coverage(box, [region], 4) == 1.0


def _grid_coverage(box, regions, frame, step=0.01):
    xs = np.arange(box.left + step / 2, box.right, step)
    ys = np.arange(box.top + step / 2, box.bottom, step)
    gx, gy = np.meshgrid(xs, ys)
    covered = np.zeros(gx.shape, dtype=bool)
    for region in regions:
        if not region.active_at(frame):
            continue
        r = region.box
        covered |= ((gx >= r.left) & (gx < r.right)
                    & (gy >= r.top) & (gy < r.bottom))
    return covered.mean() if covered.size else 0.0


def test_ignore_coverage_matches_grid_oracle():
    rng = np.random.default_rng(42)
    for _ in range(25):
        box = BBox(rng.uniform(0, 5), rng.uniform(0, 5),
                   rng.uniform(2, 8), rng.uniform(2, 8))
        regions = [
            IgnoreRegion(BBox(rng.uniform(-2, 8), rng.uniform(-2, 8),
                              rng.uniform(1, 6), rng.uniform(1, 6)))
            for _ in range(rng.integers(1, 4))
        ]
        exact = ignore_coverage(box, regions, 1)
        approx = _grid_coverage(box, regions, 1)
        assert abs(exact - approx) < 0.02
