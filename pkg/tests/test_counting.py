from __future__ import annotations

import random

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from rsagent.core import Detection, Polygon, Raster
from rsagent.vision import CountRequest, MaskRegion, count_objects, point_in_polygon

from .oracles import winding_inside

RUNWAY = Polygon(ring=((0.0, 0.0), (60.0, 0.0), (60.0, 60.0), (0.0, 60.0)))


def det(cx, cy, category="airplane", score=0.9):
    return Detection(category=category, bbox=(cx - 4, cy - 4, cx + 4, cy + 4), score=score)


class TestPointInPolygon:
    def test_against_winding_oracle_on_random_points(self):
        rnd = random.Random(42)
        ring = ((5.0, 5.0), (55.0, 12.0), (70.0, 48.0), (30.0, 66.0), (8.0, 40.0))
        poly = Polygon(ring=ring)
        for _ in range(500):
            p = (rnd.uniform(-10, 80), rnd.uniform(-10, 80))
            assert point_in_polygon(p, poly) == winding_inside(p, ring)

    def test_concave_polygon(self):
        ring = ((0.0, 0.0), (10.0, 0.0), (10.0, 10.0), (5.0, 4.0), (0.0, 10.0))
        poly = Polygon(ring=ring)
        assert point_in_polygon((5.0, 2.0), poly)
        assert not point_in_polygon((5.0, 8.0), poly)  # inside the notch

    def test_bbox_precheck_rejects_far_points(self):
        assert not point_in_polygon((1000.0, 1000.0), RUNWAY)


class TestCountObjects:
    def test_spec_geometry_three_boxes_two_in_square(self):
        dets = [det(10, 10), det(50, 50), det(90, 90)]
        # Brute-force winding oracle agrees on each center first.
        expected = sum(1 for d in dets if winding_inside(d.center, RUNWAY.ring))
        assert expected == 2
        out = count_objects(CountRequest(detections=dets, region=RUNWAY))
        assert out.count == 2
        assert [d.center for d in out.kept] == [(10.0, 10.0), (50.0, 50.0)]

    def test_empty_detections_count_zero(self):
        assert count_objects(CountRequest(detections=[])).count == 0

    def test_category_filter_to_zero(self):
        dets = [det(10, 10), det(50, 50)]
        assert count_objects(CountRequest(detections=dets, category="ship")).count == 0

    def test_category_and_region_combined(self):
        dets = [det(10, 10), det(50, 50, category="ship"), det(20, 20)]
        out = count_objects(CountRequest(detections=dets, category="airplane", region=RUNWAY))
        assert out.count == 2

    def test_mask_region_lookup(self):
        px = np.zeros((100, 100), dtype=np.uint8)
        px[0:61, 0:61] = 7
        region = MaskRegion(mask=Raster(px), class_id=7)
        dets = [det(10, 10), det(50, 50), det(90, 90)]
        out = count_objects(CountRequest(detections=dets, region=region))
        assert out.count == 2

    def test_mask_region_out_of_bounds_center_excluded(self):
        px = np.full((20, 20), 1, dtype=np.uint8)
        region = MaskRegion(mask=Raster(px), class_id=1)
        dets = [det(50, 50)]
        assert count_objects(CountRequest(detections=dets, region=region)).count == 0

    @settings(max_examples=100, deadline=None)
    @given(
        centers=st.lists(
            st.tuples(st.floats(1, 99, allow_nan=False), st.floats(1, 99, allow_nan=False)),
            max_size=20,
        ),
        seed=st.integers(0, 10_000),
    )
    def test_count_bounded_and_permutation_invariant(self, centers, seed):
        dets = [det(cx, cy) for cx, cy in centers if cx > 4 and cy > 4]
        req = CountRequest(detections=dets, region=RUNWAY)
        out = count_objects(req)
        assert out.count <= len(dets)
        shuffled = list(dets)
        random.Random(seed).shuffle(shuffled)
        assert count_objects(CountRequest(detections=shuffled, region=RUNWAY)).count == out.count

    def test_adding_in_region_detection_is_monotone(self):
        dets = [det(10, 10)]
        base = count_objects(CountRequest(detections=dets, category="airplane", region=RUNWAY)).count
        more = count_objects(
            CountRequest(detections=dets + [det(30, 30)], category="airplane", region=RUNWAY)
        ).count
        assert more == base + 1
