from __future__ import annotations

import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rsagent.core import Raster
from rsagent.vision import dp_simplify, polygonize, trace_boundaries

from .oracles import boundary_pixels, naive_rdp, naive_rdp_closed, polyline_deviation


def square_mask(size=10, lo=3, hi=7, class_id=1):
    px = np.zeros((size, size), dtype=np.uint8)
    px[lo:hi, lo:hi] = class_id
    return Raster(px)


class TestTraceBoundaries:
    def test_four_by_four_square_gives_one_ring_of_12(self):
        mask = square_mask()
        rings = trace_boundaries(mask, 1)
        assert len(rings) == 1
        ring = rings[0]
        assert len(ring) == 12
        assert set(ring) == boundary_pixels(mask.pixels.tolist(), 1)

    def test_empty_mask_gives_no_rings(self):
        assert trace_boundaries(Raster(np.zeros((8, 8), dtype=np.uint8)), 1) == []

    def test_two_separate_squares_give_two_rings(self):
        px = np.zeros((12, 12), dtype=np.uint8)
        px[1:4, 1:4] = 1
        px[7:11, 7:11] = 1
        rings = trace_boundaries(Raster(px), 1)
        assert len(rings) == 2

    def test_ring_points_are_boundary_pixels_and_adjacent(self):
        rng = np.random.default_rng(23)
        for _ in range(10):
            px = (rng.random((16, 16)) < 0.45).astype(np.uint8)
            mask = Raster(px)
            expected_boundary = boundary_pixels(px.tolist(), 1)
            for ring in trace_boundaries(mask, 1):
                for pt in ring:
                    assert pt in expected_boundary
                n = len(ring)
                for i in range(n):
                    x0, y0 = ring[i]
                    x1, y1 = ring[(i + 1) % n]  # closure: last reconnects to first
                    if n > 1:
                        assert max(abs(x1 - x0), abs(y1 - y0)) == 1

    def test_solid_component_rings_cover_all_boundary_pixels(self):
        px = np.zeros((14, 14), dtype=np.uint8)
        px[2:6, 2:9] = 3
        px[8:12, 4:7] = 3
        mask = Raster(px)
        covered = set()
        for ring in trace_boundaries(mask, 3):
            covered.update(ring)
        assert covered == boundary_pixels(px.tolist(), 3)

    def test_single_pixel_component(self):
        px = np.zeros((5, 5), dtype=np.uint8)
        px[2, 2] = 1
        rings = trace_boundaries(Raster(px), 1)
        assert rings == [[(2, 2)]]

    def test_absent_class_gives_empty_list(self):
        assert trace_boundaries(square_mask(), 9) == []


class TestDpSimplify:
    def test_small_deviation_is_dropped(self):
        assert dp_simplify([(0, 0), (1, 0.05), (2, 0)], 0.1) == [(0, 0), (2, 0)]

    def test_small_epsilon_keeps_all(self):
        pts = [(0, 0), (1, 0.05), (2, 0)]
        assert dp_simplify(pts, 0.01) == [(0.0, 0.0), (1.0, 0.05), (2.0, 0.0)]

    def test_rejects_degenerate_input(self):
        with pytest.raises(ValueError):
            dp_simplify([(0, 0)], 1.0)
        with pytest.raises(ValueError):
            dp_simplify([(0, 0), (1, 1)], -0.5)

    def test_noisy_sine_matches_naive_reference(self):
        rnd = random.Random(99)
        pts = [
            (i * 0.1, math.sin(i * 0.1) + rnd.uniform(-0.2, 0.2))
            for i in range(100)
        ]
        assert dp_simplify(pts, 0.25) == naive_rdp(pts, 0.25)

    def test_oracle_equivalence_on_100_random_polylines(self):
        rnd = random.Random(1234)
        for case in range(100):
            n = rnd.randint(2, 200)
            pts = [(rnd.uniform(-50, 50), rnd.uniform(-50, 50)) for _ in range(n)]
            eps = rnd.choice([0.0, 0.1, 0.5, 2.0, 10.0])
            ours = dp_simplify(pts, eps)
            ref = naive_rdp(pts, eps)
            assert ours == ref, f"case {case} diverged"

    def test_closed_ring_matches_closed_reference(self):
        rnd = random.Random(4321)
        for _ in range(30):
            n = rnd.randint(3, 60)
            pts = [(rnd.uniform(0, 30), rnd.uniform(0, 30)) for _ in range(n)]
            eps = rnd.choice([0.0, 0.5, 2.0])
            assert dp_simplify(pts, eps, closed=True) == naive_rdp_closed(pts, eps)

    @settings(max_examples=200, deadline=None)
    @given(
        pts=st.lists(
            st.tuples(
                st.floats(-100, 100, allow_nan=False),
                st.floats(-100, 100, allow_nan=False),
            ),
            min_size=2,
            max_size=60,
        ),
        eps=st.floats(0, 20, allow_nan=False),
    )
    def test_invariants(self, pts, eps):
        out = dp_simplify(pts, eps)
        pts_f = [(float(x), float(y)) for x, y in pts]
        # endpoints preserved
        assert out[0] == pts_f[0] and out[-1] == pts_f[-1]
        # order-preserving subsequence
        it = iter(pts_f)
        assert all(p in it for p in out)  # consumes lazily, order-sensitive
        # every input point within eps of the simplified polyline
        for p in pts_f:
            assert polyline_deviation(p, out, closed=False) <= eps + 1e-9
        # idempotence at fixed eps
        assert dp_simplify(out, eps) == out


class TestPolygonize:
    def test_square_reduces_to_its_corners(self):
        mask = square_mask()  # pixels 3..6 inclusive
        polys = polygonize(mask, 1, epsilon=1.0)
        assert len(polys) == 1
        assert set(polys[0].ring) == {(3.0, 3.0), (6.0, 3.0), (6.0, 6.0), (3.0, 6.0)}
        assert len(polys[0].ring) == 4

    def test_empty_mask_gives_no_polygons(self):
        assert polygonize(Raster(np.zeros((6, 6), dtype=np.uint8)), 1, 1.0) == []

    def test_epsilon_zero_removes_only_collinear_points(self):
        mask = square_mask()
        ring = trace_boundaries(mask, 1)[0]
        polys = polygonize(mask, 1, epsilon=0.0)
        assert len(polys) == 1
        out = polys[0].ring
        assert set(out) <= {(float(x), float(y)) for x, y in ring}
        # With zero tolerance only exactly-collinear vertices go; the square's
        # corners all remain.
        for corner in [(3.0, 3.0), (6.0, 3.0), (6.0, 6.0), (3.0, 6.0)]:
            assert corner in out

    def test_tiny_components_are_discarded(self):
        px = np.zeros((6, 6), dtype=np.uint8)
        px[2, 2] = 1  # single pixel: ring of 1, below 3 vertices
        assert polygonize(Raster(px), 1, 0.5) == []
