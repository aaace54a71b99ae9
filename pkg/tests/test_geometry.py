import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from actseg.geometry import (
    BoundingBox,
    PixelGrid,
    Polygon,
    bounding_box,
    box_polygon,
    clamp_polygon,
    is_self_intersecting,
    mask_iou,
    pixel_iou,
    rasterize,
    rasterize_mask,
)


def poly(*pts):
    return Polygon.from_points(pts)


class TestRasterize:
    def test_axis_aligned_square(self):
        grid = rasterize(box_polygon(0, 0, 10, 10), 20, 20)
        assert int(grid.data.sum()) == 100

    def test_triangle_frozen_count(self):
        # value computed with the enumeration oracle before implementation
        p = poly((0, 0), (4, 0), (0, 4))
        mask = rasterize_mask(p, 10, 10)
        assert int(mask.sum()) == 6
        expected = oracles.rasterize_by_enumeration([(0, 0), (4, 0), (0, 4)], 10, 10)
        assert np.array_equal(mask, expected)

    def test_fully_outside_is_empty(self):
        p = poly((100, 100), (110, 100), (110, 110))
        assert not rasterize_mask(p, 20, 20).any()

    def test_degenerate_polygon_empty_not_error(self):
        p = poly((0, 0), (5, 0), (2, 0))
        assert not rasterize_mask(p, 10, 10).any()

    def test_deterministic(self):
        p = poly((1, 1), (8, 2), (9, 7), (5, 9), (0, 5))
        a = rasterize_mask(p, 12, 12)
        b = rasterize_mask(p, 12, 12)
        assert np.array_equal(a, b)

    def test_pentagon_matches_enumeration(self):
        verts = [(1, 1), (8, 2), (9, 7), (5, 9), (0, 5)]
        mask = rasterize_mask(Polygon.from_points(verts), 12, 12)
        assert int(mask.sum()) == 48
        assert np.array_equal(mask, oracles.rasterize_by_enumeration(verts, 12, 12))

    def test_random_star_polygons_match_enumeration(self):
        rng = random.Random(20240)
        for _ in range(25):
            n = rng.randint(3, 8)
            cx, cy = rng.randint(5, 15), rng.randint(5, 15)
            pts = []
            for k in range(n):
                ang = 2 * np.pi * k / n + rng.random() * 0.5
                r = rng.randint(2, 7)
                pts.append((cx + int(r * np.cos(ang)), cy + int(r * np.sin(ang))))
            verts = list(dict.fromkeys(pts))
            if len(verts) < 3:
                continue
            mask = rasterize_mask(Polygon.from_points(verts), 22, 22)
            assert np.array_equal(
                mask, oracles.rasterize_by_enumeration(verts, 22, 22)
            ), verts

    def test_overflowing_polygon_clipped_to_page(self):
        mask = rasterize_mask(box_polygon(15, 15, 30, 30), 20, 20)
        assert int(mask.sum()) == 25
        assert mask[15:20, 15:20].all()

    @given(
        x0=st.integers(0, 10), y0=st.integers(0, 10),
        w=st.integers(1, 10), h=st.integers(1, 10),
    )
    @settings(max_examples=60, deadline=None)
    def test_rect_area_exact(self, x0, y0, w, h):
        mask = rasterize_mask(box_polygon(x0, y0, x0 + w, y0 + h), 24, 24)
        assert int(mask.sum()) == w * h


class TestPixelIou:
    def test_identical_masks(self):
        g = rasterize(box_polygon(2, 2, 8, 8), 10, 10)
        assert pixel_iou(g, g) == 1.0

    def test_disjoint(self):
        a = rasterize(box_polygon(0, 0, 3, 3), 10, 10)
        b = rasterize(box_polygon(5, 5, 9, 9), 10, 10)
        assert pixel_iou(a, b) == 0.0

    def test_shifted_square(self):
        a = rasterize(box_polygon(0, 0, 10, 10), 20, 20)
        b = rasterize(box_polygon(5, 0, 15, 10), 20, 20)
        assert pixel_iou(a, b) == pytest.approx(50 / 150)

    def test_empty_conventions(self):
        empty = PixelGrid.from_array(np.zeros((5, 5), dtype=bool))
        full = PixelGrid.from_array(np.ones((5, 5), dtype=bool))
        assert pixel_iou(empty, empty) == 1.0
        assert pixel_iou(empty, full) == 0.0
        assert pixel_iou(full, empty) == 0.0

    def test_dimension_mismatch(self):
        a = PixelGrid.from_array(np.zeros((5, 5), dtype=bool))
        b = PixelGrid.from_array(np.zeros((5, 6), dtype=bool))
        with pytest.raises(ValueError):
            pixel_iou(a, b)

    @given(
        ax=st.integers(0, 10), ay=st.integers(0, 10),
        aw=st.integers(1, 8), ah=st.integers(1, 8),
        bx=st.integers(0, 10), by=st.integers(0, 10),
        bw=st.integers(1, 8), bh=st.integers(1, 8),
    )
    @settings(max_examples=60, deadline=None)
    def test_symmetry(self, ax, ay, aw, ah, bx, by, bw, bh):
        a = rasterize_mask(box_polygon(ax, ay, ax + aw, ay + ah), 20, 20)
        b = rasterize_mask(box_polygon(bx, by, bx + bw, by + bh), 20, 20)
        assert mask_iou(a, b) == mask_iou(b, a)

    def test_nested_polygons_ratio(self):
        outer = rasterize_mask(box_polygon(0, 0, 12, 12), 20, 20)
        inner = rasterize_mask(box_polygon(3, 3, 9, 9), 20, 20)
        assert mask_iou(inner, outer) == pytest.approx(36 / 144)


class TestBoundingBox:
    def test_triangle(self):
        assert bounding_box(poly((1, 2), (5, 2), (3, 7))) == BoundingBox(1, 2, 5, 7)

    def test_square(self):
        assert bounding_box(box_polygon(0, 0, 10, 10)) == BoundingBox(0, 0, 10, 10)

    def test_vertex_count_enforced(self):
        with pytest.raises(ValueError):
            Polygon.from_points([(0, 0), (1, 1)])


class TestSelfIntersection:
    def test_square_ok(self):
        assert not is_self_intersecting(box_polygon(0, 0, 5, 5))

    def test_bowtie_rejected(self):
        assert is_self_intersecting(poly((0, 0), (10, 10), (10, 0), (0, 10)))

    def test_pinched_ring_allowed(self):
        # boundary of two diagonally-touching pixels: touches itself at one
        # corner but never crosses
        p = poly((0, 0), (1, 0), (1, 1), (2, 1), (2, 2), (1, 2), (1, 1), (0, 1))
        assert not is_self_intersecting(p)

    def test_spike_rejected(self):
        assert is_self_intersecting(poly((0, 0), (10, 0), (4, 0), (4, 5)))

    def test_forward_collinear_allowed(self):
        assert not is_self_intersecting(poly((0, 0), (5, 0), (10, 0), (10, 10), (0, 10)))


class TestClamp:
    def test_clamps_to_closed_page_rect(self):
        p = poly((-5, -3), (25, 0), (25, 30), (-5, 30))
        c = clamp_polygon(p, 20, 20)
        for v in c.vertices:
            assert 0 <= v.x <= 20
            assert 0 <= v.y <= 20
