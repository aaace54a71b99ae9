"""Polygon and raster primitives.

All area and overlap computation in the toolkit is pixel-based: polygons
are rasterized onto the page grid (a pixel is set when its center lies
inside the ring under the even-odd rule) and compared as pixel sets.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from . import kernels


class Point(NamedTuple):
    x: int
    y: int


class BoundingBox(NamedTuple):
    x_min: int
    y_min: int
    x_max: int
    y_max: int

    @property
    def width(self) -> int:
        return self.x_max - self.x_min

    @property
    def height(self) -> int:
        return self.y_max - self.y_min


@dataclass(frozen=True)
class Polygon:
    """Closed ring of integer vertices (the last edge wraps to the first)."""

    vertices: tuple[Point, ...]

    def __post_init__(self) -> None:
        if len(self.vertices) < 3:
            raise ValueError("polygon needs at least 3 vertices")
        object.__setattr__(
            self, "vertices", tuple(Point(int(x), int(y)) for x, y in self.vertices)
        )

    @classmethod
    def from_points(cls, points: Iterable[Sequence[int]]) -> "Polygon":
        return cls(tuple(Point(int(p[0]), int(p[1])) for p in points))

    def as_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        xs = np.array([p.x for p in self.vertices], dtype=np.float64)
        ys = np.array([p.y for p in self.vertices], dtype=np.float64)
        return xs, ys

    def centroid(self) -> tuple[float, float]:
        """Vertex mean, used for reading-order sorting."""
        xs = sum(p.x for p in self.vertices)
        ys = sum(p.y for p in self.vertices)
        n = len(self.vertices)
        return xs / n, ys / n

    def translated(self, dx: int, dy: int) -> "Polygon":
        return Polygon(tuple(Point(p.x + dx, p.y + dy) for p in self.vertices))


@dataclass(eq=False)
class PixelGrid:
    """Dense label or mask plane; data shape is (height, width)."""

    width: int
    height: int
    data: np.ndarray

    def __post_init__(self) -> None:
        if self.data.shape != (self.height, self.width):
            raise ValueError(
                f"grid data shape {self.data.shape} does not match "
                f"{self.height}x{self.width}"
            )

    @classmethod
    def from_array(cls, data: np.ndarray) -> "PixelGrid":
        h, w = data.shape
        return cls(width=w, height=h, data=data)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PixelGrid):
            return NotImplemented
        return (
            self.width == other.width
            and self.height == other.height
            and self.data.dtype == other.data.dtype
            and bool(np.array_equal(self.data, other.data))
        )


def rasterize_mask(polygon: Polygon, width: int, height: int) -> np.ndarray:
    """Boolean mask of the polygon on a width x height grid.

    The filled set is clipped to the grid; a polygon that is degenerate or
    entirely outside yields an empty mask rather than an error.
    """
    xs, ys = polygon.as_arrays()
    return kernels.fill_polygon_mask(xs, ys, int(width), int(height))


def rasterize(polygon: Polygon, width: int, height: int) -> PixelGrid:
    """Rasterize a polygon to a binary PixelGrid."""
    return PixelGrid(width=width, height=height, data=rasterize_mask(polygon, width, height))


def mask_iou(a: np.ndarray, b: np.ndarray) -> float:
    """Intersection-over-union of two boolean masks of equal shape.

    Both empty -> 1.0, exactly one empty -> 0.0.
    """
    if a.shape != b.shape:
        raise ValueError(f"mask shapes differ: {a.shape} vs {b.shape}")
    inter = int(np.count_nonzero(a & b))
    union = int(np.count_nonzero(a | b))
    if union == 0:
        return 1.0
    return inter / union


def pixel_iou(a: PixelGrid, b: PixelGrid) -> float:
    """IoU of two binary grids; dimensions must match."""
    if (a.width, a.height) != (b.width, b.height):
        raise ValueError(
            f"grid dimensions differ: {a.width}x{a.height} vs {b.width}x{b.height}"
        )
    return mask_iou(a.data.astype(bool), b.data.astype(bool))


def bounding_box(polygon: Polygon) -> BoundingBox:
    """Tight axis-aligned bounds of the polygon vertices."""
    xs = [p.x for p in polygon.vertices]
    ys = [p.y for p in polygon.vertices]
    return BoundingBox(min(xs), min(ys), max(xs), max(ys))


def box_polygon(x_min: int, y_min: int, x_max: int, y_max: int) -> Polygon:
    """Axis-aligned rectangle as a 4-vertex ring."""
    return Polygon(
        (
            Point(x_min, y_min),
            Point(x_max, y_min),
            Point(x_max, y_max),
            Point(x_min, y_max),
        )
    )


def _orient(ax: int, ay: int, bx: int, by: int, cx: int, cy: int) -> int:
    v = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
    if v > 0:
        return 1
    if v < 0:
        return -1
    return 0


def _collinear_overlap(p1: Point, p2: Point, p3: Point, p4: Point) -> bool:
    """True when two collinear segments share more than a single point."""
    if abs(p2.x - p1.x) >= abs(p2.y - p1.y):
        a1, a2 = sorted((p1.x, p2.x))
        b1, b2 = sorted((p3.x, p4.x))
    else:
        a1, a2 = sorted((p1.y, p2.y))
        b1, b2 = sorted((p3.y, p4.y))
    return min(a2, b2) - max(a1, b1) > 0


def _segments_conflict(p1: Point, p2: Point, p3: Point, p4: Point) -> bool:
    o1 = _orient(p1.x, p1.y, p2.x, p2.y, p3.x, p3.y)
    o2 = _orient(p1.x, p1.y, p2.x, p2.y, p4.x, p4.y)
    o3 = _orient(p3.x, p3.y, p4.x, p4.y, p1.x, p1.y)
    o4 = _orient(p3.x, p3.y, p4.x, p4.y, p2.x, p2.y)
    if o1 * o2 < 0 and o3 * o4 < 0:
        return True  # proper crossing
    if o1 == 0 and o2 == 0 and o3 == 0 and o4 == 0:
        return _collinear_overlap(p1, p2, p3, p4)
    return False


def dedup_ring(points: Sequence[Point]) -> list[Point]:
    """Drop consecutive duplicate vertices (including the closing wrap)."""
    out: list[Point] = []
    for p in points:
        if not out or out[-1] != p:
            out.append(p)
    while len(out) > 1 and out[0] == out[-1]:
        out.pop()
    return out


def is_self_intersecting(polygon: Polygon) -> bool:
    """Detect proper edge crossings and positive-length collinear overlaps.

    Edges that merely touch at a point (e.g. a ring pinched at one lattice
    corner, as produced by boundary tracing of diagonally-connected
    regions) do not count.
    """
    pts = dedup_ring(polygon.vertices)
    n = len(pts)
    if n < 3:
        return False
    edges = [(pts[i], pts[(i + 1) % n]) for i in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            # adjacent edges share an endpoint, so a proper crossing is
            # impossible there and only a doubling-back can conflict
            if _segments_conflict(*edges[i], *edges[j]):
                return True
    return False


def clamp_polygon(polygon: Polygon, width: int, height: int) -> Polygon:
    """Clamp vertex coordinates into the closed page rectangle [0,w]x[0,h]."""
    return Polygon(
        tuple(
            Point(min(max(p.x, 0), width), min(max(p.y, 0), height))
            for p in polygon.vertices
        )
    )
