"""Render classified line positions onto page images for model input.

Three fusion variants: draw only flagged (key-phrase) lines over the
image; draw all lines, flagged ones in a distinct color; or keep the
image untouched and add a binary text-mask plane as a fourth channel.
Flagged lines are drawn last, so they win where polygons overlap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np
from PIL import Image

from . import kernels
from .documents import Act, PageDocument, TextLine, ValidationError
from .geometry import PixelGrid, Point, Polygon, rasterize_mask


class Variant(str, Enum):
    KEY_LINES_ONLY = "keyonly"
    TEXT_MASK_CHANNEL = "ch4"
    TWO_COLOR_LINES = "twocolor"


@dataclass(frozen=True)
class RenderConfig:
    variant: Variant
    key_color: tuple[int, int, int] = (0, 255, 0)
    other_color: tuple[int, int, int] = (0, 0, 255)
    fill: bool = True
    resize_longest_side: int | None = 768

    def __post_init__(self) -> None:
        if self.key_color == self.other_color:
            raise ValidationError("key_color and other_color must differ")
        if self.resize_longest_side is not None and self.resize_longest_side < 1:
            raise ValidationError("resize_longest_side must be >= 1")


def _polygon_mask(polygon: Polygon, width: int, height: int, fill: bool) -> np.ndarray:
    if fill:
        return rasterize_mask(polygon, width, height)
    mask = np.zeros((height, width), dtype=bool)
    verts = polygon.vertices
    for i, p in enumerate(verts):
        q = verts[(i + 1) % len(verts)]
        kernels.draw_line_mask(mask, int(p.x), int(p.y), int(q.x), int(q.y))
    return mask


def _group_masks(
    lines: list[TextLine], width: int, height: int, fill: bool
) -> tuple[np.ndarray, np.ndarray]:
    """(flagged, unflagged) union masks of line polygons."""
    flagged = np.zeros((height, width), dtype=bool)
    unflagged = np.zeros_like(flagged)
    for line in lines:
        if line.is_first_line is None:
            raise ValidationError(f"line {line.id!r} is not classified yet")
        target = flagged if line.is_first_line else unflagged
        target |= _polygon_mask(line.polygon, width, height, fill)
    return flagged, unflagged


def render_enriched(
    page: PageDocument, image: np.ndarray, config: RenderConfig
) -> np.ndarray:
    """Produce the enriched raster (h, w, 3) or (h, w, 4) for one page.

    The image must match the page dimensions; pixels outside all line
    polygons always keep their source value, and for the 4th-channel
    variant the original three channels are untouched.
    """
    if image.ndim != 3 or image.shape[2] != 3:
        raise ValidationError("page image must be an RGB array of shape (h, w, 3)")
    if image.shape[:2] != (page.height, page.width):
        raise ValidationError(
            f"image is {image.shape[1]}x{image.shape[0]}, "
            f"page {page.page_id!r} is {page.width}x{page.height}"
        )
    flagged, unflagged = _group_masks(page.lines, page.width, page.height, config.fill)
    if config.variant is Variant.TEXT_MASK_CHANNEL:
        ch4 = np.where(flagged | unflagged, 255, 0).astype(np.uint8)
        return np.dstack([image, ch4])
    out = image.copy()
    if config.variant is Variant.TWO_COLOR_LINES:
        out[unflagged] = config.other_color
    out[flagged] = config.key_color
    return out


def _scale_coord(c: int, factor: float, limit: int) -> int:
    return min(max(int(math.floor(c * factor + 0.5)), 0), limit)


def _scale_polygon(polygon: Polygon, factor: float, width: int, height: int) -> Polygon:
    return Polygon(
        tuple(
            Point(_scale_coord(p.x, factor, width), _scale_coord(p.y, factor, height))
            for p in polygon.vertices
        )
    )


def scale_page(
    page: PageDocument, image: np.ndarray | None, longest_side: int
) -> tuple[PageDocument, np.ndarray | None]:
    """Resize a page (and its rasters) so the longest side is ``longest_side``.

    Photographic images are resampled bilinearly, label maps with nearest
    neighbor; polygon coordinates are scaled and rounded half-up.
    """
    if longest_side < 1:
        raise ValidationError("longest_side must be >= 1")
    factor = longest_side / max(page.width, page.height)
    if page.width >= page.height:
        new_w = longest_side
        new_h = max(1, int(math.floor(page.height * factor + 0.5)))
    else:
        new_h = longest_side
        new_w = max(1, int(math.floor(page.width * factor + 0.5)))
    if (new_w, new_h) == (page.width, page.height):
        return page, image

    def scale_act(act: Act) -> Act:
        return replace(act, polygon=_scale_polygon(act.polygon, factor, new_w, new_h))

    lines = [
        replace(ln, polygon=_scale_polygon(ln.polygon, factor, new_w, new_h))
        for ln in page.lines
    ]
    label_map = None
    if page.label_map is not None:
        img = Image.fromarray(page.label_map.data.astype(np.uint8), mode="L")
        img = img.resize((new_w, new_h), Image.NEAREST)
        label_map = PixelGrid.from_array(np.asarray(img, dtype=np.uint8))
    prob_maps = None
    if page.prob_maps is not None:
        prob_maps = {}
        for cls, plane in page.prob_maps.items():
            img = Image.fromarray(plane.astype(np.float32), mode="F")
            img = img.resize((new_w, new_h), Image.BILINEAR)
            prob_maps[cls] = np.asarray(img, dtype=np.float32)
    scaled = replace(
        page,
        width=new_w,
        height=new_h,
        lines=lines,
        gt_acts=[scale_act(a) for a in page.gt_acts],
        pred_acts=[scale_act(a) for a in page.pred_acts],
        label_map=label_map,
        prob_maps=prob_maps,
    )
    scaled_image = image
    if image is not None:
        pil = Image.fromarray(image, mode="RGB").resize((new_w, new_h), Image.BILINEAR)
        scaled_image = np.asarray(pil, dtype=np.uint8)
    return scaled, scaled_image


def enrich_page(
    page: PageDocument, image: np.ndarray, config: RenderConfig
) -> tuple[PageDocument, np.ndarray]:
    """Optionally rescale page and image together, then render."""
    if config.resize_longest_side is not None:
        page, image = scale_page(page, image, config.resize_longest_side)
    return page, render_enriched(page, image, config)
