"""Turn pixel label/probability maps into typed, scored act objects.

Each class plane of the label map is split into 8-connected components;
components above the area floor become acts whose polygon is the outer
boundary of the component traced along pixel edges, so re-rasterizing an
act reproduces its component exactly (holes filled). Scores come from
the mean class probability over the component when probability planes
are available, otherwise from the component's share of the page area.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from typing import Sequence

import numpy as np

from . import kernels
from .documents import Act, ActClass, PageDocument, ValidationError, LABEL_BY_CLASS
from .geometry import BoundingBox, PixelGrid, Polygon


class ScoreSource(str, Enum):
    MEAN_PROBABILITY = "mean_probability"
    AREA_FRACTION = "area_fraction"


@dataclass(frozen=True)
class PostprocessConfig:
    min_area: float | None = None  # None -> 0.1% of the page area
    prob_threshold: float | None = None
    score_source: ScoreSource | None = None  # None -> probability when available

    def __post_init__(self) -> None:
        if self.min_area is not None and self.min_area < 0:
            raise ValidationError("min_area must be >= 0")
        if self.prob_threshold is not None and not 0.0 <= self.prob_threshold <= 1.0:
            raise ValidationError("prob_threshold must lie in [0, 1]")

    def resolve_min_area(self, width: int, height: int) -> float:
        return self.min_area if self.min_area is not None else 0.001 * width * height


@dataclass
class Component:
    """One connected blob of a single class."""

    area: int
    bbox: BoundingBox
    pixels: np.ndarray  # (n, 2) int32 rows of (y, x)


def connected_components(grid: PixelGrid, class_id: int) -> list[Component]:
    """Maximal 8-connected components of the pixels labeled ``class_id``."""
    if not 1 <= class_id:
        raise ValidationError(f"class_id must be >= 1, got {class_id}")
    mask = np.ascontiguousarray(grid.data == class_id)
    labels, count = kernels.label_components(mask)
    out = []
    if count == 0:
        return out
    ys, xs = np.nonzero(labels)
    labs = labels[ys, xs]
    order = np.argsort(labs, kind="stable")
    ys, xs, labs = ys[order], xs[order], labs[order]
    starts = np.searchsorted(labs, np.arange(1, count + 2))
    for k in range(count):
        sel = slice(starts[k], starts[k + 1])
        cy, cx = ys[sel], xs[sel]
        out.append(
            Component(
                area=int(cy.size),
                bbox=BoundingBox(int(cx.min()), int(cy.min()), int(cx.max()), int(cy.max())),
                pixels=np.column_stack((cy, cx)).astype(np.int32),
            )
        )
    return out


def component_polygon(component: Component, width: int, height: int) -> Polygon:
    """Outer boundary of the component as a lattice polygon."""
    mask = np.zeros((height, width), dtype=bool)
    mask[component.pixels[:, 0], component.pixels[:, 1]] = True
    ring = kernels.trace_outer_boundary(mask)
    return Polygon.from_points(ring)


def _label_grid(page: PageDocument, config: PostprocessConfig) -> PixelGrid:
    if page.label_map is not None:
        return page.label_map
    if page.prob_maps:
        planes = np.stack(
            [
                page.prob_maps.get(cls, np.zeros((page.height, page.width), np.float32))
                for cls in ActClass
            ]
        )
        best = np.argmax(planes, axis=0).astype(np.uint8) + 1
        peak = planes.max(axis=0)
        if config.prob_threshold is not None:
            best[peak < config.prob_threshold] = 0
        best[peak <= 0.0] = 0
        return PixelGrid.from_array(best)
    raise ValidationError(f"page {page.page_id!r} has neither label map nor probability maps")


def components_to_acts(page: PageDocument, config: PostprocessConfig) -> list[Act]:
    """Extract scored acts of every class from the page's pixel maps."""
    grid = _label_grid(page, config)
    min_area = config.resolve_min_area(page.width, page.height)
    source = config.score_source
    if source is None:
        source = (
            ScoreSource.MEAN_PROBABILITY if page.prob_maps else ScoreSource.AREA_FRACTION
        )
    if source is ScoreSource.MEAN_PROBABILITY and not page.prob_maps:
        raise ValidationError(
            f"page {page.page_id!r}: mean-probability scoring needs probability maps"
        )
    acts = []
    page_area = page.width * page.height
    for cls in ActClass:
        comps = connected_components(grid, LABEL_BY_CLASS[cls])
        idx = 0
        for comp in comps:
            if comp.area < min_area:
                continue
            if source is ScoreSource.MEAN_PROBABILITY:
                plane = page.prob_maps.get(cls)
                if plane is None:
                    raise ValidationError(
                        f"page {page.page_id!r}: no probability map for class {cls.value!r}"
                    )
                score = float(plane[comp.pixels[:, 0], comp.pixels[:, 1]].mean())
            else:
                score = comp.area / page_area
            acts.append(
                Act(
                    id=f"{page.page_id}_{cls.value}_{idx}",
                    act_class=cls,
                    polygon=component_polygon(comp, page.width, page.height),
                    score=min(1.0, max(0.0, score)),
                )
            )
            idx += 1
    return acts


def postprocess_page(page: PageDocument, config: PostprocessConfig) -> PageDocument:
    """Copy of the page with pred_acts replaced by extracted objects."""
    return replace(page, pred_acts=components_to_acts(page, config))


def postprocess_pages(
    pages: Sequence[PageDocument], config: PostprocessConfig
) -> list[PageDocument]:
    return [postprocess_page(p, config) for p in pages]
