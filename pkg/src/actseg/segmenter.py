"""Text-only act segmentation from classified lines and reading order.

Lines are grouped per page: everything before the first flagged line is
a trailing act-end from the previous page; each flagged line opens a new
group. Interior groups are full acts; the last group becomes an act
start when the following page opens with an unflagged line (the act
continues there); a page with no flagged line at all is a single act
center. Act geometry is the padded bounding box of the member lines.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Sequence

from .documents import Act, ActClass, PageDocument, TextLine, ValidationError
from .geometry import Polygon, bounding_box, box_polygon


class ReadingOrder(str, Enum):
    TOP_TO_BOTTOM = "top"
    TWO_COLUMNS = "twocol"


@dataclass(frozen=True)
class ReadingOrderConfig:
    order: ReadingOrder = ReadingOrder.TOP_TO_BOTTOM
    split_x: int | None = None

    def __post_init__(self) -> None:
        if self.order is ReadingOrder.TWO_COLUMNS and self.split_x is None:
            raise ValidationError("two-column reading order needs split_x")


def reading_order(page: PageDocument, config: ReadingOrderConfig) -> list[TextLine]:
    """Lines in reading sequence (top-to-bottom, or left column first)."""

    def key(line: TextLine) -> tuple[float, float]:
        cx, cy = line.polygon.centroid()
        return (cy, cx)

    if config.order is ReadingOrder.TOP_TO_BOTTOM:
        return sorted(page.lines, key=key)
    split_x = config.split_x
    if not 0 < split_x < page.width:
        raise ValidationError(
            f"split_x {split_x} outside page {page.page_id!r} of width {page.width}"
        )
    left = [ln for ln in page.lines if ln.polygon.centroid()[0] < split_x]
    right = [ln for ln in page.lines if ln.polygon.centroid()[0] >= split_x]
    return sorted(left, key=key) + sorted(right, key=key)


def _group_lines(ordered: Sequence[TextLine]) -> list[list[TextLine]]:
    """Split an ordered line sequence at flagged lines.

    The first group holds the lines before the first flag and may be
    empty; every later group starts with a flagged line.
    """
    groups: list[list[TextLine]] = [[]]
    for line in ordered:
        if line.is_first_line is None:
            raise ValidationError(f"line {line.id!r} is not classified yet")
        if line.is_first_line:
            groups.append([line])
        else:
            groups[-1].append(line)
    return groups


def _group_polygon(
    lines: Sequence[TextLine], page: PageDocument, margin: int
) -> Polygon:
    boxes = [bounding_box(ln.polygon) for ln in lines]
    x0 = min(b.x_min for b in boxes) - margin
    y0 = min(b.y_min for b in boxes) - margin
    x1 = max(b.x_max for b in boxes) + margin
    y1 = max(b.y_max for b in boxes) + margin
    return box_polygon(
        max(0, x0), max(0, y0), min(page.width, x1), min(page.height, y1)
    )


def _page_starts_unflagged(page: PageDocument, config: ReadingOrderConfig) -> bool:
    ordered = reading_order(page, config)
    if not ordered:
        return False
    first = ordered[0]
    if first.is_first_line is None:
        raise ValidationError(f"line {first.id!r} is not classified yet")
    return not first.is_first_line


def segment_by_keyphrases(
    pages: Sequence[PageDocument],
    config: ReadingOrderConfig = ReadingOrderConfig(),
    margin: int = 0,
) -> list[PageDocument]:
    """Predict typed acts for an ordered page stream.

    Pages must arrive in document order: typing the last act of a page
    looks one page ahead to decide between a full act and an act start.
    All predicted acts carry score 1.0.
    """
    out = []
    for idx, page in enumerate(pages):
        ordered = reading_order(page, config)
        groups = _group_lines(ordered)
        head, starts = groups[0], groups[1:]
        acts: list[Act] = []

        def add(lines: list[TextLine], cls: ActClass) -> None:
            acts.append(
                Act(
                    id=f"{page.page_id}_act{len(acts)}",
                    act_class=cls,
                    polygon=_group_polygon(lines, page, margin),
                    score=1.0,
                )
            )

        if not starts:
            if head:
                add(head, ActClass.CENTER)
        else:
            if head:
                add(head, ActClass.END)
            for group in starts[:-1]:
                add(group, ActClass.FULL)
            last_cls = ActClass.FULL
            if idx + 1 < len(pages) and _page_starts_unflagged(pages[idx + 1], config):
                last_cls = ActClass.START
            add(starts[-1], last_cls)
        out.append(replace(page, pred_acts=acts))
    return out


def read_manifest(path: str | Path) -> list[Path]:
    """Ordered page JSON paths of one register (relative to the manifest)."""
    manifest = Path(path)
    base = manifest.parent
    out = []
    for raw in manifest.read_text(encoding="utf-8").splitlines():
        name = raw.strip()
        if not name or name.startswith("#"):
            continue
        p = Path(name)
        out.append(p if p.is_absolute() else base / p)
    return out
