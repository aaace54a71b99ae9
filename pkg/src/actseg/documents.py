"""Canonical page data model and annotation/raster file I/O.

One JSON file per page holds the text lines (polygon + transcription),
ground-truth acts, predicted acts and optional references to the page
image, label map and per-class probability planes. Serialization is
canonical (sorted keys, integer coordinates), so save -> load -> save is
byte-identical.
"""

from __future__ import annotations

import json
import unicodedata
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

import numpy as np
from PIL import Image

from .geometry import PixelGrid, Polygon, clamp_polygon, is_self_intersecting


class ValidationError(ValueError):
    """Raised when an annotation file or raster violates the schema."""


class ActClass(str, Enum):
    FULL = "full"
    START = "start"
    CENTER = "center"
    END = "end"


#: label-map pixel value per act class (0 is background)
LABEL_BY_CLASS: dict[ActClass, int] = {
    ActClass.FULL: 1,
    ActClass.START: 2,
    ActClass.CENTER: 3,
    ActClass.END: 4,
}
CLASS_BY_LABEL = {v: k for k, v in LABEL_BY_CLASS.items()}
CLASS_COUNT = len(LABEL_BY_CLASS)


@dataclass
class TextLine:
    id: str
    polygon: Polygon
    transcription: str = ""
    gt_transcription: str | None = None
    is_first_line: bool | None = None
    gt_first_line: bool | None = None

    @property
    def transcription_lower(self) -> str:
        return self.transcription.lower()


@dataclass
class Act:
    id: str
    act_class: ActClass
    polygon: Polygon
    score: float | None = None


@dataclass(eq=False)
class PageDocument:
    page_id: str
    width: int
    height: int
    lines: list[TextLine] = field(default_factory=list)
    gt_acts: list[Act] = field(default_factory=list)
    pred_acts: list[Act] = field(default_factory=list)
    label_map: PixelGrid | None = None
    prob_maps: dict[ActClass, np.ndarray] | None = None
    image_ref: str | None = None
    label_map_ref: str | None = None
    prob_map_refs: dict[ActClass, str] | None = None
    split_x: int | None = None

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PageDocument):
            return NotImplemented
        if (
            self.page_id != other.page_id
            or self.width != other.width
            or self.height != other.height
            or self.lines != other.lines
            or self.gt_acts != other.gt_acts
            or self.pred_acts != other.pred_acts
            or self.label_map != other.label_map
            or self.image_ref != other.image_ref
            or self.label_map_ref != other.label_map_ref
            or self.prob_map_refs != other.prob_map_refs
            or self.split_x != other.split_x
        ):
            return False
        a, b = self.prob_maps, other.prob_maps
        if (a is None) != (b is None):
            return False
        if a is not None and b is not None:
            if a.keys() != b.keys():
                return False
            return all(np.array_equal(a[k], b[k]) for k in a)
        return True


@dataclass
class DatasetSplit:
    name: str
    pages: list[PageDocument]

    def __post_init__(self) -> None:
        if self.name not in ("train", "dev", "test"):
            raise ValidationError(f"unknown split name {self.name!r}")
        ids = [p.page_id for p in self.pages]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise ValidationError(f"duplicate page ids in split: {dupes}")


# ---------------------------------------------------------------------------
# schema helpers

_PAGE_KEYS = {
    "page_id", "width", "height", "lines", "gt_acts", "pred_acts",
    "image", "label_map", "prob_maps", "split_x",
}
_LINE_KEYS = {
    "id", "polygon", "transcription", "gt_transcription",
    "is_first_line", "gt_first_line",
}
_ACT_KEYS = {"id", "class", "polygon", "score"}


def _check_keys(obj: dict, allowed: set[str], what: str) -> None:
    extra = set(obj) - allowed
    if extra:
        raise ValidationError(f"{what}: unknown fields {sorted(extra)}")


def _parse_polygon(raw, owner: str, width: int, height: int) -> Polygon:
    if not isinstance(raw, list) or len(raw) < 3:
        raise ValidationError(f"{owner}: polygon needs at least 3 vertices")
    pts = []
    for v in raw:
        if not (isinstance(v, list) and len(v) == 2):
            raise ValidationError(f"{owner}: polygon vertex {v!r} is not an [x, y] pair")
        x, y = v
        for c in (x, y):
            if isinstance(c, bool) or not isinstance(c, (int, float)):
                raise ValidationError(f"{owner}: non-numeric coordinate {c!r}")
            if isinstance(c, float) and not c.is_integer():
                raise ValidationError(f"{owner}: fractional coordinate {c!r}")
        pts.append((int(x), int(y)))
    poly = Polygon.from_points(pts)
    if is_self_intersecting(poly):
        raise ValidationError(f"{owner}: self-intersecting polygon")
    return clamp_polygon(poly, width, height)


def _parse_line(raw: dict, width: int, height: int) -> TextLine:
    _check_keys(raw, _LINE_KEYS, f"line {raw.get('id', '?')!r}")
    lid = raw.get("id")
    if not isinstance(lid, str) or not lid:
        raise ValidationError("line without a valid id")
    text = raw.get("transcription", "")
    if not isinstance(text, str):
        raise ValidationError(f"line {lid!r}: transcription must be a string")
    gt_text = raw.get("gt_transcription")
    if gt_text is not None and not isinstance(gt_text, str):
        raise ValidationError(f"line {lid!r}: gt_transcription must be a string")
    for key in ("is_first_line", "gt_first_line"):
        if key in raw and not isinstance(raw[key], bool):
            raise ValidationError(f"line {lid!r}: {key} must be a boolean")
    return TextLine(
        id=lid,
        polygon=_parse_polygon(raw.get("polygon"), f"line {lid!r}", width, height),
        transcription=unicodedata.normalize("NFC", text),
        gt_transcription=(
            unicodedata.normalize("NFC", gt_text) if gt_text is not None else None
        ),
        is_first_line=raw.get("is_first_line"),
        gt_first_line=raw.get("gt_first_line"),
    )


def _parse_act(raw: dict, width: int, height: int, *, predicted: bool) -> Act:
    _check_keys(raw, _ACT_KEYS, f"act {raw.get('id', '?')!r}")
    aid = raw.get("id")
    if not isinstance(aid, str) or not aid:
        raise ValidationError("act without a valid id")
    cls_raw = raw.get("class")
    try:
        cls = ActClass(cls_raw)
    except ValueError:
        raise ValidationError(f"act {aid!r}: unknown class {cls_raw!r}") from None
    score = raw.get("score")
    if score is not None:
        if not predicted:
            raise ValidationError(f"act {aid!r}: ground-truth act carries a score")
        if isinstance(score, bool) or not isinstance(score, (int, float)):
            raise ValidationError(f"act {aid!r}: score must be a number")
        if not 0.0 <= score <= 1.0:
            raise ValidationError(f"act {aid!r}: score {score} outside [0, 1]")
        score = float(score)
    return Act(
        id=aid,
        act_class=cls,
        polygon=_parse_polygon(raw.get("polygon"), f"act {aid!r}", width, height),
        score=score,
    )


def page_from_dict(obj: dict) -> PageDocument:
    """Build a validated PageDocument from parsed JSON (no raster loading)."""
    if not isinstance(obj, dict):
        raise ValidationError("page file does not contain a JSON object")
    _check_keys(obj, _PAGE_KEYS, "page")
    for key in ("page_id", "width", "height"):
        if key not in obj:
            raise ValidationError(f"page: missing required field {key!r}")
    pid = obj["page_id"]
    if not isinstance(pid, str) or not pid:
        raise ValidationError("page: page_id must be a non-empty string")
    width, height = obj["width"], obj["height"]
    for name, v in (("width", width), ("height", height)):
        if isinstance(v, bool) or not isinstance(v, int) or v <= 0:
            raise ValidationError(f"page {pid!r}: {name} must be a positive integer")
    split_x = obj.get("split_x")
    if split_x is not None and (isinstance(split_x, bool) or not isinstance(split_x, int)):
        raise ValidationError(f"page {pid!r}: split_x must be an integer")
    lines = [_parse_line(r, width, height) for r in obj.get("lines", [])]
    gt_acts = [_parse_act(r, width, height, predicted=False) for r in obj.get("gt_acts", [])]
    pred_acts = [_parse_act(r, width, height, predicted=True) for r in obj.get("pred_acts", [])]
    for items, what in ((lines, "line"), (gt_acts, "gt act"), (pred_acts, "pred act")):
        ids = [m.id for m in items]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise ValidationError(f"page {pid!r}: duplicate {what} ids {dupes}")
    prob_refs = None
    if "prob_maps" in obj:
        raw_probs = obj["prob_maps"]
        if not isinstance(raw_probs, dict):
            raise ValidationError(f"page {pid!r}: prob_maps must be an object")
        prob_refs = {}
        for k, v in raw_probs.items():
            try:
                cls = ActClass(k)
            except ValueError:
                raise ValidationError(f"page {pid!r}: unknown prob_maps class {k!r}") from None
            if not isinstance(v, str):
                raise ValidationError(f"page {pid!r}: prob_maps entry must be a path string")
            prob_refs[cls] = v
    return PageDocument(
        page_id=pid,
        width=width,
        height=height,
        lines=lines,
        gt_acts=gt_acts,
        pred_acts=pred_acts,
        image_ref=obj.get("image"),
        label_map_ref=obj.get("label_map"),
        prob_map_refs=prob_refs,
        split_x=split_x,
    )


def page_to_dict(page: PageDocument) -> dict:
    """Serialize a PageDocument to its canonical JSON structure."""
    obj: dict = {
        "page_id": page.page_id,
        "width": page.width,
        "height": page.height,
        "lines": [],
        "gt_acts": [],
        "pred_acts": [],
    }
    for line in page.lines:
        rec: dict = {
            "id": line.id,
            "polygon": [[p.x, p.y] for p in line.polygon.vertices],
            "transcription": line.transcription,
        }
        if line.gt_transcription is not None:
            rec["gt_transcription"] = line.gt_transcription
        if line.is_first_line is not None:
            rec["is_first_line"] = line.is_first_line
        if line.gt_first_line is not None:
            rec["gt_first_line"] = line.gt_first_line
        obj["lines"].append(rec)
    for acts, key in ((page.gt_acts, "gt_acts"), (page.pred_acts, "pred_acts")):
        for act in acts:
            rec = {
                "id": act.id,
                "class": act.act_class.value,
                "polygon": [[p.x, p.y] for p in act.polygon.vertices],
            }
            if act.score is not None:
                rec["score"] = act.score
            obj[key].append(rec)
    if page.image_ref is not None:
        obj["image"] = page.image_ref
    if page.label_map_ref is not None:
        obj["label_map"] = page.label_map_ref
    if page.prob_map_refs is not None:
        obj["prob_maps"] = {c.value: p for c, p in page.prob_map_refs.items()}
    if page.split_x is not None:
        obj["split_x"] = page.split_x
    return obj


# ---------------------------------------------------------------------------
# file I/O


def load_page(
    annotation_file: str | Path,
    assets_dir: str | Path | None = None,
    *,
    label_map_dir: str | Path | None = None,
    prob_maps_dir: str | Path | None = None,
) -> PageDocument:
    """Load and validate one page; referenced rasters are loaded eagerly.

    Relative asset references resolve against ``assets_dir`` (default: the
    annotation file's directory); ``label_map_dir`` / ``prob_maps_dir``
    override the location of those specific rasters.
    """
    path = Path(annotation_file)
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc})") from exc
    try:
        page = page_from_dict(obj)
    except ValidationError as exc:
        raise ValidationError(f"{path}: {exc}") from None
    base = Path(assets_dir) if assets_dir is not None else path.parent
    if page.image_ref is not None:
        img_path = base / page.image_ref
        if not img_path.exists():
            raise ValidationError(f"{path}: referenced image {img_path} does not exist")
    if page.label_map_ref is not None:
        map_path = Path(label_map_dir or base) / page.label_map_ref
        if not map_path.exists():
            raise ValidationError(f"{path}: referenced label map {map_path} does not exist")
        grid = load_label_map(map_path, CLASS_COUNT)
        if (grid.width, grid.height) != (page.width, page.height):
            raise ValidationError(
                f"{path}: label map is {grid.width}x{grid.height}, "
                f"page is {page.width}x{page.height}"
            )
        page.label_map = grid
    if page.prob_map_refs is not None:
        probs: dict[ActClass, np.ndarray] = {}
        for cls, ref in page.prob_map_refs.items():
            prob_path = Path(prob_maps_dir or base) / ref
            if not prob_path.exists():
                raise ValidationError(
                    f"{path}: referenced probability map {prob_path} does not exist"
                )
            plane = load_prob_map(prob_path)
            if plane.shape != (page.height, page.width):
                raise ValidationError(
                    f"{path}: probability map {ref} shape {plane.shape} does not "
                    f"match page {page.width}x{page.height}"
                )
            probs[cls] = plane
        page.prob_maps = probs
    return page


def save_page(page: PageDocument, out_file: str | Path) -> None:
    """Write the canonical JSON serialization (rasters are not rewritten)."""
    text = json.dumps(page_to_dict(page), sort_keys=True, indent=2, ensure_ascii=False)
    Path(out_file).write_text(text + "\n", encoding="utf-8")


def load_label_map(image_file: str | Path, class_count: int) -> PixelGrid:
    """Read an 8-bit grayscale PNG whose pixel values are class labels."""
    img = Image.open(image_file)
    if img.mode != "L":
        raise ValidationError(
            f"{image_file}: label map must be 8-bit grayscale, got mode {img.mode!r}"
        )
    data = np.asarray(img, dtype=np.uint8)
    top = int(data.max()) if data.size else 0
    if top > class_count:
        raise ValidationError(
            f"{image_file}: label value {top} exceeds class count {class_count}"
        )
    return PixelGrid.from_array(data)


def save_label_map(grid: PixelGrid, out_file: str | Path) -> None:
    Image.fromarray(grid.data.astype(np.uint8), mode="L").save(out_file)


def load_prob_map(image_file: str | Path) -> np.ndarray:
    """Read a 16-bit grayscale PNG as a float32 plane in [0, 1]."""
    img = Image.open(image_file)
    if img.mode not in ("I", "I;16"):
        raise ValidationError(
            f"{image_file}: probability map must be 16-bit grayscale, got {img.mode!r}"
        )
    data = np.asarray(img).astype(np.float32)
    return data / 65535.0


def save_prob_map(plane: np.ndarray, out_file: str | Path) -> None:
    scaled = np.clip(np.round(plane * 65535.0), 0, 65535).astype(np.uint16)
    Image.fromarray(scaled).save(out_file)


def load_image(image_file: str | Path) -> np.ndarray:
    """Read a page image as an (h, w, 3) uint8 RGB array."""
    img = Image.open(image_file).convert("RGB")
    return np.asarray(img, dtype=np.uint8)


def save_image(arr: np.ndarray, out_file: str | Path) -> None:
    Image.fromarray(arr, mode="RGB").save(out_file)


def copy_with_lines(page: PageDocument, lines: list[TextLine]) -> PageDocument:
    """Shallow page copy with a replaced line list."""
    return replace(page, lines=lines)
