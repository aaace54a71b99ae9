"""Synthetic register generator for end-to-end testing at dataset scale.

Pages carry vertically stacked acts made of rectangular text lines; act
openings get a date-like transcription so the date rule recovers the
ground-truth flags exactly on clean text, while filler lines contain no
lexicon words at all. Ground-truth act polygons are the bounding boxes
of their member lines, the label map is their exact rasterization, and
the generator also emits simulated predictions (jittered act polygons,
flipped flags, corrupted transcriptions) controlled by the noise knobs.
Everything is deterministic for a fixed seed.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .documents import (
    Act,
    ActClass,
    DatasetSplit,
    PageDocument,
    TextLine,
    ValidationError,
    LABEL_BY_CLASS,
    save_image,
    save_label_map,
    save_page,
)
from .geometry import PixelGrid, Polygon, bounding_box, box_polygon, clamp_polygon, rasterize_mask

PAGE_MARGIN = 16
ACT_GAP = 10
ACT_PAD = 8
LINE_HEIGHT = 22
LINE_GAP = 6
MIN_LINE_WIDTH = 60

NUMBER_WORDS = (
    "deux", "trois", "quatre", "cinq", "six", "sept", "huit", "neuf",
    "dix", "onze", "douze", "quinze", "vingt", "trente",
)
MONTH_WORDS = (
    "janvier", "fevrier", "mars", "avril", "mai", "juin", "juillet",
    "aout", "septembre", "octobre", "novembre", "decembre",
)
FILLER_WORDS = (
    "signe", "presence", "temoins", "paroisse", "cure", "soussigne",
    "registre", "lecture", "faite", "baptise", "enfant", "legitime",
    "mariage", "defunt", "femme", "fils", "fille", "epouse", "veuve",
    "laboureur", "marguillier", "lesdits", "apres", "audit", "lieu",
)


@dataclass(frozen=True)
class NoiseConfig:
    flag_flip_prob: float = 0.0
    polygon_jitter: int = 0
    char_error_rate: float = 0.0

    def __post_init__(self) -> None:
        for name in ("flag_flip_prob", "char_error_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValidationError(f"{name} must lie in [0, 1]")
        if self.polygon_jitter < 0:
            raise ValidationError("polygon_jitter must be >= 0")


@dataclass(frozen=True)
class SynthConfig:
    pages: int = 20
    acts_per_page: tuple[int, int] = (1, 4)
    lines_per_act: tuple[int, int] = (2, 5)
    page_dims: tuple[int, int] = (640, 900)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    cross_page_act_prob: float = 0.0
    seed: int = 0
    split_name: str = "test"

    def __post_init__(self) -> None:
        if self.pages < 1:
            raise ValidationError("pages must be >= 1")
        for name in ("acts_per_page", "lines_per_act"):
            lo, hi = getattr(self, name)
            if lo < 1 or hi < lo:
                raise ValidationError(f"{name} range ({lo}, {hi}) is empty or invalid")
        if not 0.0 <= self.cross_page_act_prob <= 1.0:
            raise ValidationError("cross_page_act_prob must lie in [0, 1]")
        width, height = self.page_dims
        acts_hi = self.acts_per_page[1]
        lines_hi = self.lines_per_act[1]
        worst = (
            2 * PAGE_MARGIN
            + acts_hi * (2 * ACT_PAD + lines_hi * (LINE_HEIGHT + LINE_GAP))
            + (acts_hi - 1) * ACT_GAP
        )
        if worst > height:
            raise ValidationError(
                f"ranges infeasible for page_dims: worst-case layout needs "
                f"{worst}px of height, page has {height}"
            )
        if 2 * (PAGE_MARGIN + ACT_PAD) + MIN_LINE_WIDTH > width:
            raise ValidationError(f"page width {width} too small for text lines")

    @classmethod
    def from_dict(cls, obj: dict) -> "SynthConfig":
        noise = NoiseConfig(**obj.get("noise", {}))
        return cls(
            pages=int(obj.get("pages", 20)),
            acts_per_page=tuple(obj.get("acts_per_page", (1, 4))),
            lines_per_act=tuple(obj.get("lines_per_act", (2, 5))),
            page_dims=tuple(obj.get("page_dims", (640, 900))),
            noise=noise,
            cross_page_act_prob=float(obj.get("cross_page_act_prob", 0.0)),
            seed=int(obj.get("seed", 0)),
            split_name=str(obj.get("split_name", "test")),
        )

    @classmethod
    def from_json_file(cls, path: str | Path) -> "SynthConfig":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _date_text(rng: random.Random) -> str:
    day = rng.choice(NUMBER_WORDS)
    month = rng.choice(MONTH_WORDS)
    a, b = rng.choice(NUMBER_WORDS), rng.choice(NUMBER_WORDS)
    return f"le {day} {month}, mil {a} cent {b}"


def _filler_text(rng: random.Random) -> str:
    n = rng.randint(4, 8)
    return " ".join(rng.choice(FILLER_WORDS) for _ in range(n))


def _corrupt(text: str, rate: float, rng: random.Random) -> str:
    """Independent per-character substitute/delete/insert, each at rate/3."""
    if rate <= 0.0:
        return text
    alphabet = "abcdefghijklmnopqrstuvwxyz"
    out = []
    third = rate / 3.0
    for ch in text:
        r = rng.random()
        if r < third:
            out.append(rng.choice(alphabet))
        elif r < 2 * third:
            continue
        else:
            out.append(ch)
            if r < rate:
                out.append(rng.choice(alphabet))
    return "".join(out)


def _jitter_polygon(
    poly: Polygon, jitter: int, width: int, height: int, rng: random.Random
) -> Polygon:
    if jitter <= 0:
        return poly
    dx = rng.randint(-jitter, jitter)
    dy = rng.randint(-jitter, jitter)
    return clamp_polygon(poly.translated(dx, dy), width, height)


@dataclass
class _Part:
    act_class: ActClass
    n_lines: int

    @property
    def height(self) -> int:
        return 2 * ACT_PAD + self.n_lines * (LINE_HEIGHT + LINE_GAP)


def generate_dataset(config: SynthConfig) -> DatasetSplit:
    """Deterministically generate a split of synthetic pages."""
    rng = random.Random(config.seed)
    width, height = config.page_dims
    pages: list[PageDocument] = []
    pending_center = 0
    pending_end = False
    for pidx in range(config.pages):
        pid = f"p{pidx:04d}"
        parts: list[_Part] = []
        if pending_center > 0:
            pending_center -= 1
            if pending_center == 0:
                pending_end = True
            n_lines = rng.randint(*config.lines_per_act)
            parts = [_Part(ActClass.CENTER, n_lines)]
        else:
            n_acts = rng.randint(*config.acts_per_page)
            for k in range(n_acts):
                cls = ActClass.FULL
                if k == 0 and pending_end:
                    cls = ActClass.END
                parts.append(_Part(cls, rng.randint(*config.lines_per_act)))
            if pending_end:
                pending_end = False
            last = parts[-1]
            can_cross = (
                last.act_class is ActClass.FULL
                and pidx + 1 < config.pages
                and rng.random() < config.cross_page_act_prob
            )
            if can_cross:
                last.act_class = ActClass.START
                extra = 0
                while (
                    rng.random() < config.cross_page_act_prob
                    and pidx + 1 + extra < config.pages - 1
                ):
                    extra += 1
                pending_center = extra
                pending_end = extra == 0

        lines: list[TextLine] = []
        gt_acts: list[Act] = []
        label = np.zeros((height, width), dtype=np.uint8)
        y = PAGE_MARGIN
        for k, part in enumerate(parts):
            part_lines: list[TextLine] = []
            ly = y + ACT_PAD
            for j in range(part.n_lines):
                opens_act = j == 0 and part.act_class in (ActClass.FULL, ActClass.START)
                gt_text = _date_text(rng) if opens_act else _filler_text(rng)
                x0 = PAGE_MARGIN + ACT_PAD
                x1 = width - PAGE_MARGIN - ACT_PAD - rng.randint(0, 30)
                poly = box_polygon(x0, ly, x1, ly + LINE_HEIGHT)
                noisy = _corrupt(gt_text, config.noise.char_error_rate, rng)
                gt_flag = opens_act
                pred_flag = gt_flag
                if config.noise.flag_flip_prob > 0.0:
                    if rng.random() < config.noise.flag_flip_prob:
                        pred_flag = not gt_flag
                part_lines.append(
                    TextLine(
                        id=f"{pid}_l{len(lines) + len(part_lines)}",
                        polygon=poly,
                        transcription=noisy,
                        gt_transcription=gt_text,
                        is_first_line=pred_flag,
                        gt_first_line=gt_flag,
                    )
                )
                ly += LINE_HEIGHT + LINE_GAP
            boxes = [bounding_box(ln.polygon) for ln in part_lines]
            act_poly = box_polygon(
                min(b.x_min for b in boxes),
                min(b.y_min for b in boxes),
                max(b.x_max for b in boxes),
                max(b.y_max for b in boxes),
            )
            gt_acts.append(
                Act(id=f"{pid}_gt{k}", act_class=part.act_class, polygon=act_poly)
            )
            label[rasterize_mask(act_poly, width, height)] = LABEL_BY_CLASS[part.act_class]
            lines.extend(part_lines)
            y += part.height + ACT_GAP

        pred_acts = [
            Act(
                id=f"{pid}_pr{k}",
                act_class=act.act_class,
                polygon=_jitter_polygon(
                    act.polygon, config.noise.polygon_jitter, width, height, rng
                ),
                score=rng.uniform(0.5, 1.0),
            )
            for k, act in enumerate(gt_acts)
        ]
        pages.append(
            PageDocument(
                page_id=pid,
                width=width,
                height=height,
                lines=lines,
                gt_acts=gt_acts,
                pred_acts=pred_acts,
                label_map=PixelGrid.from_array(label),
                image_ref=f"{pid}.png",
                label_map_ref=f"{pid}.map.png",
            )
        )
    return DatasetSplit(name=config.split_name, pages=pages)


def render_page_image(page: PageDocument) -> np.ndarray:
    """Deterministic paper-like RGB background for a page."""
    yy, xx = np.mgrid[0 : page.height, 0 : page.width]
    v = (185 + (xx + 2 * yy) % 40).astype(np.uint8)
    return np.dstack([v, v - 8, v - 20])


def write_dataset(split: DatasetSplit, out_dir: str | Path) -> Path:
    """Write page JSONs, images, label maps and the ordered manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    names = []
    for page in split.pages:
        save_image(render_page_image(page), out / page.image_ref)
        save_label_map(page.label_map, out / page.label_map_ref)
        save_page(page, out / f"{page.page_id}.json")
        names.append(f"{page.page_id}.json")
    manifest = out / "manifest.txt"
    manifest.write_text("\n".join(names) + "\n", encoding="utf-8")
    return manifest
