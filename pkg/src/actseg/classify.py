"""Rule-based first-line classification of text lines.

Two rules are supported, selected per dataset. The date rule counts how
many words of a line are number words, month names or digit strings and
flags the line when the count reaches a threshold (registers whose acts
open with a date, e.g. "le trente janvier, mil huit cent neuf"). The
key-phrase rule flags a line when any configured phrase occurs inside the
normalized transcription (chancery registers with formulaic openings).
"""

from __future__ import annotations

import json
import re
import unicodedata
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

from . import kernels
from .documents import DatasetSplit, PageDocument, TextLine, ValidationError, copy_with_lines


class RuleMode(str, Enum):
    DATE = "date"
    KEYPHRASE = "keyphrase"


_WS = re.compile(r"\s+")


def strip_accents(text: str) -> str:
    decomposed = unicodedata.normalize("NFD", text)
    return "".join(c for c in decomposed if not unicodedata.combining(c))


def normalize_text(text: str) -> str:
    """Lowercase, strip accents and collapse whitespace runs."""
    return _WS.sub(" ", strip_accents(text.lower())).strip()


def tokenize(transcription: str, normalize: bool = True) -> list[str]:
    """Whitespace tokens with leading/trailing punctuation stripped.

    Empty tokens are dropped; with ``normalize`` the tokens are lowercased
    and accent-stripped.
    """
    tokens = []
    for raw in transcription.split():
        tok = raw.strip("".join(c for c in raw if unicodedata.category(c).startswith("P")))
        if not tok:
            continue
        tokens.append(normalize_text(tok) if normalize else tok)
    return [t for t in tokens if t]


@dataclass(frozen=True)
class ClassifierConfig:
    mode: RuleMode
    date_threshold: int = 3
    number_lexicon: frozenset[str] = frozenset()
    month_lexicon: frozenset[str] = frozenset()
    key_phrases: tuple[str, ...] = ()
    normalize: bool = True
    max_edit_distance: int = 0

    def __post_init__(self) -> None:
        if self.date_threshold < 1:
            raise ValidationError("date_threshold must be >= 1")
        if self.max_edit_distance < 0:
            raise ValidationError("max_edit_distance must be >= 0")
        if self.mode is RuleMode.DATE and not (self.number_lexicon or self.month_lexicon):
            raise ValidationError("date rule needs a non-empty lexicon")
        if self.mode is RuleMode.KEYPHRASE and not self.key_phrases:
            raise ValidationError("key-phrase rule needs at least one phrase")

    @classmethod
    def from_dict(cls, obj: dict) -> "ClassifierConfig":
        try:
            mode = RuleMode(obj["mode"])
        except (KeyError, ValueError):
            raise ValidationError(f"unknown classifier mode {obj.get('mode')!r}") from None
        return cls(
            mode=mode,
            date_threshold=int(obj.get("date_threshold", 3)),
            number_lexicon=frozenset(obj.get("number_lexicon", [])),
            month_lexicon=frozenset(obj.get("month_lexicon", [])),
            key_phrases=tuple(obj.get("key_phrases", [])),
            normalize=bool(obj.get("normalize", True)),
            max_edit_distance=int(obj.get("max_edit_distance", 0)),
        )

    @classmethod
    def from_json_file(cls, path: str | Path) -> "ClassifierConfig":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def to_dict(self) -> dict:
        return {
            "mode": self.mode.value,
            "date_threshold": self.date_threshold,
            "number_lexicon": sorted(self.number_lexicon),
            "month_lexicon": sorted(self.month_lexicon),
            "key_phrases": list(self.key_phrases),
            "normalize": self.normalize,
            "max_edit_distance": self.max_edit_distance,
        }


def _packaged_config(name: str) -> ClassifierConfig:
    text = resources.files("actseg.data").joinpath(name).read_text(encoding="utf-8")
    return ClassifierConfig.from_dict(json.loads(text))


def default_date_config() -> ClassifierConfig:
    """French date rule: months plus number words (articles excluded)."""
    return _packaged_config("date_rule_fr.json")


def default_keyphrase_config() -> ClassifierConfig:
    """Formulaic chancery openings."""
    return _packaged_config("keyphrases_chancery.json")


def _prepare(text: str, config: ClassifierConfig) -> str:
    return normalize_text(text) if config.normalize else _WS.sub(" ", text).strip()


@lru_cache(maxsize=16)
def _date_lexicon(config: ClassifierConfig) -> frozenset[str]:
    words = set(config.number_lexicon) | set(config.month_lexicon)
    return frozenset(_prepare(w, config) for w in words)


@lru_cache(maxsize=16)
def _phrases(config: ClassifierConfig) -> tuple[str, ...]:
    return tuple(p for p in (_prepare(w, config) for w in config.key_phrases) if p)


def classify_transcription(text: str, config: ClassifierConfig) -> bool:
    """Apply the configured rule to one transcription."""
    if not text.strip():
        return False
    if config.mode is RuleMode.DATE:
        lexicon = _date_lexicon(config)
        hits = 0
        for tok in tokenize(text, normalize=config.normalize):
            if tok in lexicon or tok.isdigit():
                hits += 1
        return hits >= config.date_threshold
    haystack = _prepare(text, config)
    encoded = None
    for needle in _phrases(config):
        if needle in haystack:
            return True
        if config.max_edit_distance > 0:
            if encoded is None:
                encoded = kernels.encode_text(haystack)
            dist = kernels.min_window_distance(encoded, kernels.encode_text(needle))
            if dist <= config.max_edit_distance:
                return True
    return False


def classify_line(line: TextLine, config: ClassifierConfig) -> bool:
    """True when the line opens an act according to the configured rule."""
    return classify_transcription(line.transcription, config)


def classify_page(page: PageDocument, config: ClassifierConfig) -> PageDocument:
    """Copy of the page with ``is_first_line`` set on every line."""
    lines = [
        TextLine(
            id=ln.id,
            polygon=ln.polygon,
            transcription=ln.transcription,
            gt_transcription=ln.gt_transcription,
            is_first_line=classify_line(ln, config),
            gt_first_line=ln.gt_first_line,
        )
        for ln in page.lines
    ]
    return copy_with_lines(page, lines)


@dataclass(frozen=True)
class PRF:
    precision: float
    recall: float
    f1: float

    @classmethod
    def from_counts(cls, tp: int, fp: int, fn: int) -> "PRF":
        p = tp / (tp + fp) if tp + fp else 0.0
        r = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * p * r / (p + r) if p + r else 0.0
        return cls(p, r, f1)


def evaluate_classification(pages: DatasetSplit | Sequence[PageDocument]) -> PRF:
    """Precision/recall/F1 of the positive (first line) class.

    Every line must carry both a predicted and a reference flag.
    """
    if isinstance(pages, DatasetSplit):
        pages = pages.pages
    missing: list[str] = []
    tp = fp = fn = 0
    for page in pages:
        for line in page.lines:
            if line.is_first_line is None or line.gt_first_line is None:
                missing.append(line.id)
                continue
            if line.is_first_line and line.gt_first_line:
                tp += 1
            elif line.is_first_line:
                fp += 1
            elif line.gt_first_line:
                fn += 1
    if missing:
        raise ValidationError(f"lines without both flags: {missing}")
    return PRF.from_counts(tp, fp, fn)


def classify_pages(
    pages: Iterable[PageDocument], config: ClassifierConfig
) -> list[PageDocument]:
    return [classify_page(p, config) for p in pages]
