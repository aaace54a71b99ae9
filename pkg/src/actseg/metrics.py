"""Object, pixel and text metrics for act segmentation runs.

Object detection quality is measured COCO-style: predictions and ground
truth are paired one-to-one per class by rasterized IoU (greedy, best
score first), a precision-recall curve is swept over all predictions in
descending score order, and the area under the all-point-interpolated
curve gives AP at a fixed IoU threshold. AP50/AP75 use thresholds 0.50
and 0.75; mAP averages AP over thresholds 0.50:0.05:0.95. Pixel quality
is per-class IoU of the union masks, reported both dataset-aggregated
and page-averaged. Transcriptions are scored with aggregate CER/WER, and
act endings with a tolerance-based end-line match.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .classify import PRF, evaluate_classification
from .documents import Act, ActClass, PageDocument, ValidationError, LABEL_BY_CLASS
from .geometry import bounding_box, mask_iou, rasterize_mask

IOU_THRESHOLDS: tuple[float, ...] = tuple(t / 100 for t in range(50, 100, 5))
DEFAULT_END_LINE_TOLERANCE = 128


# ---------------------------------------------------------------------------
# one-to-one object matching


@dataclass
class MatchResult:
    pairs: list[tuple[str, str, float]]
    unmatched_preds: list[str]
    unmatched_gts: list[str]


def _pred_order(preds: Sequence[Act], areas: Sequence[int]) -> list[int]:
    """Indices in matching priority: score desc, area desc, id asc."""
    for act in preds:
        if act.score is None:
            raise ValidationError(f"predicted act {act.id!r} has no score")
    return sorted(
        range(len(preds)), key=lambda i: (-preds[i].score, -areas[i], preds[i].id)
    )


def _greedy_pairs(
    order: Sequence[int], iou: np.ndarray, threshold: float
) -> list[tuple[int, int, float]]:
    """Greedy claim of the best still-free ground truth per prediction."""
    taken = np.zeros(iou.shape[1], dtype=bool)
    pairs = []
    for pi in order:
        row = iou[pi]
        best_gi = -1
        best = -1.0
        for gi in range(row.shape[0]):
            if not taken[gi] and row[gi] > best:
                best = row[gi]
                best_gi = gi
        if best_gi >= 0 and best >= threshold:
            taken[best_gi] = True
            pairs.append((pi, best_gi, float(best)))
    return pairs


def match_objects(
    preds: Sequence[Act],
    gts: Sequence[Act],
    iou_threshold: float,
    page_dims: tuple[int, int],
) -> MatchResult:
    """Pair predictions with ground truth of the same class, one-to-one.

    Predictions claim in score order (ties: larger rasterized area, then
    id); each takes the free ground-truth object with the highest IoU,
    provided it reaches ``iou_threshold``.
    """
    width, height = page_dims
    pred_masks = [rasterize_mask(a.polygon, width, height) for a in preds]
    gt_masks = [rasterize_mask(a.polygon, width, height) for a in gts]
    areas = [int(m.sum()) for m in pred_masks]
    iou = np.zeros((len(preds), len(gts)))
    for pi, (pact, pmask) in enumerate(zip(preds, pred_masks)):
        for gi, (gact, gmask) in enumerate(zip(gts, gt_masks)):
            if pact.act_class is gact.act_class:
                iou[pi, gi] = mask_iou(pmask, gmask)
    order = _pred_order(preds, areas)
    pairs = _greedy_pairs(order, iou, iou_threshold)
    matched_p = {pi for pi, _, _ in pairs}
    matched_g = {gi for _, gi, _ in pairs}
    return MatchResult(
        pairs=[(preds[pi].id, gts[gi].id, v) for pi, gi, v in pairs],
        unmatched_preds=[a.id for i, a in enumerate(preds) if i not in matched_p],
        unmatched_gts=[a.id for i, a in enumerate(gts) if i not in matched_g],
    )


# ---------------------------------------------------------------------------
# average precision


@dataclass
class PageInstances:
    """Per-page matching inputs for one class: scores and the IoU matrix."""

    scores: list[float]
    areas: list[int]
    ids: list[str]
    iou: np.ndarray  # (n_preds, n_gts)
    page_id: str = ""

    @property
    def n_gts(self) -> int:
        return self.iou.shape[1]


def ap_from_instances(instances: Sequence[PageInstances], iou_threshold: float) -> float:
    """AP at one IoU threshold from per-page score/IoU instances.

    Sweeps all predictions dataset-wide in descending score order; each is
    a true positive when it greedily claims a free same-page ground truth
    at or above the threshold. The precision-recall curve is interpolated
    to be non-increasing and integrated over all recall increments.
    """
    n_gt = sum(inst.n_gts for inst in instances)
    entries = []
    for k, inst in enumerate(instances):
        for i, score in enumerate(inst.scores):
            entries.append((-score, -inst.areas[i], inst.ids[i], inst.page_id, k, i))
    if not entries:
        return 1.0 if n_gt == 0 else 0.0
    if n_gt == 0:
        return 0.0
    entries.sort()
    taken = [np.zeros(inst.n_gts, dtype=bool) for inst in instances]
    tp_flags = np.zeros(len(entries), dtype=bool)
    for rank, (_, _, _, _, k, i) in enumerate(entries):
        inst = instances[k]
        row = inst.iou[i]
        best_gi = -1
        best = -1.0
        for gi in range(inst.n_gts):
            if not taken[k][gi] and row[gi] > best:
                best = row[gi]
                best_gi = gi
        if best_gi >= 0 and best >= iou_threshold:
            taken[k][best_gi] = True
            tp_flags[rank] = True
    cum_tp = np.cumsum(tp_flags)
    precision = cum_tp / np.arange(1, len(entries) + 1)
    recall = cum_tp / n_gt
    # all-point interpolation: running max of precision from the right
    interp = np.maximum.accumulate(precision[::-1])[::-1]
    ap = 0.0
    prev_r = 0.0
    for p, r in zip(interp, recall):
        if r > prev_r:
            ap += (r - prev_r) * p
            prev_r = r
    return float(ap)


def collect_instances(
    pages: Sequence[PageDocument], act_class: ActClass
) -> list[PageInstances]:
    """Rasterize one class of acts on every page into matching instances."""
    out = []
    for page in pages:
        preds = [a for a in page.pred_acts if a.act_class is act_class]
        gts = [a for a in page.gt_acts if a.act_class is act_class]
        if not preds and not gts:
            continue
        pred_masks = [rasterize_mask(a.polygon, page.width, page.height) for a in preds]
        gt_masks = [rasterize_mask(a.polygon, page.width, page.height) for a in gts]
        iou = np.zeros((len(preds), len(gts)))
        for pi, pm in enumerate(pred_masks):
            for gi, gm in enumerate(gt_masks):
                iou[pi, gi] = mask_iou(pm, gm)
        for a in preds:
            if a.score is None:
                raise ValidationError(f"predicted act {a.id!r} has no score")
        out.append(
            PageInstances(
                scores=[a.score for a in preds],
                areas=[int(m.sum()) for m in pred_masks],
                ids=[a.id for a in preds],
                iou=iou,
                page_id=page.page_id,
            )
        )
    return out


def average_precision(
    pages: Sequence[PageDocument], act_class: ActClass, iou_threshold: float
) -> float:
    """Dataset-wide AP for one act class at one IoU threshold."""
    return ap_from_instances(collect_instances(pages, act_class), iou_threshold)


def mean_ap(pages: Sequence[PageDocument], act_class: ActClass) -> float:
    """AP averaged over IoU thresholds 0.50, 0.55, ..., 0.95."""
    instances = collect_instances(pages, act_class)
    return float(np.mean([ap_from_instances(instances, t) for t in IOU_THRESHOLDS]))


# ---------------------------------------------------------------------------
# pixel IoU


def _class_masks(page: PageDocument, act_class: ActClass) -> tuple[np.ndarray, np.ndarray]:
    """(gt, pred) union masks for one class on one page.

    Ground truth comes from gt_acts. Predictions come from pred_acts when
    the page has any; otherwise from the label map (raw model output not
    yet post-processed), else an empty mask.
    """
    gt = np.zeros((page.height, page.width), dtype=bool)
    for act in page.gt_acts:
        if act.act_class is act_class:
            gt |= rasterize_mask(act.polygon, page.width, page.height)
    pred = np.zeros_like(gt)
    if page.pred_acts:
        for act in page.pred_acts:
            if act.act_class is act_class:
                pred |= rasterize_mask(act.polygon, page.width, page.height)
    elif page.label_map is not None:
        pred = page.label_map.data == LABEL_BY_CLASS[act_class]
    return gt, pred


def dataset_pixel_iou(
    pages: Sequence[PageDocument], act_class: ActClass
) -> tuple[float, float]:
    """(aggregate, per-page mean) pixel IoU for one class.

    Aggregate is the sum of intersections over the sum of unions across
    all pages; the per-page mean averages each page's own IoU (an empty
    class on both sides of a page counts as 1.0).
    """
    inter_total = 0
    union_total = 0
    per_page = []
    for page in pages:
        gt, pred = _class_masks(page, act_class)
        inter = int(np.count_nonzero(gt & pred))
        union = int(np.count_nonzero(gt | pred))
        inter_total += inter
        union_total += union
        per_page.append(1.0 if union == 0 else inter / union)
    aggregate = 1.0 if union_total == 0 else inter_total / union_total
    page_mean = float(np.mean(per_page)) if per_page else 1.0
    return aggregate, page_mean


# ---------------------------------------------------------------------------
# CER / WER


def _edits(ref: Sequence[int] | np.ndarray, hyp: Sequence[int] | np.ndarray) -> int:
    return int(
        kernels.levenshtein(
            np.asarray(ref, dtype=np.int32), np.asarray(hyp, dtype=np.int32)
        )
    )


def cer_wer(references: Sequence[str], hypotheses: Sequence[str]) -> tuple[float, float]:
    """Aggregate character and word error rates over paired text lists.

    Edits are summed over all pairs and divided by the total reference
    length; spaces count as characters, words split on whitespace.
    """
    if len(references) != len(hypotheses):
        raise ValidationError(
            f"{len(references)} references vs {len(hypotheses)} hypotheses"
        )
    char_edits = char_total = word_edits = word_total = 0
    vocab: dict[str, int] = {}
    for ref, hyp in zip(references, hypotheses):
        char_total += len(ref)
        if ref != hyp:
            char_edits += int(
                kernels.levenshtein(kernels.encode_text(ref), kernels.encode_text(hyp))
            )
        ref_words = ref.split()
        hyp_words = hyp.split()
        word_total += len(ref_words)
        if ref_words != hyp_words:
            for w in ref_words + hyp_words:
                vocab.setdefault(w, len(vocab))
            word_edits += _edits(
                [vocab[w] for w in ref_words], [vocab[w] for w in hyp_words]
            )
    def rate(edits: int, total: int) -> float:
        if total == 0:
            return 0.0 if edits == 0 else 1.0
        return edits / total
    return rate(char_edits, char_total), rate(word_edits, word_total)


# ---------------------------------------------------------------------------
# end-of-act lines


@dataclass(frozen=True)
class EndLine:
    y: int
    x_span: tuple[int, int]


def end_lines(acts: Iterable[Act]) -> list[EndLine]:
    """Horizontal act-ending lines of full acts and act ends."""
    out = []
    for act in acts:
        if act.act_class in (ActClass.FULL, ActClass.END):
            box = bounding_box(act.polygon)
            out.append(EndLine(y=box.y_max, x_span=(box.x_min, box.x_max)))
    return out


def end_line_metric(
    pred_lines: Sequence[EndLine],
    gt_lines: Sequence[EndLine],
    tolerance: int = DEFAULT_END_LINE_TOLERANCE,
) -> PRF:
    """One-to-one end-line matching within a vertical pixel tolerance.

    A pair is a candidate when |y_pred - y_gt| <= tolerance and the x
    spans overlap (closed intervals); candidates are accepted greedily in
    ascending |y delta|. Both sides empty scores 1.0 across the board.
    """
    if not pred_lines and not gt_lines:
        return PRF(1.0, 1.0, 1.0)
    candidates = []
    for pi, p in enumerate(pred_lines):
        for gi, g in enumerate(gt_lines):
            dy = abs(p.y - g.y)
            if dy <= tolerance and p.x_span[0] <= g.x_span[1] and g.x_span[0] <= p.x_span[1]:
                candidates.append((dy, pi, gi))
    candidates.sort()
    used_p: set[int] = set()
    used_g: set[int] = set()
    matches = 0
    for _, pi, gi in candidates:
        if pi in used_p or gi in used_g:
            continue
        used_p.add(pi)
        used_g.add(gi)
        matches += 1
    return PRF.from_counts(matches, len(pred_lines) - matches, len(gt_lines) - matches)


# ---------------------------------------------------------------------------
# full report


@dataclass
class ClassMetrics:
    pixel_iou: float
    pixel_iou_page_mean: float
    ap50: float
    ap75: float
    map: float


@dataclass
class TextScores:
    cer: float
    wer: float


@dataclass
class EndLineScores:
    precision: float
    recall: float
    f1: float
    tolerance: int


@dataclass
class DetectionRates:
    """How much ground truth was found at all (IoU 0.5, class-aware)."""

    act_level: float
    page_level: float


@dataclass
class EvalReport:
    classes: dict[str, ClassMetrics] = field(default_factory=dict)
    line_classification: PRF | None = None
    text: TextScores | None = None
    end_line: EndLineScores | None = None
    detection: DetectionRates | None = None

    def to_dict(self) -> dict:
        obj: dict = {
            "classes": {
                name: {
                    "pixel_iou": m.pixel_iou,
                    "pixel_iou_page_mean": m.pixel_iou_page_mean,
                    "ap50": m.ap50,
                    "ap75": m.ap75,
                    "map": m.map,
                }
                for name, m in self.classes.items()
            }
        }
        obj["line_classification"] = (
            None
            if self.line_classification is None
            else {
                "precision": self.line_classification.precision,
                "recall": self.line_classification.recall,
                "f1": self.line_classification.f1,
            }
        )
        obj["text"] = (
            None if self.text is None else {"cer": self.text.cer, "wer": self.text.wer}
        )
        obj["end_line"] = (
            None
            if self.end_line is None
            else {
                "precision": self.end_line.precision,
                "recall": self.end_line.recall,
                "f1": self.end_line.f1,
                "tolerance": self.end_line.tolerance,
            }
        )
        obj["detection"] = (
            None
            if self.detection is None
            else {
                "act_level": self.detection.act_level,
                "page_level": self.detection.page_level,
            }
        )
        return obj

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"


def evaluate_pages(
    pages: Sequence[PageDocument],
    tolerance: int = DEFAULT_END_LINE_TOLERANCE,
) -> EvalReport:
    """Compute the full report over a page set."""
    report = EvalReport()
    present = [
        cls
        for cls in ActClass
        if any(
            a.act_class is cls for p in pages for a in (*p.gt_acts, *p.pred_acts)
        )
    ]
    pages_with_gt = 0
    pages_detected = 0
    gt_total = 0
    gt_matched = 0
    for cls in present:
        instances = collect_instances(pages, cls)
        aps = {t: ap_from_instances(instances, t) for t in IOU_THRESHOLDS}
        agg, page_mean = dataset_pixel_iou(pages, cls)
        report.classes[cls.value] = ClassMetrics(
            pixel_iou=agg,
            pixel_iou_page_mean=page_mean,
            ap50=aps[0.50],
            ap75=aps[0.75],
            map=float(np.mean(list(aps.values()))),
        )
    for page in pages:
        if not page.gt_acts:
            continue
        pages_with_gt += 1
        gt_total += len(page.gt_acts)
        matched_here = 0
        for cls in present:
            preds = [a for a in page.pred_acts if a.act_class is cls]
            gts = [a for a in page.gt_acts if a.act_class is cls]
            if not gts:
                continue
            res = match_objects(preds, gts, 0.5, (page.width, page.height))
            matched_here += len(res.pairs)
        gt_matched += matched_here
        if matched_here:
            pages_detected += 1
    if gt_total:
        report.detection = DetectionRates(
            act_level=gt_matched / gt_total,
            page_level=pages_detected / pages_with_gt,
        )
    flagged = [ln for p in pages for ln in p.lines]
    if flagged and all(
        ln.is_first_line is not None and ln.gt_first_line is not None for ln in flagged
    ):
        report.line_classification = evaluate_classification(pages)
    elif any(ln.gt_first_line is not None for ln in flagged):
        raise ValidationError(
            "some lines carry reference flags but not all lines have both "
            "predicted and reference flags; classify the pages first"
        )
    text_pairs = [
        (ln.gt_transcription, ln.transcription)
        for p in pages
        for ln in p.lines
        if ln.gt_transcription is not None
    ]
    if text_pairs:
        cer, wer = cer_wer([r for r, _ in text_pairs], [h for _, h in text_pairs])
        report.text = TextScores(cer=cer, wer=wer)
    preds = [el for p in pages for el in end_lines(p.pred_acts)]
    gts = [el for p in pages for el in end_lines(p.gt_acts)]
    prf = end_line_metric(preds, gts, tolerance)
    report.end_line = EndLineScores(prf.precision, prf.recall, prf.f1, tolerance)
    return report


def format_report_table(report: EvalReport) -> str:
    """Aligned plain-text rendering: class rows by IoU/AP columns."""
    lines = []
    header = f"{'Class':<10} {'IoU':>7} {'PgIoU':>7} {'AP50':>7} {'AP75':>7} {'mAP':>7}"
    lines.append(header)
    lines.append("-" * len(header))
    for cls in ActClass:
        m = report.classes.get(cls.value)
        if m is None:
            continue
        lines.append(
            f"{cls.value:<10} {m.pixel_iou:>7.4f} {m.pixel_iou_page_mean:>7.4f} "
            f"{m.ap50:>7.4f} {m.ap75:>7.4f} {m.map:>7.4f}"
        )
    if report.line_classification is not None:
        lc = report.line_classification
        lines.append("")
        lines.append(
            f"first-line classification  P={lc.precision:.4f} R={lc.recall:.4f} "
            f"F1={lc.f1:.4f}"
        )
    if report.text is not None:
        lines.append(f"text                       CER={report.text.cer:.4f} WER={report.text.wer:.4f}")
    if report.end_line is not None:
        el = report.end_line
        lines.append(
            f"end lines (tol={el.tolerance:>4}px)    P={el.precision:.4f} "
            f"R={el.recall:.4f} F1={el.f1:.4f}"
        )
    if report.detection is not None:
        det = report.detection
        lines.append(
            f"detection rate @IoU0.5     acts={det.act_level:.4f} "
            f"pages={det.page_level:.4f}"
        )
    return "\n".join(lines) + "\n"
