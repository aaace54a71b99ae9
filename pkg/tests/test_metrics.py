import json
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from actseg.classify import PRF
from actseg.documents import Act, ActClass, PageDocument, TextLine, ValidationError
from actseg.geometry import box_polygon, mask_iou, rasterize_mask
from actseg.metrics import (
    EndLine,
    IOU_THRESHOLDS,
    PageInstances,
    ap_from_instances,
    average_precision,
    cer_wer,
    dataset_pixel_iou,
    end_line_metric,
    end_lines,
    evaluate_pages,
    format_report_table,
    match_objects,
    mean_ap,
)


def act(aid, x0, y0, x1, y1, cls=ActClass.FULL, score=None):
    return Act(id=aid, act_class=cls, polygon=box_polygon(x0, y0, x1, y1), score=score)


def page(pid, preds, gts, w=100, h=100):
    return PageDocument(page_id=pid, width=w, height=h, pred_acts=preds, gt_acts=gts)


def random_instances(rng, max_preds=6, max_gts=6):
    pages = []
    for pidx in range(rng.randint(1, 3)):
        n_p = rng.randint(0, max_preds)
        n_g = rng.randint(0, max_gts)
        iou = np.array(
            [[round(rng.random(), 2) for _ in range(n_g)] for _ in range(n_p)]
        ).reshape(n_p, n_g)
        scores = [round(rng.choice([0.3, 0.5, 0.7, 0.7, 0.9, rng.random()]), 3) for _ in range(n_p)]
        areas = [rng.randint(1, 50) for _ in range(n_p)]
        ids = [f"d{pidx}_{i}" for i in range(n_p)]
        pages.append(
            {
                "scores": scores,
                "areas": areas,
                "ids": ids,
                "page_id": f"pg{pidx}",
                "iou": iou.tolist(),
                "n_gt": n_g,
            }
        )
    return pages


def to_page_instances(raw):
    return [
        PageInstances(
            scores=list(r["scores"]),
            areas=list(r["areas"]),
            ids=list(r["ids"]),
            iou=np.array(r["iou"], dtype=float).reshape(len(r["scores"]), r["n_gt"]),
            page_id=r["page_id"],
        )
        for r in raw
    ]


class TestMatchObjects:
    def test_identical_sets_match_at_high_threshold(self):
        gts = [act("g0", 0, 0, 20, 20), act("g1", 0, 40, 20, 60)]
        preds = [act("p0", 0, 0, 20, 20, score=0.4), act("p1", 0, 40, 20, 60, score=0.9)]
        res = match_objects(preds, gts, 0.95, (100, 100))
        assert sorted((p, g) for p, g, _ in res.pairs) == [("p0", "g0"), ("p1", "g1")]
        assert res.unmatched_preds == [] and res.unmatched_gts == []

    def test_argmax_rule(self):
        # one prediction overlapping two ground truths at IoU ~0.7 and ~0.6
        pred = act("p0", 0, 0, 100, 70, score=0.5)
        g_hi = act("g_hi", 0, 0, 100, 82)  # iou 70/82
        g_lo = act("g_lo", 0, 0, 100, 100)  # iou 70/100
        res = match_objects([pred], [g_hi, g_lo], 0.5, (100, 100))
        assert res.pairs[0][:2] == ("p0", "g_hi")
        assert res.unmatched_gts == ["g_lo"]

    def test_one_to_one(self):
        gt = [act("g0", 0, 0, 50, 50)]
        preds = [
            act("p0", 0, 0, 50, 50, score=0.9),
            act("p1", 1, 0, 51, 50, score=0.8),
        ]
        res = match_objects(preds, gt, 0.5, (100, 100))
        assert len(res.pairs) == 1
        assert res.pairs[0][:2] == ("p0", "g0")
        assert res.unmatched_preds == ["p1"]

    def test_class_aware(self):
        gt = [act("g0", 0, 0, 50, 50, cls=ActClass.FULL)]
        pred = [act("p0", 0, 0, 50, 50, cls=ActClass.START, score=1.0)]
        res = match_objects(pred, gt, 0.5, (100, 100))
        assert res.pairs == []

    def test_missing_score_rejected(self):
        with pytest.raises(ValidationError, match="p0"):
            match_objects([act("p0", 0, 0, 10, 10)], [], 0.5, (20, 20))

    def test_matches_exhaustive_priority_oracle(self):
        rng = random.Random(77)
        for _ in range(200):
            n_p = rng.randint(0, 3)
            n_g = rng.randint(0, 3)
            preds = []
            gts = [
                act(f"g{i}", *sorted_box(rng), cls=ActClass.FULL) for i in range(n_g)
            ]
            for i in range(n_p):
                preds.append(
                    act(f"p{i}", *sorted_box(rng), cls=ActClass.FULL,
                        score=rng.choice([0.5, 0.7, 0.9]))
                )
            threshold = rng.choice([0.3, 0.5])
            res = match_objects(preds, gts, threshold, (30, 30))
            # rebuild inputs independently for the oracle
            pmasks = [rasterize_mask(p.polygon, 30, 30) for p in preds]
            gmasks = [rasterize_mask(g.polygon, 30, 30) for g in gts]
            iou = [[mask_iou(pm, gm) for gm in gmasks] for pm in pmasks]
            areas = [int(m.sum()) for m in pmasks]
            order = sorted(
                range(n_p), key=lambda i: (-preds[i].score, -areas[i], preds[i].id)
            )
            expected = oracles.priority_assignment(order, iou, threshold)
            got = sorted((p, g) for p, g, _ in res.pairs)
            want = sorted((preds[pi].id, gts[gi].id) for pi, gi in expected)
            assert got == want


def sorted_box(rng):
    x0 = rng.randint(0, 20)
    y0 = rng.randint(0, 20)
    return x0, y0, x0 + rng.randint(2, 10), y0 + rng.randint(2, 10)


class TestAveragePrecision:
    def test_worked_case(self):
        inst = PageInstances(
            scores=[0.9, 0.8, 0.7],
            areas=[10, 10, 10],
            ids=["a", "b", "c"],
            iou=np.array([[1.0, 0.0], [0.2, 0.0], [0.0, 1.0]]),
            page_id="p",
        )
        ap = ap_from_instances([inst], 0.5)
        assert ap == pytest.approx(0.5 + 0.5 * (2 / 3), abs=1e-12)

    def test_perfect_predictions(self):
        pages = [page("p", [act("p0", 0, 0, 20, 20, score=0.7)], [act("g0", 0, 0, 20, 20)])]
        for t in IOU_THRESHOLDS:
            assert average_precision(pages, ActClass.FULL, t) == 1.0
        assert mean_ap(pages, ActClass.FULL) == 1.0

    def test_empty_conventions(self):
        assert ap_from_instances([], 0.5) == 1.0
        only_gt = PageInstances([], [], [], np.zeros((0, 2)), "p")
        assert ap_from_instances([only_gt], 0.5) == 0.0
        only_pred = PageInstances([0.5], [3], ["p0"], np.zeros((1, 0)), "p")
        assert ap_from_instances([only_pred], 0.5) == 0.0

    def test_threshold_monotone(self):
        rng = random.Random(11)
        for _ in range(30):
            raw = random_instances(rng)
            inst = to_page_instances(raw)
            aps = [ap_from_instances(inst, t) for t in IOU_THRESHOLDS]
            assert all(a >= b - 1e-12 for a, b in zip(aps, aps[1:]))

    def test_matches_reference_sweep_on_random_instances(self):
        rng = random.Random(2024)
        for _ in range(200):
            raw = random_instances(rng)
            inst = to_page_instances(raw)
            t = rng.choice([0.3, 0.5, 0.75, 0.9])
            assert ap_from_instances(inst, t) == pytest.approx(
                oracles.average_precision(raw, t), abs=1e-9
            )

    def test_zero_overlap_low_score_pred_never_raises_ap(self):
        rng = random.Random(5)
        for _ in range(30):
            raw = random_instances(rng, max_preds=4, max_gts=4)
            inst = to_page_instances(raw)
            base = ap_from_instances(inst, 0.5)
            extra = raw[0]
            worst = min(
                (s for r in raw for s in r["scores"]), default=0.1
            )
            extra2 = dict(extra)
            extra2["scores"] = list(extra["scores"]) + [worst / 2]
            extra2["areas"] = list(extra["areas"]) + [1]
            extra2["ids"] = list(extra["ids"]) + ["zzz_extra"]
            extra2["iou"] = [list(r) + [] for r in extra["iou"]] + [[0.0] * extra["n_gt"]]
            raw2 = [extra2] + raw[1:]
            inst2 = to_page_instances(raw2)
            assert ap_from_instances(inst2, 0.5) <= base + 1e-12

    def test_map_uniform_iou_convention(self):
        # 8-wide boxes shifted by 2px give IoU exactly 0.6
        pages = [
            page(
                "p",
                [act("p0", 12, 10, 20, 40, score=0.9)],
                [act("g0", 10, 10, 18, 40)],
            )
        ]
        assert average_precision(pages, ActClass.FULL, 0.5) == 1.0
        assert average_precision(pages, ActClass.FULL, 0.60) == 1.0
        assert average_precision(pages, ActClass.FULL, 0.65) == 0.0
        assert mean_ap(pages, ActClass.FULL) == pytest.approx(0.3, abs=1e-9)


class TestPixelIou:
    def test_identical(self):
        pages = [page("p", [act("p0", 5, 5, 50, 50, score=1.0)], [act("g0", 5, 5, 50, 50)])]
        agg, per_page = dataset_pixel_iou(pages, ActClass.FULL)
        assert agg == 1.0 and per_page == 1.0

    def test_two_page_aggregate_vs_mean(self):
        p1 = page("p1", [act("a", 0, 0, 10, 10, score=1.0)], [act("b", 0, 0, 10, 10)])
        p2 = page("p2", [act("c", 0, 0, 10, 10, score=1.0)], [act("d", 50, 50, 60, 60)])
        agg, per_page = dataset_pixel_iou([p1, p2], ActClass.FULL)
        assert agg == pytest.approx(1 / 3)
        assert per_page == pytest.approx(0.5)

    def test_absent_class_convention(self):
        pages = [page("p", [], [])]
        agg, per_page = dataset_pixel_iou(pages, ActClass.CENTER)
        assert agg == 1.0 and per_page == 1.0

    def test_label_map_fallback_when_no_pred_acts(self):
        from actseg.geometry import PixelGrid

        p = page("p", [], [act("g0", 0, 0, 10, 10)], w=20, h=20)
        grid = np.zeros((20, 20), np.uint8)
        grid[rasterize_mask(box_polygon(0, 0, 10, 10), 20, 20)] = 1
        p.label_map = PixelGrid.from_array(grid)
        agg, _ = dataset_pixel_iou([p], ActClass.FULL)
        assert agg == 1.0


class TestCerWer:
    def test_identical(self):
        assert cer_wer(["bonjour le monde"], ["bonjour le monde"]) == (0.0, 0.0)

    def test_chat_chut(self):
        cer, _ = cer_wer(["chat"], ["chut"])
        assert cer == pytest.approx(0.25)

    def test_trente_example(self):
        cer, wer = cer_wer(["le trente un"], ["le trent un"])
        assert cer == pytest.approx(1 / 12)
        assert wer == pytest.approx(1 / 3)

    def test_aggregation_order_invariant(self):
        refs = ["abc", "le deux mars", "xyz"]
        hyps = ["abd", "le deu mars", "xyz"]
        a = cer_wer(refs, hyps)
        b = cer_wer(refs[::-1], hyps[::-1])
        assert a == b

    def test_length_mismatch(self):
        with pytest.raises(ValidationError):
            cer_wer(["a"], ["a", "b"])

    def test_empty_reference_contributes_edits(self):
        cer, wer = cer_wer(["", "abcd"], ["xy", "abcd"])
        assert cer == pytest.approx(2 / 4)

    def test_all_empty_refs(self):
        assert cer_wer([""], [""]) == (0.0, 0.0)
        cer, wer = cer_wer([""], ["ab"])
        assert cer == 1.0

    def test_against_oracle_random(self):
        rng = random.Random(8)
        for _ in range(25):
            ref = "".join(rng.choice("ab c") for _ in range(rng.randint(0, 10)))
            hyp = "".join(rng.choice("ab c") for _ in range(rng.randint(0, 10)))
            cer, wer = cer_wer([ref], [hyp])
            exp_c = oracles.edit_distance(ref, hyp)
            exp_w = oracles.edit_distance(ref.split(), hyp.split())
            if len(ref) > 0:
                assert cer == pytest.approx(exp_c / len(ref))
            if len(ref.split()) > 0:
                assert wer == pytest.approx(exp_w / len(ref.split()))


class TestEndLines:
    def test_full_act_end_line(self):
        lines = end_lines([act("a", 10, 20, 100, 200)])
        assert lines == [EndLine(y=200, x_span=(10, 100))]

    def test_start_act_filtered(self):
        assert end_lines([act("a", 0, 0, 10, 10, cls=ActClass.START)]) == []

    def test_counts_by_class(self):
        acts = [
            act("a", 0, 0, 10, 10, cls=ActClass.FULL),
            act("b", 0, 20, 10, 30, cls=ActClass.FULL),
            act("c", 0, 40, 10, 50, cls=ActClass.END),
            act("d", 0, 60, 10, 70, cls=ActClass.START),
        ]
        assert len(end_lines(acts)) == 3

    def test_tolerance_boundaries(self):
        gt = [EndLine(y=300, x_span=(0, 100))]
        assert end_line_metric([EndLine(427, (0, 100))], gt, 128).recall == 1.0
        assert end_line_metric([EndLine(429, (0, 100))], gt, 128).recall == 0.0
        assert end_line_metric([EndLine(428, (0, 100))], gt, 128).recall == 1.0

    def test_x_span_overlap_required(self):
        gt = [EndLine(y=300, x_span=(0, 100))]
        pred = [EndLine(y=300, x_span=(101, 200))]
        assert end_line_metric(pred, gt, 128).f1 == 0.0

    def test_one_to_one(self):
        gt = [EndLine(y=300, x_span=(0, 100))]
        preds = [EndLine(310, (0, 100)), EndLine(305, (0, 100))]
        prf = end_line_metric(preds, gt, 128)
        assert prf.recall == 1.0
        assert prf.precision == pytest.approx(0.5)

    def test_closest_pair_wins(self):
        gts = [EndLine(300, (0, 100)), EndLine(400, (0, 100))]
        preds = [EndLine(390, (0, 100))]
        prf = end_line_metric(preds, gts, 128)
        assert prf.precision == 1.0 and prf.recall == pytest.approx(0.5)

    def test_empty_conventions(self):
        assert end_line_metric([], [], 128) == PRF(1.0, 1.0, 1.0)
        assert end_line_metric([], [EndLine(1, (0, 1))], 128).recall == 0.0

    @given(
        ys=st.lists(st.integers(0, 500), min_size=0, max_size=5),
        zs=st.lists(st.integers(0, 500), min_size=0, max_size=5),
    )
    @settings(max_examples=60, deadline=None)
    def test_swap_symmetry(self, ys, zs):
        a = [EndLine(y, (0, 100)) for y in ys]
        b = [EndLine(y, (0, 100)) for y in zs]
        ab = end_line_metric(a, b, 64)
        ba = end_line_metric(b, a, 64)
        assert ab.precision == pytest.approx(ba.recall)
        assert ab.recall == pytest.approx(ba.precision)
        assert ab.f1 == pytest.approx(ba.f1)


class TestReport:
    def build_pages(self):
        lines = [
            TextLine(
                id="l0",
                polygon=box_polygon(5, 5, 95, 15),
                transcription="le deux mars mil huit",
                gt_transcription="le deux mars mil huit",
                is_first_line=True,
                gt_first_line=True,
            )
        ]
        p = page(
            "p",
            [act("p0", 5, 5, 95, 40, score=0.8)],
            [act("g0", 5, 5, 95, 40)],
        )
        p.lines = lines
        return [p]

    def test_perfect_report(self):
        report = evaluate_pages(self.build_pages())
        m = report.classes["full"]
        assert m.pixel_iou == 1.0 and m.ap50 == 1.0 and m.ap75 == 1.0 and m.map == 1.0
        assert report.line_classification.f1 == 1.0
        assert report.text.cer == 0.0 and report.text.wer == 0.0
        assert report.end_line.f1 == 1.0
        assert report.detection.act_level == 1.0
        assert report.detection.page_level == 1.0

    def test_json_and_table(self):
        report = evaluate_pages(self.build_pages())
        parsed = json.loads(report.to_json())
        assert parsed["classes"]["full"]["map"] == 1.0
        table = format_report_table(report)
        assert "full" in table and "mAP" in table

    def test_partial_reference_flags_error(self):
        pages = self.build_pages()
        pages[0].lines.append(
            TextLine(id="l1", polygon=box_polygon(5, 20, 95, 30), transcription="x")
        )
        with pytest.raises(ValidationError):
            evaluate_pages(pages)
