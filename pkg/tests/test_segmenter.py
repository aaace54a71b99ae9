import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from actseg.documents import ActClass, PageDocument, TextLine, ValidationError
from actseg.geometry import bounding_box, box_polygon
from actseg.segmenter import (
    ReadingOrder,
    ReadingOrderConfig,
    read_manifest,
    reading_order,
    segment_by_keyphrases,
)

TOP = ReadingOrderConfig()


def page_from_flags(flags, pid="p", w=200, line_h=10):
    lines = []
    for i, flag in enumerate(flags):
        y = 10 + i * (line_h + 5)
        lines.append(
            TextLine(
                id=f"{pid}_l{i}",
                polygon=box_polygon(10, y, w - 10, y + line_h),
                transcription="x",
                is_first_line=flag,
            )
        )
    height = 10 + len(flags) * (line_h + 5) + 20
    return PageDocument(page_id=pid, width=w, height=height, lines=lines)


def classes(page):
    return [a.act_class for a in page.pred_acts]


class TestReadingOrder:
    def test_sorted_by_y(self):
        page = PageDocument(
            page_id="p", width=100, height=100,
            lines=[
                TextLine(id="a", polygon=box_polygon(0, 10, 50, 14), transcription=""),
                TextLine(id="b", polygon=box_polygon(0, 50, 50, 54), transcription=""),
                TextLine(id="c", polygon=box_polygon(0, 30, 50, 34), transcription=""),
            ],
        )
        assert [ln.id for ln in reading_order(page, TOP)] == ["a", "c", "b"]

    def test_tie_broken_by_x(self):
        page = PageDocument(
            page_id="p", width=200, height=100,
            lines=[
                TextLine(id="right", polygon=box_polygon(100, 10, 140, 14), transcription=""),
                TextLine(id="left", polygon=box_polygon(40, 10, 80, 14), transcription=""),
            ],
        )
        assert [ln.id for ln in reading_order(page, TOP)] == ["left", "right"]

    def test_two_columns(self):
        cfg = ReadingOrderConfig(order=ReadingOrder.TWO_COLUMNS, split_x=100)
        page = PageDocument(
            page_id="p", width=200, height=100,
            lines=[
                TextLine(id="r0", polygon=box_polygon(120, 10, 180, 14), transcription=""),
                TextLine(id="l0", polygon=box_polygon(10, 20, 80, 24), transcription=""),
                TextLine(id="l1", polygon=box_polygon(10, 40, 80, 44), transcription=""),
            ],
        )
        assert [ln.id for ln in reading_order(page, cfg)] == ["l0", "l1", "r0"]

    def test_split_x_validated_against_page(self):
        cfg = ReadingOrderConfig(order=ReadingOrder.TWO_COLUMNS, split_x=500)
        page = page_from_flags([True])
        with pytest.raises(ValidationError):
            reading_order(page, cfg)

    def test_two_columns_requires_split(self):
        with pytest.raises(ValidationError):
            ReadingOrderConfig(order=ReadingOrder.TWO_COLUMNS)


class TestGrouping:
    def test_two_groups_single_page(self):
        page = page_from_flags([True, False, False, True, False])
        out = segment_by_keyphrases([page])[0]
        assert classes(out) == [ActClass.FULL, ActClass.FULL]
        first_box = bounding_box(out.pred_acts[0].polygon)
        lines_01_2 = [bounding_box(ln.polygon) for ln in page.lines[:3]]
        assert first_box.y_min == min(b.y_min for b in lines_01_2)
        assert first_box.y_max == max(b.y_max for b in lines_01_2)

    def test_all_false_is_center(self):
        page = page_from_flags([False, False, False])
        out = segment_by_keyphrases([page])[0]
        assert classes(out) == [ActClass.CENTER]
        box = bounding_box(out.pred_acts[0].polygon)
        assert box.y_min == 10

    def test_cross_page_start_end(self):
        a = page_from_flags([True, False], pid="a")
        b = page_from_flags([False, True, False], pid="b")
        out = segment_by_keyphrases([a, b])
        assert classes(out[0]) == [ActClass.START]
        assert classes(out[1]) == [ActClass.END, ActClass.FULL]
        end_box = bounding_box(out[1].pred_acts[0].polygon)
        assert end_box.y_max == bounding_box(b.lines[0].polygon).y_max

    def test_last_page_never_starts(self):
        a = page_from_flags([True, False], pid="a")
        assert classes(segment_by_keyphrases([a])[0]) == [ActClass.FULL]

    def test_next_page_flagged_keeps_full(self):
        a = page_from_flags([True, False], pid="a")
        b = page_from_flags([True], pid="b")
        out = segment_by_keyphrases([a, b])
        assert classes(out[0]) == [ActClass.FULL]

    def test_next_page_center_makes_start(self):
        a = page_from_flags([True, False], pid="a")
        b = page_from_flags([False, False], pid="b")
        out = segment_by_keyphrases([a, b])
        assert classes(out[0]) == [ActClass.START]
        assert classes(out[1]) == [ActClass.CENTER]

    def test_next_page_empty_keeps_full(self):
        a = page_from_flags([True], pid="a")
        b = page_from_flags([], pid="b")
        out = segment_by_keyphrases([a, b])
        assert classes(out[0]) == [ActClass.FULL]
        assert classes(out[1]) == []

    def test_empty_page_no_acts(self):
        assert classes(segment_by_keyphrases([page_from_flags([])])[0]) == []

    def test_unclassified_lines_rejected(self):
        page = page_from_flags([True, None])
        with pytest.raises(ValidationError):
            segment_by_keyphrases([page])

    def test_scores_and_ids(self):
        page = page_from_flags([True, True, True])
        out = segment_by_keyphrases([page])[0]
        assert all(a.score == 1.0 for a in out.pred_acts)
        assert len({a.id for a in out.pred_acts}) == 3

    def test_margin_pads_and_clamps(self):
        page = page_from_flags([True])
        out = segment_by_keyphrases([page], margin=1000)[0]
        box = bounding_box(out.pred_acts[0].polygon)
        assert box == (0, 0, page.width, page.height)

    @given(st.lists(st.booleans(), min_size=0, max_size=8))
    @settings(max_examples=60, deadline=None)
    def test_every_line_in_exactly_one_act(self, flags):
        page = page_from_flags(flags)
        out = segment_by_keyphrases([page])[0]
        # acts partition the lines contiguously in reading order
        covered = 0
        prev_y_max = -1
        for a in out.pred_acts:
            box = bounding_box(a.polygon)
            members = [
                ln for ln in page.lines
                if box.y_min <= bounding_box(ln.polygon).y_min
                and bounding_box(ln.polygon).y_max <= box.y_max
            ]
            assert members, "act with no member lines"
            covered += len(members)
            assert box.y_min > prev_y_max
            prev_y_max = box.y_max
        assert covered == len(flags)

    def test_flag_flip_changes_at_most_two_acts_locally(self):
        flags = [True, False, False, True, False, True]
        base = segment_by_keyphrases([page_from_flags(flags)])[0]
        flipped = list(flags)
        flipped[2] = True  # split the first act
        out = segment_by_keyphrases([page_from_flags(flipped)])[0]
        assert len(out.pred_acts) == len(base.pred_acts) + 1


class TestManifest:
    def test_relative_paths_and_comments(self, tmp_path):
        (tmp_path / "m.txt").write_text("a.json\n# comment\n\nb.json\n")
        paths = read_manifest(tmp_path / "m.txt")
        assert paths == [tmp_path / "a.json", tmp_path / "b.json"]
