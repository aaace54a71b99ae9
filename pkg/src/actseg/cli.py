"""Command-line pipeline driver.

Subcommands cover the whole flow: ``synth`` builds a synthetic split,
``classify`` writes first-line flags into page JSONs, ``enrich`` renders
model input images, ``postprocess`` turns label maps into predicted
acts, ``segment-text`` runs the text-only baseline over a manifest, and
``evaluate`` emits the metric report. Exit codes: 0 on success, 1 on
validation errors (the offending file or id is named on stderr), 2 on
usage errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable, Iterable, Sequence, TypeVar

from . import __version__
from .classify import ClassifierConfig, classify_page, default_date_config
from .documents import PageDocument, ValidationError, load_page, save_image, save_page
from .documents import load_image as read_image
from .enrich import RenderConfig, Variant, enrich_page
from .metrics import DEFAULT_END_LINE_TOLERANCE, evaluate_pages, format_report_table
from .postprocess import PostprocessConfig, postprocess_page
from .segmenter import ReadingOrder, ReadingOrderConfig, read_manifest, segment_by_keyphrases
from .synth import SynthConfig, generate_dataset, write_dataset

T = TypeVar("T")


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


def _page_files(pages_dir: Path) -> list[Path]:
    files = sorted(p for p in pages_dir.glob("*.json") if p.name != "manifest.txt")
    if not files:
        raise ValidationError(f"no page JSON files found in {pages_dir}")
    return files


def _parallel(items: Sequence[T], fn: Callable[[T], None], jobs: int) -> None:
    """Apply fn over items, preserving determinism regardless of job count."""
    if jobs <= 1 or len(items) <= 1:
        for item in items:
            fn(item)
        return
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        list(pool.map(fn, items))


def _add_jobs(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--jobs",
        type=int,
        default=os.cpu_count() or 1,
        help="parallel page workers (default: available cores)",
    )


def _cmd_classify(args: argparse.Namespace) -> int:
    config = (
        ClassifierConfig.from_json_file(args.config)
        if args.config
        else default_date_config()
    )
    files = _page_files(Path(args.pages))

    def work(path: Path) -> None:
        page = load_page(path)
        save_page(classify_page(page, config), path)

    _parallel(files, work, args.jobs)
    _log(f"classified {len(files)} pages")
    return 0


def _cmd_enrich(args: argparse.Namespace) -> int:
    variant = Variant(args.variant)
    config = RenderConfig(
        variant=variant,
        fill=not args.outline,
        resize_longest_side=args.resize if args.resize > 0 else None,
    )
    pages_dir = Path(args.pages)
    images_dir = Path(args.images)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    files = _page_files(pages_dir)

    def work(path: Path) -> None:
        page = load_page(path)
        ref = page.image_ref or f"{page.page_id}.png"
        image = read_image(images_dir / ref)
        if image.shape[:2] != (page.height, page.width):
            raise ValidationError(
                f"{path}: image {ref} is {image.shape[1]}x{image.shape[0]}, "
                f"page is {page.width}x{page.height}"
            )
        _, rendered = enrich_page(page, image, config)
        if variant is Variant.TEXT_MASK_CHANNEL:
            save_image(rendered[:, :, :3], out_dir / f"{page.page_id}.png")
            from PIL import Image

            Image.fromarray(rendered[:, :, 3], mode="L").save(
                out_dir / f"{page.page_id}.ch4.png"
            )
        else:
            save_image(rendered, out_dir / f"{page.page_id}.png")

    _parallel(files, work, args.jobs)
    _log(f"rendered {len(files)} pages ({variant.value})")
    return 0


def _cmd_postprocess(args: argparse.Namespace) -> int:
    config = PostprocessConfig(min_area=args.min_area)
    files = _page_files(Path(args.pages))
    maps_dir = Path(args.maps) if args.maps else None
    probs_dir = Path(args.prob_maps) if args.prob_maps else None

    def work(path: Path) -> None:
        page = load_page(path, label_map_dir=maps_dir, prob_maps_dir=probs_dir)
        save_page(postprocess_page(page, config), path)

    _parallel(files, work, args.jobs)
    _log(f"post-processed {len(files)} pages")
    return 0


def _parse_order(raw: str) -> ReadingOrderConfig:
    if raw == "top":
        return ReadingOrderConfig(order=ReadingOrder.TOP_TO_BOTTOM)
    if raw.startswith("twocol:"):
        try:
            split_x = int(raw.split(":", 1)[1])
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad column split in {raw!r}") from None
        return ReadingOrderConfig(order=ReadingOrder.TWO_COLUMNS, split_x=split_x)
    raise argparse.ArgumentTypeError(f"unknown reading order {raw!r}")


def _cmd_segment_text(args: argparse.Namespace) -> int:
    paths = read_manifest(args.manifest)
    if not paths:
        raise ValidationError(f"manifest {args.manifest} lists no pages")
    pages = [load_page(p) for p in paths]
    segmented = segment_by_keyphrases(pages, args.order, margin=args.margin)
    for path, page in zip(paths, segmented):
        save_page(page, path)
    _log(f"segmented {len(pages)} pages")
    return 0


def _cmd_evaluate(args: argparse.Namespace) -> int:
    files = _page_files(Path(args.pages))
    pages: list[PageDocument | None] = [None] * len(files)

    def work(i: int) -> None:
        pages[i] = load_page(files[i])

    _parallel(range(len(files)), work, args.jobs)
    report = evaluate_pages(pages, tolerance=args.tolerance)
    text = report.to_json() if args.format == "json" else format_report_table(report)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        _log(f"report written to {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def _cmd_synth(args: argparse.Namespace) -> int:
    if args.config:
        obj = json.loads(Path(args.config).read_text(encoding="utf-8"))
    else:
        obj = {}
    if args.seed is not None:
        obj["seed"] = args.seed
    if args.pages is not None:
        obj["pages"] = args.pages
    config = SynthConfig.from_dict(obj)
    split = generate_dataset(config)
    manifest = write_dataset(split, args.out)
    _log(f"wrote {len(split.pages)} pages under {args.out} (manifest: {manifest})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="actseg",
        description="Act segmentation pipeline for historical registers",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("classify", help="write first-line flags into page JSONs")
    p.add_argument("--config", help="classifier config JSON (default: French date rule)")
    p.add_argument("--pages", required=True, help="directory of page JSONs")
    _add_jobs(p)
    p.set_defaults(func=_cmd_classify)

    p = sub.add_parser("enrich", help="render line positions onto page images")
    p.add_argument(
        "--variant", required=True, choices=[v.value for v in Variant]
    )
    p.add_argument("--pages", required=True)
    p.add_argument("--images", required=True, help="directory of page images")
    p.add_argument("--out", required=True, help="output directory for rendered PNGs")
    p.add_argument("--outline", action="store_true", help="draw outlines, not fills")
    p.add_argument(
        "--resize", type=int, default=768,
        help="longest output side in px; 0 keeps native resolution",
    )
    _add_jobs(p)
    p.set_defaults(func=_cmd_enrich)

    p = sub.add_parser("postprocess", help="turn label maps into predicted acts")
    p.add_argument("--pages", required=True)
    p.add_argument("--maps", help="directory holding label map PNGs")
    p.add_argument("--prob-maps", dest="prob_maps", help="directory of probability PNGs")
    p.add_argument(
        "--min-area", dest="min_area", type=float, default=None,
        help="component area floor in px^2 (default: 0.1%% of page area)",
    )
    _add_jobs(p)
    p.set_defaults(func=_cmd_postprocess)

    p = sub.add_parser("segment-text", help="text-only baseline over a manifest")
    p.add_argument("--manifest", required=True, help="ordered page list, one register")
    p.add_argument(
        "--order", type=_parse_order, default=ReadingOrderConfig(),
        help="top | twocol:<split_x>",
    )
    p.add_argument("--margin", type=int, default=0, help="act box padding in px")
    p.set_defaults(func=_cmd_segment_text)

    p = sub.add_parser("evaluate", help="compute the metric report")
    p.add_argument("--pages", required=True)
    p.add_argument("--tolerance", type=int, default=DEFAULT_END_LINE_TOLERANCE)
    p.add_argument("--format", choices=["json", "table"], default="json")
    p.add_argument("--out", help="report file (default: stdout)")
    _add_jobs(p)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("synth", help="generate a synthetic register split")
    p.add_argument("--config", help="generator config JSON")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--pages", type=int, default=None, help="override the page count")
    p.set_defaults(func=_cmd_synth)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ValidationError as exc:
        _log(f"error: {exc}")
        return 1
    except FileNotFoundError as exc:
        _log(f"error: {exc}")
        return 1


def entrypoint() -> None:  # console script target
    raise SystemExit(main())


if __name__ == "__main__":
    entrypoint()
