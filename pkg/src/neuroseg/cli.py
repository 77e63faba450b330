"""Command-line driver.

Exit codes: 0 success, 1 hard error, 2 success with warnings.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import io
from .core import Connectivity
from .errors import MissingPair, NeurosegError, PatchLargerThanImage, SeedOnBackground
from .metrics import METRIC_COLUMNS, aji, f1_seg, score_image
from .postprocess import SCHEMES, PipelineConfig, run_scheme
from .report import plot_comparison, plot_metrics, plot_overlay
from .scenes import generate_scene
from .synthesis import synthesize
from .tiling import Tile, plan_tiles, stitch, weight_map

log = logging.getLogger("neuroseg")

EXIT_OK, EXIT_ERROR, EXIT_WARN = 0, 1, 2
TILE_INDEX = "tiles.tsv"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _parallel_map(fn, items, workers):
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _config(args) -> PipelineConfig:
    return PipelineConfig(
        se_radius=args.se_radius,
        ws_threshold=args.threshold,
        min_distance=args.min_distance,
        connectivity=Connectivity.parse(args.connectivity),
        min_area=args.min_area,
    )


def _fmt(v: float) -> str:
    return "nan" if not np.isfinite(v) else f"{v:.6f}"


# --- synthesize ----------------------------------------------------------

def cmd_synthesize(args) -> int:
    binary = io.read_mask(args.binary)
    points = io.read_points(args.points, binary.shape)
    stem = args.id or Path(args.binary).stem
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", SeedOnBackground)
        labels, classes = synthesize(binary, points, args.thickness, args.connectivity)
    out = Path(args.out_dir)
    io.write_label_map(labels, out / f"{stem}_labels.png")
    io.write_class_mask(classes, out / f"{stem}_mask.png")
    skipped = [w.message for w in caught if isinstance(w.message, SeedOnBackground)]
    log.info("%s: %d instances", stem, len(np.unique(labels[labels > 0])))
    if skipped:
        coords = ", ".join(f"({s.x}, {s.y})" for s in skipped)
        log.warning("%d seed(s) on background skipped: %s", len(skipped), coords)
        return EXIT_WARN
    return EXIT_OK


# --- postprocess ---------------------------------------------------------

def load_probability_input(path, overlap=None):
    """Read a probability PNG, or stitch a tile directory holding ``tiles.tsv``."""
    path = Path(path)
    if not path.is_dir():
        return io.read_probability_map(path)
    index = path / TILE_INDEX
    if not index.exists():
        raise FileNotFoundError(f"{path} is a directory without {TILE_INDEX}")
    canvas = None
    entries = []
    with open(index, encoding="utf-8") as fh:
        for raw in fh:
            parts = raw.rstrip("\n").split("\t")
            if parts[0] == "# canvas":
                canvas = dict(zip(parts[1::2], (int(v) for v in parts[2::2])))
                continue
            if not raw.strip() or raw.startswith("#") or parts[0] == "tile":
                continue
            name, x0, y0, w, h = parts
            entries.append((name, int(x0), int(y0), int(w), int(h)))
    if canvas is None:
        raise NeurosegError(f"{index}: missing '# canvas' header")
    ov = canvas["overlap"] if overlap is None else overlap
    tiles = [(Tile(x0, y0, w, h), io.read_probability_map(path / name)) for name, x0, y0, w, h in entries]

    def weights(th, tw):
        return weight_map((th, tw), min(ov, (min(th, tw) - 1) // 2))

    return stitch(tiles, weights, canvas["width"], canvas["height"])


def _postprocess_one(job):
    image_id, src, dst, scheme, cfg, overlay = job
    pm = load_probability_input(src)
    t0 = time.perf_counter()
    labels = run_scheme(scheme, pm, cfg)
    seconds = time.perf_counter() - t0
    io.write_label_map(labels, dst)
    if overlay:
        plot_overlay(pm, labels, overlay)
    return image_id, scheme, len(np.unique(labels[labels > 0])), seconds


def cmd_postprocess(args) -> int:
    cfg = _config(args)
    if args.manifest:
        if not args.out_dir:
            raise NeurosegError("--manifest needs --out-dir")
        out = Path(args.out_dir)
        jobs = [
            (e.image_id, e.probmap, out / f"{e.image_id}.png", args.scheme, cfg, None)
            for e in io.read_manifest(args.manifest)
        ]
    else:
        if not args.input or not args.output:
            raise NeurosegError("give INPUT and --output, or --manifest and --out-dir")
        jobs = [(Path(args.input).stem, args.input, args.output, args.scheme, cfg, args.overlay)]
    results = sorted(_parallel_map(_postprocess_one, jobs, args.workers))
    timing_rows = []
    for image_id, scheme, n, seconds in results:
        print(f"{scheme}\t{seconds:.3f}")
        log.info("%s: %d instances", image_id, n)
        timing_rows.append((image_id, scheme, f"{seconds:.6f}"))
    if args.timing:
        _write_csv(args.timing, ("image_id", "scheme", "seconds"), timing_rows)
    return EXIT_OK


# --- evaluate ------------------------------------------------------------

def _ids(directory, suffix):
    return {p.stem: p for p in sorted(Path(directory).glob(f"*{suffix}"))}


def _paired(pred_dir, gt_dir, points_dir=None):
    pred = _ids(pred_dir, ".png")
    gt = _ids(gt_dir, ".png")
    if not pred and not gt:
        raise NeurosegError(f"no PNG files in {pred_dir} or {gt_dir}")
    for i in pred:
        if i not in gt:
            raise MissingPair(i, gt_dir)
    for i in gt:
        if i not in pred:
            raise MissingPair(i, pred_dir)
    pts = {}
    if points_dir is not None:
        pts = _ids(points_dir, ".txt")
        for i in pred:
            if i not in pts:
                raise MissingPair(i, points_dir)
    return [(i, pred[i], gt[i], pts.get(i)) for i in sorted(pred)]


def _evaluate_one(job):
    image_id, pred_path, gt_path, pts_path = job
    pred = io.read_label_map(pred_path)
    gt = io.read_label_map(gt_path)
    points = io.read_points(pts_path, gt.shape)
    return image_id, score_image(pred, gt, points)


def _write_csv(path, header, rows):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def cmd_evaluate(args) -> int:
    jobs = _paired(args.pred_dir, args.gt_dir, args.points_dir)
    results = sorted(_parallel_map(_evaluate_one, jobs, args.workers))
    rows = [[i] + [_fmt(s[c]) for c in METRIC_COLUMNS] for i, s in results]
    agg = ["mean±std"]
    for c in METRIC_COLUMNS:
        vals = np.array([s[c] for _, s in results], dtype=float)
        vals = vals[np.isfinite(vals)]
        agg.append(f"{_fmt(vals.mean())}±{_fmt(vals.std())}" if vals.size else "nan")
    rows.append(agg)
    _write_csv(args.out_csv, ("image_id",) + METRIC_COLUMNS, rows)
    figure = args.figure or Path(args.out_csv).with_suffix(".png")
    plot_metrics([s for _, s in results], figure)
    return EXIT_OK


# --- compare -------------------------------------------------------------

def _compare_one(job):
    image_id, prob_path, gt_path, cfg = job
    pm = io.read_probability_map(prob_path)
    gt = io.read_label_map(gt_path)
    out = []
    for scheme in SCHEMES:
        t0 = time.perf_counter()
        labels = run_scheme(scheme, pm, cfg)
        seconds = time.perf_counter() - t0
        out.append((scheme, f1_seg(labels, gt)[2], aji(labels, gt), seconds))
    return image_id, gt.size, out


def cmd_compare(args) -> int:
    cfg = _config(args)
    jobs = [(i, p, g, cfg) for i, p, g, _ in _paired(args.prob_dir, args.gt_dir)]
    results = sorted(_parallel_map(_compare_one, jobs, args.workers), key=lambda r: r[0])
    rows, timing = [], []
    per_scheme = {s: {"F1_seg": [], "AJI": []} for s in SCHEMES}
    for image_id, pixels, out in results:
        for scheme, f1, j, seconds in out:
            rows.append((image_id, scheme, _fmt(f1), _fmt(j)))
            timing.append((image_id, scheme, pixels, f"{seconds:.6f}"))
            per_scheme[scheme]["F1_seg"].append(f1)
            per_scheme[scheme]["AJI"].append(j)
    _write_csv(args.out_csv, ("image_id", "scheme", "F1_seg", "AJI"), rows)
    # wall-clock times differ run to run, so they live in their own file
    timing_path = args.timing or Path(args.out_csv).with_name(Path(args.out_csv).stem + "_timing.csv")
    _write_csv(timing_path, ("image_id", "scheme", "pixels", "seconds"), timing)
    summary = {
        s: {m: (float(np.mean(v)), float(np.std(v))) for m, v in d.items()}
        for s, d in per_scheme.items()
    }
    for s, d in summary.items():
        log.info("%-14s F1-seg %.4f  AJI %.4f", s, d["F1_seg"][0], d["AJI"][0])
    plot_comparison(summary, args.figure or Path(args.out_csv).with_suffix(".png"))
    return EXIT_OK


# --- genfix --------------------------------------------------------------

def _genfix_one(job):
    index, image_id, out, seed, params = job
    scene = generate_scene(np.random.default_rng([seed, index]), **params)
    io.write_probability_map(scene.probmap, out / "prob" / f"{image_id}.png")
    io.write_label_map(scene.labels, out / "gt" / f"{image_id}.png")
    io.write_class_mask(scene.classes, out / "mask" / f"{image_id}.png")
    io.write_points(scene.centroids, out / "points" / f"{image_id}.txt")
    return image_id, len(scene.centroids)


def cmd_genfix(args) -> int:
    out = Path(args.out_dir)
    jobs = []
    for i in range(args.count):
        params = dict(
            width=args.width,
            height=args.height,
            n_cells=args.cells,
            radius_range=(args.radius_min, args.radius_max),
            layout=args.layout,
            thickness=args.thickness,
            ridge_dropout=args.ridge_dropout,
            blur=args.blur,
        )
        jobs.append((i, f"scene_{i:03d}", out, args.seed, params))
    results = sorted(_parallel_map(_genfix_one, jobs, args.workers))
    entries = []
    for image_id, n in results:
        log.info("%s: %d cells", image_id, n)
        if n < args.cells:
            log.warning("%s: only %d of %d cells fit", image_id, n, args.cells)
        entries.append(io.ManifestEntry(
            image_id,
            out / "prob" / f"{image_id}.png",
            out / "points" / f"{image_id}.txt",
            out / "gt" / f"{image_id}.png",
        ))
    io.write_manifest(entries, out / "manifest.tsv")
    return EXIT_OK


# --- tile-plan -----------------------------------------------------------

def _write_tile(job):
    src, tile, path = job
    io.write_probability_map(io.read_probability_map(src)[tile.slices], path)


def cmd_tile_plan(args) -> int:
    source = None
    if args.split:
        source = io.read_probability_map(args.split)
        height, width = source.shape[:2]
    elif args.width and args.height:
        width, height = args.width, args.height
    else:
        raise NeurosegError("give WIDTH and HEIGHT, or --split IMAGE")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", PatchLargerThanImage)
        grid = plan_tiles(width, height, args.patch_size, args.overlap)
    for w in caught:
        log.warning("%s", w.message)
    lines = [
        f"# canvas\twidth\t{width}\theight\t{height}\tpatch\t{args.patch_size}\toverlap\t{args.overlap}",
        "tile\tx0\ty0\twidth\theight",
    ]
    names = []
    for k, t in enumerate(grid):
        name = f"tile_{k:04d}.png"
        names.append(name)
        lines.append(f"{name}\t{t.x0}\t{t.y0}\t{t.w}\t{t.h}")
    text = "\n".join(lines) + "\n"
    if source is not None:
        out = Path(args.out_dir or ".")
        if args.workers <= 1:
            for name, t in zip(names, grid):
                io.write_probability_map(source[t.slices], out / name)
        else:
            _parallel_map(_write_tile, [(args.split, t, out / n) for n, t in zip(names, grid)], args.workers)
        (out / TILE_INDEX).write_text(text, encoding="utf-8")
    elif args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    log.info("%d tiles", len(grid))
    return EXIT_OK


# --- parser --------------------------------------------------------------

def _pipeline_flags(p):
    p.add_argument("--se-radius", type=int, default=10, help="disk radius for ultimate erosion (px)")
    p.add_argument("--threshold", type=float, default=0.5, help="neuron-probability threshold")
    p.add_argument("--min-distance", type=int, default=20, help="peak spacing for the distance scheme (px)")
    p.add_argument("--min-area", type=int, default=20, help="drop instances smaller than this (px)")


def _common_flags(p):
    p.add_argument("--connectivity", choices=("four", "eight"), default="eight")
    p.add_argument("--workers", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="neuroseg", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synthesize", help="three-class mask from a binary mask and point annotations")
    p.add_argument("binary")
    p.add_argument("points")
    p.add_argument("out_dir")
    p.add_argument("--thickness", type=int, default=4)
    p.add_argument("--id", help="output file stem (default: binary mask stem)")
    _common_flags(p)
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("postprocess", help="probability map -> instance labels")
    p.add_argument("input", nargs="?", help="probability PNG or a tile directory with tiles.tsv")
    p.add_argument("-o", "--output")
    p.add_argument("--manifest")
    p.add_argument("--out-dir")
    p.add_argument("--scheme", choices=tuple(SCHEMES), default="proposed")
    p.add_argument("--overlay", help="also render an outline overlay PNG here")
    p.add_argument("--timing", help="write per-image timings to this CSV")
    _pipeline_flags(p)
    _common_flags(p)
    p.set_defaults(func=cmd_postprocess)

    p = sub.add_parser("evaluate", help="score predicted label maps")
    p.add_argument("pred_dir")
    p.add_argument("gt_dir")
    p.add_argument("points_dir")
    p.add_argument("out_csv")
    p.add_argument("--figure")
    _common_flags(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("compare", help="run every post-processing scheme and score it")
    p.add_argument("prob_dir")
    p.add_argument("gt_dir")
    p.add_argument("out_csv")
    p.add_argument("--figure")
    p.add_argument("--timing")
    _pipeline_flags(p)
    _common_flags(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("genfix", help="generate synthetic scenes")
    p.add_argument("out_dir")
    p.add_argument("--count", type=int, default=20)
    p.add_argument("--width", type=int, default=256)
    p.add_argument("--height", type=int, default=256)
    p.add_argument("--cells", type=int, default=40)
    p.add_argument("--radius-min", type=int, default=12)
    p.add_argument("--radius-max", type=int, default=18)
    p.add_argument("--layout", choices=("sparse", "dense"), default="dense")
    p.add_argument("--ridge-dropout", type=float, default=0.5)
    p.add_argument("--blur", type=float, default=1.0)
    p.add_argument("--thickness", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_genfix)

    p = sub.add_parser("tile-plan", help="overlapping patch layout, optionally cutting an image")
    p.add_argument("width", type=int, nargs="?")
    p.add_argument("height", type=int, nargs="?")
    p.add_argument("--patch-size", type=int, default=1344)
    p.add_argument("--overlap", type=int, default=120)
    p.add_argument("-o", "--output")
    p.add_argument("--split", help="cut this probability PNG into tiles")
    p.add_argument("--out-dir", help="where --split writes tiles and tiles.tsv")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_tile_plan)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except (NeurosegError, OSError, ValueError) as exc:
        print(f"neuroseg {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
