"""Command-line stages: synth -> tile -> crop -> segment -> eval -> stats.

Every stage reads its predecessor's directory (``--in``), verifies that
directory's ``manifest.json`` and writes its own output directory plus
manifest (``--out``).
"""

import argparse
import csv
import logging
import os
import sys

import numpy as np

from . import __version__
from .backends import parse_backend
from .config import (
    RunConfig,
    load_manifest,
    manifest_digest,
    parse_config_text,
    read_config_file,
    write_manifest,
)
from .evalstats import ResolutionLadder
from .exceptions import (
    BackendFailure,
    CannotExpandError,
    DtsegError,
    InfeasiblePlacementError,
    InfeasibleTilingError,
    InvalidArgumentError,
    ManifestError,
    RunError,
)
from .geometry import Box, Detection, clip_box, match_detections, read_boxes_csv, scale_box, write_boxes_csv
from .pipeline import (
    AUTOMATIC,
    MANUAL,
    CropRecord,
    Slide,
    crop_box_native,
    crop_native,
    crop_rng,
    downsample_slide,
    map_ordered,
    sample_patches,
    score_crop,
    segment_crop,
)
from .raster import Raster, read_mask_png, read_png, write_mask_png, write_png
from .report import read_records, report_from_records, write_records
from .synth import gen_slide, slide_mask

log = logging.getLogger("dtseg")

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
EXIT_MISSING_INPUT = 3
EXIT_BACKEND = 4
EXIT_MANIFEST = 5
EXIT_INFEASIBLE = 6

CROP_FIELDS = ("crop_id", "slide_id", "x0", "y0", "x1", "y1", "source")


class MissingInputError(DtsegError, FileNotFoundError):
    pass


def _mkdir(path):
    os.makedirs(path, exist_ok=True)
    return path


def _require_in(cfg):
    if not cfg.in_dir:
        raise InvalidArgumentError("this stage needs --in <predecessor output directory>")
    if not os.path.isdir(cfg.in_dir):
        raise MissingInputError(f"input directory {cfg.in_dir} does not exist")
    return cfg.in_dir


def _require_out(cfg):
    if not cfg.out_dir:
        raise InvalidArgumentError("--out is required")
    return _mkdir(cfg.out_dir)


def _read_mpp(path):
    with open(path, encoding="utf-8") as fh:
        entries = parse_config_text(fh.read(), path)
    if "mpp" not in entries:
        raise InvalidArgumentError(f"{path}: missing mpp=<float>")
    return float(entries["mpp"])


def _write_mpp(path, mpp):
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write(f"mpp={mpp!r}\n")


def _slide_ids(slides_dir):
    if not os.path.isdir(slides_dir):
        return []
    return sorted(
        name[:-4]
        for name in os.listdir(slides_dir)
        if name.endswith(".png") and not name.endswith("_mask.png")
    )


def load_slide(slides_dir, slide_id):
    mpp = _read_mpp(os.path.join(slides_dir, f"{slide_id}.txt"))
    raster = read_png(os.path.join(slides_dir, f"{slide_id}.png"), mpp)
    return Slide(raster, mpp, slide_id)


# -- synth -------------------------------------------------------------------


def cmd_synth(cfg):
    out = _require_out(cfg)
    slides_dir = _mkdir(os.path.join(out, "slides"))
    for i in range(cfg.n_slides):
        sid = f"slide_{i:03d}"
        slide, boxes, masks = gen_slide(
            cfg.synth, cfg.objects_per_slide, cfg.slide_side, crop_rng(cfg.seed, sid), slide_id=sid
        )
        if cfg.native_mpp != slide.mpp:
            slide = Slide(slide.raster, cfg.native_mpp, sid)
        write_png(slide.raster, os.path.join(slides_dir, f"{sid}.png"))
        write_mask_png(slide_mask(slide, boxes, masks), os.path.join(slides_dir, f"{sid}_mask.png"))
        _write_mpp(os.path.join(slides_dir, f"{sid}.txt"), slide.mpp)
        write_boxes_csv(
            os.path.join(slides_dir, f"{sid}_boxes.csv"),
            [(f"{sid}_g{k:03d}", b) for k, b in enumerate(boxes)],
        )
        log.info("synth: %s with %d objects", sid, len(boxes))
    write_manifest(out, "synth", cfg, inputs={})
    return EXIT_OK


# -- tile --------------------------------------------------------------------


def cmd_tile(cfg):
    src = _require_in(cfg)
    load_manifest(src, "synth")
    out = _require_out(cfg)
    slides_dir = os.path.join(src, "slides")
    ids = _slide_ids(slides_dir)
    if not ids:
        raise MissingInputError(f"no slides found in {slides_dir}")
    low_dir = _mkdir(os.path.join(out, "lowres"))
    patch_dir = _mkdir(os.path.join(out, "patches"))
    patch_rows = []
    for sid in ids:
        slide = load_slide(slides_dir, sid)
        lowres = downsample_slide(slide, cfg.det_mpp)
        factor = slide.mpp / cfg.det_mpp
        bounds = Box(0, 0, lowres.width, lowres.height)
        gt = [
            (ident, clip_box(scale_box(b, factor), bounds))
            for ident, b, _ in read_boxes_csv(os.path.join(slides_dir, f"{sid}_boxes.csv"))
        ]
        write_png(lowres, os.path.join(low_dir, f"{sid}.png"))
        _write_mpp(os.path.join(low_dir, f"{sid}.txt"), cfg.det_mpp)
        write_boxes_csv(os.path.join(low_dir, f"{sid}_boxes.csv"), gt)
        if not gt:
            continue
        patches = sample_patches(
            lowres, [b for _, b in gt], cfg.patch_count, crop_rng(cfg.seed, f"tile:{sid}"), cfg.patch_size
        )
        for k, (box, patch) in enumerate(patches):
            pid = f"{sid}_p{k:03d}"
            write_png(patch, os.path.join(patch_dir, f"{pid}.png"))
            patch_rows.append((pid, box))
    write_boxes_csv(os.path.join(out, "patches.csv"), patch_rows)
    write_manifest(out, "tile", cfg, inputs=manifest_digest(src), links={"synth": os.path.abspath(src)})
    return EXIT_OK


# -- crop --------------------------------------------------------------------


def _detections_for(cfg, sid):
    path = os.path.join(cfg.detections, f"{sid}.csv")
    if not os.path.isfile(path):
        return []
    return [
        Detection(box, 1.0 if conf is None else conf, ident) for ident, box, conf in read_boxes_csv(path)
    ]


def cmd_crop(cfg):
    src = _require_in(cfg)
    manifest = load_manifest(src, "tile")
    synth_dir = manifest["links"]["synth"]
    load_manifest(synth_dir, "synth")
    if cfg.source == AUTOMATIC and not cfg.detections:
        raise InvalidArgumentError("source=automatic needs --detections <dir of <slide_id>.csv>")
    if cfg.detections and not os.path.isdir(cfg.detections):
        raise MissingInputError(f"detections directory {cfg.detections} does not exist")
    out = _require_out(cfg)
    crops_dir = _mkdir(os.path.join(out, "crops"))
    slides_dir = os.path.join(synth_dir, "slides")
    low_dir = os.path.join(src, "lowres")
    rows, match_rows = [], []
    for sid in _slide_ids(slides_dir):
        slide = load_slide(slides_dir, sid)
        gt_mask = read_mask_png(os.path.join(slides_dir, f"{sid}_mask.png"))
        crops = []
        if cfg.source == MANUAL:
            for ident, box, _ in read_boxes_csv(os.path.join(slides_dir, f"{sid}_boxes.csv")):
                crops.append(crop_box_native(slide, box, gt_mask, crop_rng(cfg.seed, ident), ident, MANUAL))
        else:
            gts = [b for _, b, _ in read_boxes_csv(os.path.join(low_dir, f"{sid}_boxes.csv"))]
            dets = _detections_for(cfg, sid)
            result = match_detections(dets, gts, 0.5)
            match_rows.append((sid, len(dets), len(gts), len(result.pairs)))
            for pi, gi, _ in sorted(result.pairs, key=lambda t: t[1]):
                ident = f"{sid}_d{gi:03d}"
                crops.append(
                    crop_native(
                        slide, dets[pi].box, gt_mask, cfg.det_mpp, crop_rng(cfg.seed, ident), ident, AUTOMATIC
                    )
                )
        for crop in crops:
            write_png(crop.image, os.path.join(crops_dir, f"{crop.crop_id}.png"))
            write_mask_png(crop.gt_mask, os.path.join(crops_dir, f"{crop.crop_id}_mask.png"))
            b = crop.native_box
            rows.append((crop.crop_id, crop.slide_id, int(b.x0), int(b.y0), int(b.x1), int(b.y1), crop.source))
    with open(os.path.join(out, "crops.csv"), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CROP_FIELDS)
        w.writerows(sorted(rows))
    if match_rows:
        with open(os.path.join(out, "detections.csv"), "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("slide_id", "predictions", "ground_truths", "matched"))
            w.writerows(match_rows)
    write_manifest(out, "crop", cfg, inputs=manifest_digest(src), links={"tile": os.path.abspath(src), "synth": synth_dir})
    return EXIT_OK


def read_crop_table(crop_dir):
    path = os.path.join(crop_dir, "crops.csv")
    if not os.path.isfile(path):
        return []
    with open(path, newline="", encoding="utf-8") as fh:
        return sorted(csv.DictReader(fh), key=lambda r: r["crop_id"])


def load_crop(crop_dir, row):
    base = os.path.join(crop_dir, "crops", row["crop_id"])
    image = read_png(base + ".png")
    box = Box(int(row["x0"]), int(row["y0"]), int(row["x1"]), int(row["y1"]))
    return CropRecord(row["crop_id"], row["slide_id"], box, image, read_mask_png(base + "_mask.png"), row["source"])


# -- segment -----------------------------------------------------------------


def _segment_job(args):
    crop_dir, row, ladder, color, backend, eval_side, pred_dir = args
    crop = load_crop(crop_dir, row)
    try:
        preds = segment_crop(crop, ladder, color, backend, eval_side)
    except BackendFailure as exc:
        return row["crop_id"], f"{exc}: {exc.diagnostics}".strip(": ")
    for r, soft in preds.items():
        np.save(os.path.join(pred_dir, f"{crop.crop_id}_{r}.npy"), soft.samples[:, :, 0])
    return row["crop_id"], None


def cmd_segment(cfg):
    src = _require_in(cfg)
    load_manifest(src, "crop")
    rows = read_crop_table(src)
    if not rows:
        raise MissingInputError(f"no crops found in {src}")
    backend = parse_backend(cfg.backend)
    out = _require_out(cfg)
    pred_dir = _mkdir(os.path.join(out, "predictions"))
    jobs = [
        (src, row, cfg.ladder, cfg.color_space, backend, cfg.eval_side_for(row["source"]), pred_dir)
        for row in rows
    ]
    outcomes = map_ordered(_segment_job, jobs, cfg.jobs)
    failures = [(cid, err) for cid, err in outcomes if err is not None]
    with open(os.path.join(out, "failures.csv"), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("crop_id", "error"))
        w.writerows(failures)
    for cid, err in failures:
        log.warning("segment: backend failed on %s: %s", cid, err)
    if len(failures) == len(rows):
        raise RunError(f"backend failed on all {len(rows)} crops")
    write_manifest(
        out, "segment", cfg, inputs=manifest_digest(src), links={"crop": os.path.abspath(src)},
        extra={"backend_kind": backend.kind},
    )
    return EXIT_OK


# -- eval --------------------------------------------------------------------


def _eval_job(args):
    crop_dir, row, ladder, color, kind, eval_side, pred_dir = args
    crop = load_crop(crop_dir, row)
    preds = {}
    for r in ladder:
        path = os.path.join(pred_dir, f"{crop.crop_id}_{r}.npy")
        preds[r] = Raster(np.load(path))
    return score_crop(crop, preds, color, kind, eval_side)


def cmd_eval(cfg):
    src = _require_in(cfg)
    seg = load_manifest(src, "segment")
    crop_dir = cfg.crops_dir or seg["links"]["crop"]
    if cfg.crops_dir is None:
        load_manifest(crop_dir, "crop")
    rows = read_crop_table(crop_dir)
    if not rows:
        raise MissingInputError(f"no crops found in {crop_dir}")
    seg_cfg = RunConfig.from_entries(seg["config"])
    failed = set()
    with open(os.path.join(src, "failures.csv"), newline="", encoding="utf-8") as fh:
        failed = {r["crop_id"] for r in csv.DictReader(fh)}
    rows = [r for r in rows if r["crop_id"] not in failed]
    pred_dir = os.path.join(src, "predictions")
    for row in rows:
        for r in seg_cfg.ladder:
            if not os.path.isfile(os.path.join(pred_dir, f"{row['crop_id']}_{r}.npy")):
                raise MissingInputError(f"missing prediction for {row['crop_id']} at {r}")
    out = _require_out(cfg)
    jobs = [
        (crop_dir, row, seg_cfg.ladder, seg_cfg.color_space, seg["backend_kind"],
         seg_cfg.eval_side_for(row["source"]), pred_dir)
        for row in rows
    ]  # fmt: skip
    records = [rec for recs in map_ordered(_eval_job, jobs, cfg.jobs) for rec in recs]
    if not records:
        raise RunError("no records produced")
    write_records(records, os.path.join(out, "records.csv"))
    write_manifest(out, "eval", cfg, inputs=manifest_digest(src), links={"segment": os.path.abspath(src)})
    return EXIT_OK


# -- stats -------------------------------------------------------------------


def cmd_stats(cfg):
    src = _require_in(cfg)
    load_manifest(src, "eval")
    records = read_records(os.path.join(src, "records.csv"))
    if not records:
        raise MissingInputError(f"no records found in {src}")
    out = _require_out(cfg)
    report_from_records(records, out)
    write_manifest(out, "stats", cfg, inputs=manifest_digest(src), links={"eval": os.path.abspath(src)})
    return EXIT_OK


COMMANDS = {
    "synth": cmd_synth,
    "tile": cmd_tile,
    "crop": cmd_crop,
    "segment": cmd_segment,
    "eval": cmd_eval,
    "stats": cmd_stats,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="dtseg", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="key=value run configuration file")
        p.add_argument("--seed", help="unsigned 64-bit run seed")
        p.add_argument("--out", help="output directory")
        p.add_argument("--in", dest="in_dir", help="predecessor stage directory")
        p.add_argument("--jobs", help="worker processes (results do not depend on it)")
        p.add_argument("--backend", help="oracle | threshold | external:<command>")
        p.add_argument("--color", choices=("rgb", "lab"))
        p.add_argument("--ladder", help="comma-separated resolutions, e.g. 512,256,128")
        p.add_argument("--eval-side", help="auto | native | <pixels>")
        p.add_argument("--source", choices=(MANUAL, AUTOMATIC))
        p.add_argument("--detections", help="directory of <slide_id>.csv detection boxes")
        p.add_argument("--crops", dest="crops_dir", help="crop directory (eval; defaults to the segment link)")
        p.add_argument(
            "--set", action="append", default=[], metavar="KEY=VALUE", help="override any config key"
        )
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def config_from_args(args):
    entries = read_config_file(args.config) if args.config else {}
    for item in args.set:
        entries.update(parse_config_text(item, "--set"))
    flags = {
        "seed": args.seed,
        "out_dir": args.out,
        "in_dir": args.in_dir,
        "jobs": args.jobs,
        "backend": args.backend,
        "color": args.color,
        "ladder": args.ladder,
        "eval_side": args.eval_side,
        "source": args.source,
        "detections": args.detections,
        "crops_dir": args.crops_dir,
    }
    entries.update({k: v for k, v in flags.items() if v is not None})
    if "ladder" in entries:
        ResolutionLadder.parse(entries["ladder"])
    return RunConfig.from_entries(entries)


def exit_code_for(exc):
    if isinstance(exc, (MissingInputError, FileNotFoundError)):
        return EXIT_MISSING_INPUT
    if isinstance(exc, ManifestError):
        return EXIT_MANIFEST
    if isinstance(exc, (RunError, BackendFailure)):
        return EXIT_BACKEND
    if isinstance(exc, (InfeasibleTilingError, InfeasiblePlacementError, CannotExpandError)):
        return EXIT_INFEASIBLE
    if isinstance(exc, InvalidArgumentError):
        return EXIT_USAGE
    return EXIT_FAILURE


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s"
    )
    try:
        cfg = config_from_args(args)
        return COMMANDS[args.command](cfg)
    except (DtsegError, OSError) as exc:
        print(f"dtseg {args.command}: error: {exc}", file=sys.stderr)
        return exit_code_for(exc)


if __name__ == "__main__":
    sys.exit(main())
