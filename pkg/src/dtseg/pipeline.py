"""Slide-level orchestration: downsample, tile, crop at native resolution, segment, score."""

import hashlib
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .backends import parse_backend
from .colorspace import ColorSpace, to_model_input
from .evalstats import EvalRecord, ResolutionLadder, dsc
from .exceptions import (
    BackendFailure,
    InfeasibleTilingError,
    InvalidArgumentError,
    RunError,
)
from .geometry import Box, clip_box, expand_box_details, scale_box
from .raster import BinaryMask, Raster, binarize, resample

log = logging.getLogger(__name__)

NATIVE_MPP = 0.25
DETECTION_MPP = 4.0
PATCH_SIZE = 512
EXPANSION_FACTOR = 1.5
MAX_TILING_ATTEMPTS = 10_000
MANUAL, AUTOMATIC = "manual", "automatic"
# Default evaluation side per crop source; None means the native crop size.
DEFAULT_EVAL_SIDE = {MANUAL: 512, AUTOMATIC: None}


@dataclass(frozen=True, eq=False)
class Slide:
    raster: Raster
    mpp: float = NATIVE_MPP
    id: str = "slide"

    def __post_init__(self):
        if not self.mpp > 0:
            raise InvalidArgumentError(f"slide mpp must be > 0, got {self.mpp}")
        if self.raster.mpp != self.mpp:
            object.__setattr__(self, "raster", self.raster.with_mpp(self.mpp))

    @property
    def bounds(self):
        return Box(0, 0, self.raster.width, self.raster.height)


@dataclass(frozen=True, eq=False)
class CropRecord:
    crop_id: str
    slide_id: str
    native_box: Box
    image: Raster
    gt_mask: BinaryMask
    source: str = MANUAL

    def __post_init__(self):
        if (self.image.height, self.image.width) != self.gt_mask.shape:
            raise InvalidArgumentError(f"crop {self.crop_id}: image and mask sizes differ")
        if (self.image.width, self.image.height) != (self.native_box.width, self.native_box.height):
            raise InvalidArgumentError(f"crop {self.crop_id}: image size differs from its box")
        if self.source not in (MANUAL, AUTOMATIC):
            raise InvalidArgumentError(f"unknown crop source {self.source!r}")


@dataclass
class RunResult:
    """Records of a pipeline run plus the crops whose backend failed."""

    records: list = field(default_factory=list)
    failures: dict = field(default_factory=dict)


def derive_seed(run_seed, key):
    """Independent child seed for ``key`` under ``run_seed``."""
    digest = hashlib.sha256(str(key).encode("utf-8")).digest()
    words = np.frombuffer(digest[:16], dtype=np.uint32).tolist()
    return np.random.SeedSequence([int(run_seed) & 0xFFFFFFFFFFFFFFFF, *words])


def crop_rng(run_seed, key):
    return np.random.default_rng(derive_seed(run_seed, key))


def downsample_slide(s, target_mpp=DETECTION_MPP):
    if target_mpp < s.mpp:
        raise InvalidArgumentError(
            f"target mpp {target_mpp} is finer than the native {s.mpp}"
        )
    factor = s.mpp / target_mpp
    w = max(1, int(round(s.raster.width * factor)))
    h = max(1, int(round(s.raster.height * factor)))
    return resample(s.raster, w, h, "area").with_mpp(target_mpp)


def sample_patches(lowres, gt_boxes_lowres, n, rng, patch=PATCH_SIZE, max_attempts=MAX_TILING_ATTEMPTS):
    """Draw ``n`` random ``patch`` x ``patch`` windows, each holding a whole ground-truth box.

    Positions are rejection sampled; each patch gets ``max_attempts`` draws.
    """
    if lowres.width < patch or lowres.height < patch:
        raise InfeasibleTilingError(
            f"raster {lowres.width}x{lowres.height} is smaller than the {patch} patch"
        )
    fits = [b for b in gt_boxes_lowres if b.width <= patch and b.height <= patch]
    if not fits:
        raise InfeasibleTilingError("no ground-truth box fits inside a patch")
    out = []
    for _ in range(n):
        for _ in range(max_attempts):
            x0 = int(rng.integers(0, lowres.width - patch + 1))
            y0 = int(rng.integers(0, lowres.height - patch + 1))
            cand = Box(x0, y0, x0 + patch, y0 + patch)
            if any(cand.contains(b) for b in fits):
                out.append((cand, lowres.crop(cand)))
                break
        else:
            raise InfeasibleTilingError(
                f"no patch containing a ground-truth box after {max_attempts} attempts"
            )
    return out


def crop_box_native(s, native_box, gt_mask, rng=None, crop_id=None, source=MANUAL, factor=EXPANSION_FACTOR):
    """Expand ``native_box`` into a square and cut image and mask at native resolution."""
    if gt_mask.shape != (s.raster.height, s.raster.width):
        raise InvalidArgumentError("slide ground-truth mask does not match the slide size")
    box = clip_box(native_box, s.bounds)
    expanded = expand_box_details(box, factor, s.bounds, rng).box
    return CropRecord(
        crop_id=crop_id or f"{s.id}_{int(box.x0)}_{int(box.y0)}",
        slide_id=s.id,
        native_box=expanded,
        image=s.raster.crop(expanded),
        gt_mask=gt_mask.crop(expanded),
        source=source,
    )


def crop_native(s, det_box_lowres, gt_mask, det_mpp=DETECTION_MPP, rng=None, crop_id=None, source=AUTOMATIC):
    """Scale a detection from the detection grid up to the slide and crop it there."""
    native = scale_box(det_box_lowres, det_mpp / s.mpp)
    return crop_box_native(s, native, gt_mask, rng=rng, crop_id=crop_id, source=source)


def eval_dims(crop, eval_side):
    if eval_side is None:
        return crop.image.width, crop.image.height
    return eval_side, eval_side


def eval_space(crop, eval_side):
    """Image and ground truth at the evaluation size (soft-downsampled mask, cut at 0.5)."""
    w, h = eval_dims(crop, eval_side)
    if (w, h) == (crop.image.width, crop.image.height):
        return crop.image, crop.gt_mask
    image = resample(crop.image, w, h, "area")
    gt = binarize(resample(crop.gt_mask.to_raster(), w, h, "area"), 0.5)
    return image, gt


def segment_crop(crop, ladder, tag, backend, eval_side=None, space=None):
    """Soft masks keyed by ladder resolution for one crop.

    ``space`` may carry a precomputed :func:`eval_space` result.
    """
    backend = parse_backend(backend)
    image, gt = space or eval_space(crop, eval_side)
    preds = {}
    for r in ladder:
        model_input = to_model_input(resample(image, r, r, "area"), tag)
        preds[r] = backend.segment(model_input, context=gt, name=crop.crop_id)
    return preds


def score_crop(crop, preds, tag, backend_kind, eval_side=None, space=None):
    """Sample-space and full-space DSC for every predicted resolution."""
    _, gt = space or eval_space(crop, eval_side)
    tag = ColorSpace.parse(tag).value
    records = []
    for r, soft in preds.items():
        if soft.channels != 1 or (soft.width, soft.height) != (r, r):
            raise InvalidArgumentError(f"prediction for {crop.crop_id} at {r} has the wrong shape")
        gt_r = binarize(resample(gt.to_raster(), r, r, "area"), 0.5)
        sample = dsc(binarize(soft, 0.5), gt_r)
        full = dsc(binarize(resample(soft, gt.width, gt.height, "bilinear"), 0.5), gt)
        records.append(EvalRecord(crop.crop_id, r, "sample", tag, backend_kind, sample))
        records.append(EvalRecord(crop.crop_id, r, "full", tag, backend_kind, full))
    return records


def _evaluate_one(args):
    crop, ladder, tag, backend, eval_side = args
    space = eval_space(crop, eval_side)
    try:
        preds = segment_crop(crop, ladder, tag, backend, eval_side, space)
    except BackendFailure as exc:
        detail = f"{exc}: {exc.diagnostics}" if exc.diagnostics else str(exc)
        return crop.crop_id, None, detail
    return crop.crop_id, score_crop(crop, preds, tag, backend.kind, eval_side, space), None


def map_ordered(fn, items, jobs=1):
    """``map`` that fans out over ``jobs`` processes and keeps input order."""
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def run_detect_then_segment(crops, ladder, tag, backend, eval_side=None, jobs=1):
    """Segment every crop at every ladder resolution and score it in both spaces.

    ``eval_side=None`` evaluates at each crop's native size. A crop whose
    backend fails is recorded in ``failures`` and skipped.
    """
    crops = list(crops)
    if not crops:
        raise InvalidArgumentError("no crops to evaluate")
    ladder = ladder if isinstance(ladder, ResolutionLadder) else ResolutionLadder(tuple(ladder))
    backend = parse_backend(backend)
    tag = ColorSpace.parse(tag)
    crops.sort(key=lambda c: c.crop_id)
    result = RunResult()
    outcomes = map_ordered(_evaluate_one, [(c, ladder, tag, backend, eval_side) for c in crops], jobs)
    for crop_id, records, error in outcomes:
        if error is not None:
            log.warning("backend failed on %s: %s", crop_id, error)
            result.failures[crop_id] = error
        else:
            result.records.extend(records)
    if not result.records:
        raise RunError(f"backend failed on all {len(crops)} crops")
    return result
