"""Detect-then-segment evaluation engine for high-resolution whole-slide objects."""

from .backends import ExternalBackend, OracleBackend, ThresholdBackend, parse_backend, segment, threshold_segment
from .colorspace import ColorSpace, lab_to_rgb, rgb_to_lab, to_model_input
from .evalstats import (
    EvalRecord,
    ResolutionLadder,
    Summary,
    aggregate,
    dsc,
    notch_boxplot_stats,
    wilcoxon_rank_sum,
)
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
from .geometry import Box, Detection, MatchResult, expand_box, iou, match_detections, scale_box
from .pipeline import (
    CropRecord,
    RunResult,
    Slide,
    crop_native,
    downsample_slide,
    run_detect_then_segment,
    sample_patches,
)
from .raster import BinaryMask, Raster, binarize, mask_roundtrip, resample
from .synth import SynthParams, gen_glomerulus, gen_slide

__version__ = "0.1.0"

__all__ = [
    "aggregate",
    "BackendFailure",
    "binarize",
    "BinaryMask",
    "Box",
    "CannotExpandError",
    "ColorSpace",
    "crop_native",
    "CropRecord",
    "Detection",
    "downsample_slide",
    "dsc",
    "DtsegError",
    "EvalRecord",
    "expand_box",
    "ExternalBackend",
    "gen_glomerulus",
    "gen_slide",
    "InfeasiblePlacementError",
    "InfeasibleTilingError",
    "InvalidArgumentError",
    "iou",
    "lab_to_rgb",
    "ManifestError",
    "mask_roundtrip",
    "match_detections",
    "MatchResult",
    "notch_boxplot_stats",
    "OracleBackend",
    "parse_backend",
    "Raster",
    "resample",
    "ResolutionLadder",
    "rgb_to_lab",
    "run_detect_then_segment",
    "RunError",
    "RunResult",
    "sample_patches",
    "scale_box",
    "segment",
    "Slide",
    "Summary",
    "SynthParams",
    "threshold_segment",
    "ThresholdBackend",
    "to_model_input",
    "wilcoxon_rank_sum",
]
