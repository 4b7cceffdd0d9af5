"""scikit-learn compatible wrappers around the resampling, color and segmentation steps.

Image batches are arrays shaped ``(n, height, width[, channels])`` with values
in ``[0, 1]``, so the steps compose with :class:`sklearn.pipeline.Pipeline`.
"""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_image_batch, check_positive_int
from .backends import parse_backend, threshold_segment
from .colorspace import ColorSpace, lab_to_rgb, rgb_to_lab
from .evalstats import ResolutionLadder, dsc
from .exceptions import InvalidArgumentError
from .pipeline import run_detect_then_segment, segment_crop
from .raster import RESAMPLE_MODES, BinaryMask, Raster, binarize, resample


def _rasters(X):
    return [Raster(x) for x in X]


class LadderResampler(TransformerMixin, BaseEstimator):
    """Resize every image of a batch to ``resolution`` x ``resolution``."""

    def __init__(self, resolution=512, mode="area"):
        self.resolution = resolution
        self.mode = mode

    def fit(self, X, y=None):
        X = check_image_batch(X)
        check_positive_int(self.resolution, "resolution")
        if self.mode not in RESAMPLE_MODES:
            raise InvalidArgumentError(f"unknown resample mode {self.mode!r}")
        self.n_channels_in_ = X.shape[-1]
        return self

    def transform(self, X):
        check_is_fitted(self, "n_channels_in_")
        X = check_image_batch(X, channels=self.n_channels_in_)
        r = self.resolution
        return np.stack([resample(x, r, r, self.mode).samples for x in _rasters(X)])


class ColorSpaceTransformer(TransformerMixin, BaseEstimator):
    """sRGB batch -> model input in the chosen color space (stored LAB for ``"lab"``)."""

    def __init__(self, color_space="lab"):
        self.color_space = color_space

    def fit(self, X, y=None):
        check_image_batch(X, channels=3)
        self.color_space_ = ColorSpace.parse(self.color_space)
        return self

    def transform(self, X):
        check_is_fitted(self, "color_space_")
        X = check_image_batch(X, channels=3)
        if self.color_space_ is ColorSpace.RGB:
            return X.astype(np.float64)
        return np.stack([rgb_to_lab(x).samples for x in _rasters(X)])

    def inverse_transform(self, X):
        check_is_fitted(self, "color_space_")
        X = check_image_batch(X, channels=3)
        if self.color_space_ is ColorSpace.RGB:
            return X.astype(np.float64)
        return np.stack([lab_to_rgb(x).samples for x in _rasters(X)])


class ThresholdSegmenter(BaseEstimator):
    """Otsu reference segmenter with the usual ``fit``/``predict``/``score`` surface.

    Nothing is learned; ``fit`` only validates the input.
    """

    def __init__(self, threshold=0.5):
        self.threshold = threshold

    def fit(self, X, y=None):
        X = check_image_batch(X, channels=3)
        self.n_features_in_ = int(np.prod(X.shape[1:]))
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "n_features_in_")
        X = check_image_batch(X, channels=3)
        return np.stack([threshold_segment(x).samples[:, :, 0] for x in _rasters(X)])

    def predict(self, X):
        return self.predict_proba(X) >= self.threshold

    def score(self, X, y):
        """Mean Dice against boolean masks ``y`` shaped ``(n, height, width)``."""
        pred = self.predict(X)
        y = np.asarray(y, dtype=bool)
        if y.shape != pred.shape:
            raise InvalidArgumentError(f"masks have shape {y.shape}, expected {pred.shape}")
        return float(np.mean([dsc(BinaryMask(p), BinaryMask(t)) for p, t in zip(pred, y)]))


class DetectThenSegment(BaseEstimator):
    """Segment crop records over a resolution ladder and score them.

    ``X`` is a list of :class:`~dtseg.pipeline.CropRecord`.
    """

    def __init__(self, ladder=(512, 256, 128, 64, 32, 28), color_space="rgb", backend="threshold", eval_side=512, n_jobs=1):
        self.ladder = ladder
        self.color_space = color_space
        self.backend = backend
        self.eval_side = eval_side
        self.n_jobs = n_jobs

    def fit(self, X=None, y=None):
        ladder = self.ladder
        self.ladder_ = ladder if isinstance(ladder, ResolutionLadder) else ResolutionLadder(tuple(ladder))
        self.color_space_ = ColorSpace.parse(self.color_space)
        self.backend_ = parse_backend(self.backend)
        if self.eval_side is not None:
            check_positive_int(self.eval_side, "eval_side")
        return self

    def predict(self, X):
        """Per crop, ``{resolution: BinaryMask}`` at the evaluation size."""
        check_is_fitted(self, "ladder_")
        out = []
        for crop in X:
            preds = segment_crop(crop, self.ladder_, self.color_space_, self.backend_, self.eval_side)
            w, h = (crop.image.width, crop.image.height) if self.eval_side is None else (self.eval_side,) * 2
            out.append({r: binarize(resample(p, w, h, "bilinear"), 0.5) for r, p in preds.items()})
        return out

    def evaluate(self, X):
        check_is_fitted(self, "ladder_")
        return run_detect_then_segment(
            X, self.ladder_, self.color_space_, self.backend_, self.eval_side, self.n_jobs
        )

    def score(self, X, y=None):
        """Mean full-space Dice over all crops and ladder resolutions."""
        records = self.evaluate(X).records
        return float(np.mean([r.dsc for r in records if r.space == "full"]))
