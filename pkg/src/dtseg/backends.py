"""Segmentation backends: the seam where real models plug into the pipeline.

A backend maps a square 3-channel raster to a 1-channel soft mask of the same
size.  Two reference backends ship with the package (``oracle`` and
``threshold``); ``external`` hands the image to another process through PNG
files.
"""

import os
import shlex
import subprocess
import tempfile

import numpy as np
from scipy import ndimage

from .exceptions import BackendFailure, InvalidArgumentError
from .raster import Raster, read_png, resample, write_png

HIST_BINS = 256


def otsu_cut(hist):
    """Index ``t`` maximizing between-class variance for classes ``[0, t)`` and ``[t, bins)``.

    Returns ``None`` when fewer than two bins are occupied. Ties go to the
    smallest cut.
    """
    hist = np.asarray(hist, dtype=np.float64)
    if np.count_nonzero(hist) < 2:
        return None
    bins = np.arange(hist.size, dtype=np.float64)
    total = hist.sum()
    w0 = np.cumsum(hist)[:-1]
    s0 = np.cumsum(hist * bins)[:-1]
    w1 = total - w0
    s1 = (hist * bins).sum() - s0
    valid = (w0 > 0) & (w1 > 0)
    between = np.full(w0.shape, -np.inf)
    m0 = s0[valid] / w0[valid]
    m1 = s1[valid] / w1[valid]
    between[valid] = w0[valid] * w1[valid] * (m0 - m1) ** 2
    return int(np.argmax(between)) + 1


def luminance_histogram(lum):
    idx = np.clip(np.floor(lum * HIST_BINS).astype(np.intp), 0, HIST_BINS - 1)
    return np.bincount(idx.ravel(), minlength=HIST_BINS), idx


def threshold_segment(src):
    """Classical reference segmenter.

    Otsu on the channel-mean luminance, darker class as foreground, largest
    4-connected component kept, holes filled.  Hard 0/1 output.
    """
    if src.channels != 3:
        raise InvalidArgumentError(f"threshold_segment needs 3 channels, got {src.channels}")
    lum = src.samples.mean(axis=2)
    hist, idx = luminance_histogram(lum)
    cut = otsu_cut(hist)
    out = np.zeros(lum.shape, dtype=np.float64)
    if cut is None:
        return Raster(out, src.mpp)
    fg = idx < cut
    labels, count = ndimage.label(fg)
    if count:
        sizes = np.bincount(labels.ravel())
        sizes[0] = 0
        fg = ndimage.binary_fill_holes(labels == int(np.argmax(sizes)))
        out[fg] = 1.0
    return Raster(out, src.mpp)


class SegmenterBackend:
    """Base class; subclasses implement :meth:`segment`."""

    kind = None

    def segment(self, image, context=None, name="input"):
        raise NotImplementedError

    def _check_output(self, image, out):
        if out.channels != 1 or (out.width, out.height) != (image.width, image.height):
            raise BackendFailure(
                f"{self.kind} backend returned {out.width}x{out.height}x{out.channels}, "
                f"expected {image.width}x{image.height}x1"
            )
        return out

    def __repr__(self):
        return f"{type(self).__name__}()"

    def __str__(self):
        return self.kind


class OracleBackend(SegmenterBackend):
    """Returns the ground truth area-downsampled to the input size."""

    kind = "oracle"

    def segment(self, image, context=None, name="input"):
        if context is None:
            raise InvalidArgumentError("oracle backend needs the ground-truth mask as context")
        return resample(context.to_raster(), image.width, image.height, "area")


class ThresholdBackend(SegmenterBackend):
    kind = "threshold"

    def segment(self, image, context=None, name="input"):
        return self._check_output(image, threshold_segment(image))


class ExternalBackend(SegmenterBackend):
    """Runs ``command <input.png> <output.png>`` in an isolated working directory."""

    kind = "external"

    def __init__(self, command, workdir=None, timeout=None):
        if not command or not str(command).strip():
            raise InvalidArgumentError("external backend needs a non-empty command")
        self.command = str(command)
        self.workdir = workdir
        self.timeout = timeout

    def __repr__(self):
        return f"ExternalBackend({self.command!r})"

    def __str__(self):
        return f"external:{self.command}"

    def segment(self, image, context=None, name="input"):
        if self.workdir is not None:
            os.makedirs(self.workdir, exist_ok=True)
        with tempfile.TemporaryDirectory(dir=self.workdir) as work:
            in_path = os.path.join(work, f"{name}_{image.width}.png")
            out_path = os.path.join(work, f"{name}_{image.width}_mask.png")
            write_png(image, in_path)
            argv = shlex.split(self.command) + [in_path, out_path]
            try:
                proc = subprocess.run(argv, capture_output=True, text=True, timeout=self.timeout)
            except (OSError, subprocess.TimeoutExpired) as exc:
                raise BackendFailure(f"could not run {argv[0]!r}: {exc}", str(exc)) from exc
            diagnostics = (proc.stdout + proc.stderr).strip()
            if proc.returncode != 0:
                raise BackendFailure(
                    f"external command exited with status {proc.returncode}", diagnostics
                )
            try:
                out = read_png(out_path)
            except (OSError, ValueError) as exc:
                raise BackendFailure(f"unreadable output mask: {exc}", diagnostics) from exc
        if out.channels != 1:
            raise BackendFailure("external output must be 8-bit grayscale", diagnostics)
        return self._check_output(image, Raster(out.samples, image.mpp))


def parse_backend(value):
    """``oracle``, ``threshold`` or ``external:<command>`` -> backend instance."""
    if isinstance(value, SegmenterBackend):
        return value
    value = str(value).strip()
    if value == "oracle":
        return OracleBackend()
    if value == "threshold":
        return ThresholdBackend()
    if value.startswith("external:"):
        return ExternalBackend(value[len("external:") :])
    raise InvalidArgumentError(
        f"unknown backend {value!r}; expected oracle, threshold or external:<command>"
    )


def segment(backend, image, context=None, name="input"):
    """Run ``backend`` on a square 3-channel input; returns a soft mask of equal size."""
    if image.channels != 3:
        raise InvalidArgumentError(f"segmenter input must have 3 channels, got {image.channels}")
    if image.width != image.height:
        raise InvalidArgumentError(f"segmenter input must be square, got {image.width}x{image.height}")
    return parse_backend(backend).segment(image, context=context, name=name)
