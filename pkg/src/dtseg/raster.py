"""Immutable raster buffers and spatial resampling.

Samples live in ``[0, 1]``. A raster may be backed either by a float array or
by a ``uint8`` array (interpreted as ``value / 255``); the latter keeps
gigapixel-scale slides affordable in memory.  All resampling is separable:
each axis gets its own weight matrix, and large sources are processed in row
strips.
"""

from dataclasses import dataclass

import numpy as np
from PIL import Image
from scipy import sparse

from ._validation import check_positive_int, check_probability, check_unit_array
from .exceptions import InvalidArgumentError

RESAMPLE_MODES = ("area", "bilinear", "nearest")

# Rows per strip when resampling large sources.
_STRIP_ROWS = 1024


@dataclass(frozen=True, eq=False)
class Raster:
    """A ``(height, width, channels)`` pixel buffer with optional microns-per-pixel."""

    data: np.ndarray
    mpp: float | None = None

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim == 2:
            data = data[:, :, np.newaxis]
        if data.ndim != 3:
            raise InvalidArgumentError(f"raster data must be 2-D or 3-D, got {data.shape}")
        h, w, c = data.shape
        if h < 1 or w < 1:
            raise InvalidArgumentError(f"raster must be at least 1x1, got {w}x{h}")
        if c not in (1, 3):
            raise InvalidArgumentError(f"raster must have 1 or 3 channels, got {c}")
        data = check_unit_array(data)
        if data.flags.writeable:
            data = data.copy()
            data.flags.writeable = False
        object.__setattr__(self, "data", data)
        if self.mpp is not None:
            mpp = float(self.mpp)
            if not np.isfinite(mpp) or mpp <= 0:
                raise InvalidArgumentError(f"mpp must be > 0, got {self.mpp}")
            object.__setattr__(self, "mpp", mpp)

    @property
    def height(self):
        return self.data.shape[0]

    @property
    def width(self):
        return self.data.shape[1]

    @property
    def channels(self):
        return self.data.shape[2]

    @property
    def shape(self):
        return self.data.shape

    @property
    def samples(self):
        """Float64 view of the samples, shape ``(height, width, channels)``."""
        if self.data.dtype == np.uint8:
            return self.data.astype(np.float64) / 255.0
        return self.data.astype(np.float64, copy=False)

    def to_uint8(self):
        if self.data.dtype == np.uint8:
            return np.array(self.data)
        return np.round(self.data * 255.0).astype(np.uint8)

    def crop(self, box):
        x0, y0, x1, y1 = (int(v) for v in box)
        if x0 < 0 or y0 < 0 or x1 > self.width or y1 > self.height or x1 <= x0 or y1 <= y0:
            raise InvalidArgumentError(
                f"crop box {box} outside raster of size {self.width}x{self.height}"
            )
        return Raster(self.data[y0:y1, x0:x1], self.mpp)

    def with_mpp(self, mpp):
        return Raster(self.data, mpp)


@dataclass(frozen=True, eq=False)
class BinaryMask:
    """Foreground/background flags, shape ``(height, width)``."""

    bits: np.ndarray

    def __post_init__(self):
        bits = np.asarray(self.bits)
        if bits.ndim != 2:
            raise InvalidArgumentError(f"mask must be 2-D, got shape {bits.shape}")
        if bits.shape[0] < 1 or bits.shape[1] < 1:
            raise InvalidArgumentError("mask must be at least 1x1")
        if bits.dtype != bool:
            if not np.all(np.isin(bits, (0, 1))):
                raise InvalidArgumentError("mask values must be 0/1 or boolean")
            bits = bits.astype(bool)
        elif bits.flags.writeable:
            bits = bits.copy()
        bits.flags.writeable = False
        object.__setattr__(self, "bits", bits)

    @property
    def height(self):
        return self.bits.shape[0]

    @property
    def width(self):
        return self.bits.shape[1]

    @property
    def shape(self):
        return self.bits.shape

    @property
    def area(self):
        return int(np.count_nonzero(self.bits))

    def to_raster(self):
        return Raster(self.bits.astype(np.float64))

    def crop(self, box):
        x0, y0, x1, y1 = (int(v) for v in box)
        if x0 < 0 or y0 < 0 or x1 > self.width or y1 > self.height or x1 <= x0 or y1 <= y0:
            raise InvalidArgumentError(
                f"crop box {box} outside mask of size {self.width}x{self.height}"
            )
        return BinaryMask(self.bits[y0:y1, x0:x1])

    def __eq__(self, other):
        if not isinstance(other, BinaryMask):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self.bits, other.bits))

    __hash__ = None


def area_weights(n_src, n_dst):
    """Weight matrix ``(n_dst, n_src)`` of exact footprint overlaps.

    Target pixel ``i`` covers the source interval ``[i*n_src/n_dst, (i+1)*n_src/n_dst)``;
    each weight is the overlap with source pixel ``j`` divided by the footprint length.
    """
    i = np.arange(n_dst, dtype=np.float64)
    lo = i * n_src / n_dst
    hi = (i + 1) * n_src / n_dst
    j = np.arange(n_src, dtype=np.float64)
    overlap = np.minimum(hi[:, None], j[None, :] + 1) - np.maximum(lo[:, None], j[None, :])
    return np.clip(overlap, 0.0, None) * (n_dst / n_src)


def bilinear_weights(n_src, n_dst):
    """Weight matrix for linear interpolation between the two nearest source centers."""
    w = np.zeros((n_dst, n_src), dtype=np.float64)
    x = (np.arange(n_dst, dtype=np.float64) + 0.5) * n_src / n_dst - 0.5
    x = np.clip(x, 0.0, n_src - 1)
    j0 = np.floor(x).astype(np.intp)
    j1 = np.minimum(j0 + 1, n_src - 1)
    t = x - j0
    rows = np.arange(n_dst)
    np.add.at(w, (rows, j0), 1.0 - t)
    np.add.at(w, (rows, j1), t)
    return w


def nearest_indices(n_src, n_dst):
    idx = np.floor((np.arange(n_dst, dtype=np.float64) + 0.5) * n_src / n_dst).astype(np.intp)
    return np.minimum(idx, n_src - 1)


def _as_float(block):
    if block.dtype == np.uint8:
        return block.astype(np.float64) / 255.0
    return block.astype(np.float64, copy=False)


def _apply_separable(data, wy, wx):
    h, w, c = data.shape
    wy = sparse.csr_matrix(wy)
    wx = sparse.csr_matrix(wx)
    n, m = wx.shape[0], wy.shape[0]
    # y axis first, strip by strip: (k, W*C) rows fold straight into (m, W*C)
    vert = np.zeros((m, w * c))
    for r0 in range(0, h, _STRIP_ROWS):
        r1 = min(h, r0 + _STRIP_ROWS)
        vert += wy[:, r0:r1] @ _as_float(data[r0:r1]).reshape(r1 - r0, w * c)
    # x axis: (W, m*C) -> (n, m*C)
    horiz = wx @ vert.reshape(m, w, c).transpose(1, 0, 2).reshape(w, m * c)
    return np.ascontiguousarray(horiz.reshape(n, m, c).transpose(1, 0, 2))


def resample(src, target_w, target_h, mode="area"):
    """Resize ``src`` to ``target_w`` x ``target_h``.

    ``area`` averages the exact source footprint of every target pixel and
    handles any (also non-integer) scale factor; ``bilinear`` interpolates the
    four nearest source pixel centers; ``nearest`` copies one source pixel.
    """
    target_w = check_positive_int(target_w, "target_w")
    target_h = check_positive_int(target_h, "target_h")
    if mode not in RESAMPLE_MODES:
        raise InvalidArgumentError(f"unknown resample mode {mode!r}")
    mpp = None if src.mpp is None else src.mpp * src.width / target_w

    if mode == "nearest":
        iy = nearest_indices(src.height, target_h)
        ix = nearest_indices(src.width, target_w)
        return Raster(np.ascontiguousarray(src.data[iy][:, ix]), mpp)

    if (target_w, target_h) == (src.width, src.height):
        return Raster(src.data, mpp)

    weights = area_weights if mode == "area" else bilinear_weights
    wy = weights(src.height, target_h)
    wx = weights(src.width, target_w)
    out = _apply_separable(src.data, wy, wx)
    np.clip(out, 0.0, 1.0, out=out)
    return Raster(out, mpp)


def binarize(src, threshold=0.5):
    """Foreground wherever the single channel is ``>= threshold``."""
    if src.channels != 1:
        raise InvalidArgumentError(f"binarize needs a 1-channel raster, got {src.channels}")
    threshold = check_probability(threshold, "threshold", open_interval=True)
    return BinaryMask(src.samples[:, :, 0] >= threshold)


def mask_roundtrip(gt, resolution, down_mode="area", up_mode="bilinear", threshold=0.5):
    """Send a mask down to ``resolution`` x ``resolution`` and back to its own size."""
    resolution = check_positive_int(resolution, "resolution")
    low = resample(gt.to_raster(), resolution, resolution, down_mode)
    up = resample(low, gt.width, gt.height, up_mode)
    return binarize(up, threshold)


def read_png(path, mpp=None):
    """Load an 8-bit grayscale or RGB PNG as a uint8-backed raster."""
    with Image.open(path) as im:
        if im.mode not in ("L", "RGB"):
            im = im.convert("RGB")
        arr = np.asarray(im, dtype=np.uint8)
    return Raster(arr, mpp)


def write_png(raster, path):
    arr = raster.to_uint8()
    if arr.shape[2] == 1:
        arr = arr[:, :, 0]
    Image.fromarray(arr).save(path, format="PNG", compress_level=1)


def read_mask_png(path):
    with Image.open(path) as im:
        arr = np.asarray(im.convert("L"), dtype=np.uint8)
    return BinaryMask(arr >= 128)


def write_mask_png(mask, path):
    Image.fromarray(np.where(mask.bits, 255, 0).astype(np.uint8)).save(
        path, format="PNG", compress_level=1
    )
