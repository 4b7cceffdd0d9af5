"""sRGB <-> CIELAB (D65) conversion and model-input normalization.

LAB values are stored rescaled into ``[0, 1]`` so they fit the raster
convention: ``L/100``, ``(a+128)/255``, ``(b+128)/255``.
"""

import enum

import numpy as np

from .exceptions import InvalidArgumentError
from .raster import Raster

# sRGB primaries, D65 white, IEC 61966-2-1 matrix.
RGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
XYZ_TO_RGB = np.linalg.inv(RGB_TO_XYZ)
# White point taken as the image of sRGB white so that (1,1,1) maps to a*=b*=0.
D65_WHITE = RGB_TO_XYZ.sum(axis=1)

_DELTA = 6.0 / 29.0


class ColorSpace(str, enum.Enum):
    RGB = "rgb"
    LAB = "lab"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise InvalidArgumentError(f"unknown color space {value!r}; expected rgb or lab") from None


def srgb_to_linear(c):
    c = np.asarray(c, dtype=np.float64)
    return np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)


def linear_to_srgb(c):
    c = np.clip(np.asarray(c, dtype=np.float64), 0.0, 1.0)
    return np.where(c <= 0.0031308, 12.92 * c, 1.055 * c ** (1 / 2.4) - 0.055)


def _f(t):
    return np.where(t > _DELTA**3, np.cbrt(t), t / (3 * _DELTA**2) + 4.0 / 29.0)


def _f_inv(t):
    return np.where(t > _DELTA, t**3, 3 * _DELTA**2 * (t - 4.0 / 29.0))


def srgb_to_lab_values(rgb):
    """Unscaled ``(L*, a*, b*)`` for sRGB values in ``[0, 1]``, last axis = channel."""
    xyz = srgb_to_linear(rgb) @ RGB_TO_XYZ.T / D65_WHITE
    fx, fy, fz = _f(xyz[..., 0]), _f(xyz[..., 1]), _f(xyz[..., 2])
    return np.stack([116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)], axis=-1)


def lab_values_to_srgb(lab):
    lab = np.asarray(lab, dtype=np.float64)
    fy = (lab[..., 0] + 16.0) / 116.0
    fx = fy + lab[..., 1] / 500.0
    fz = fy - lab[..., 2] / 200.0
    xyz = np.stack([_f_inv(fx), _f_inv(fy), _f_inv(fz)], axis=-1) * D65_WHITE
    return linear_to_srgb(xyz @ XYZ_TO_RGB.T)


def scale_lab(lab):
    lab = np.asarray(lab, dtype=np.float64)
    return np.stack(
        [lab[..., 0] / 100.0, (lab[..., 1] + 128.0) / 255.0, (lab[..., 2] + 128.0) / 255.0],
        axis=-1,
    )


def unscale_lab(stored):
    stored = np.asarray(stored, dtype=np.float64)
    return np.stack(
        [stored[..., 0] * 100.0, stored[..., 1] * 255.0 - 128.0, stored[..., 2] * 255.0 - 128.0],
        axis=-1,
    )


def _require_rgb(src, op):
    if src.channels != 3:
        raise InvalidArgumentError(f"{op} needs a 3-channel raster, got {src.channels}")


def rgb_to_lab(src):
    """Convert an sRGB raster to stored (rescaled) CIELAB."""
    _require_rgb(src, "rgb_to_lab")
    stored = scale_lab(srgb_to_lab_values(src.samples))
    # a*, b* of saturated sRGB colors stay well inside [-128, 127]; clip guards rounding.
    return Raster(np.clip(stored, 0.0, 1.0), src.mpp)


def lab_to_rgb(src):
    """Invert :func:`rgb_to_lab`; out-of-gamut results are clamped to ``[0, 1]``."""
    _require_rgb(src, "lab_to_rgb")
    return Raster(lab_values_to_srgb(unscale_lab(src.samples)), src.mpp)


def to_model_input(src, tag):
    tag = ColorSpace.parse(tag)
    if tag is ColorSpace.RGB:
        _require_rgb(src, "to_model_input")
        return src
    return rgb_to_lab(src)
