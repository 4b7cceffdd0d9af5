"""Joint image/mask augmentation used when preparing training pairs."""

from dataclasses import asdict, dataclass, fields

import numpy as np
from scipy import ndimage

from ._validation import check_probability
from .exceptions import InvalidArgumentError
from .raster import BinaryMask, Raster

TRANSFORMS = ("channel_shuffle", "translation", "rotation", "shear", "flip_lr", "blur")
BACKGROUND = 1.0


@dataclass(frozen=True)
class AugmentParams:
    apply_probability: float = 0.5
    transform_probability: float = 0.5
    rotation: tuple = (-45.0, 45.0)
    translation: tuple = (-0.1, 0.1)
    shear: tuple = (-10.0, 10.0)
    blur_sigma: tuple = (0.0, 2.0)
    flip_lr: bool = True
    channel_shuffle: bool = True

    def __post_init__(self):
        check_probability(self.apply_probability, "apply_probability")
        check_probability(self.transform_probability, "transform_probability")
        for name in ("rotation", "translation", "shear", "blur_sigma"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise InvalidArgumentError(f"{name} range is not ordered: ({lo}, {hi})")
            object.__setattr__(self, name, (float(lo), float(hi)))
        if self.blur_sigma[0] < 0:
            raise InvalidArgumentError("blur_sigma must be >= 0")

    def to_config(self, prefix="augment."):
        """Flatten into ``key=value`` config entries."""
        out = {}
        for k, v in asdict(self).items():
            if isinstance(v, tuple):
                v = ",".join(repr(x) for x in v)
            elif isinstance(v, bool):
                v = "true" if v else "false"
            out[prefix + k] = str(v)
        return out

    @classmethod
    def from_config(cls, entries, prefix="augment."):
        kwargs = {}
        for f in fields(cls):
            key = prefix + f.name
            if key not in entries:
                continue
            raw = str(entries[key]).strip()
            if f.name in ("flip_lr", "channel_shuffle"):
                kwargs[f.name] = raw.lower() in ("1", "true", "yes", "on")
            elif f.name in ("apply_probability", "transform_probability"):
                kwargs[f.name] = float(raw)
            else:
                parts = [float(p) for p in raw.split(",")]
                if len(parts) != 2:
                    raise InvalidArgumentError(f"{key} needs two comma-separated numbers")
                kwargs[f.name] = tuple(parts)
        return cls(**kwargs)


@dataclass(frozen=True)
class AugmentDraw:
    """One concrete realization of the random augmentation choices."""

    channel_order: tuple | None = None
    translation: tuple | None = None  # (tx, ty) in pixels
    rotation: float | None = None  # degrees
    shear: float | None = None  # degrees
    flip_lr: bool = False
    blur_sigma: float | None = None

    @property
    def is_identity(self):
        return (
            self.channel_order is None
            and self.translation is None
            and self.rotation is None
            and self.shear is None
            and not self.flip_lr
            and self.blur_sigma is None
        )


def draw_augmentation(params, rng, shape):
    """Sample an :class:`AugmentDraw` for an image of ``(height, width, channels)``."""
    h, w, c = shape
    if rng.random() >= params.apply_probability:
        return AugmentDraw()
    picked = {name: rng.random() < params.transform_probability for name in TRANSFORMS}
    kw = {}
    if picked["channel_shuffle"] and params.channel_shuffle and c > 1:
        kw["channel_order"] = tuple(int(i) for i in rng.permutation(c))
    if picked["translation"]:
        lo, hi = params.translation
        kw["translation"] = (float(rng.uniform(lo, hi) * w), float(rng.uniform(lo, hi) * h))
    if picked["rotation"]:
        kw["rotation"] = float(rng.uniform(*params.rotation))
    if picked["shear"]:
        kw["shear"] = float(rng.uniform(*params.shear))
    if picked["flip_lr"] and params.flip_lr:
        kw["flip_lr"] = True
    if picked["blur"]:
        kw["blur_sigma"] = float(rng.uniform(*params.blur_sigma))
    return AugmentDraw(**kw)


def affine_matrix(draw, shape):
    """Forward 3x3 affine in (row, col) coordinates, about the image center.

    Order: flip, shear, rotation, translation.
    """
    h, w = shape[:2]
    cy, cx = (h - 1) / 2, (w - 1) / 2
    m = np.eye(3)
    if draw.flip_lr:
        m = np.array([[1.0, 0, 0], [0, -1.0, 0], [0, 0, 1]]) @ m
    if draw.shear is not None:
        k = np.tan(np.deg2rad(draw.shear))
        m = np.array([[1.0, 0, 0], [k, 1.0, 0], [0, 0, 1]]) @ m
    if draw.rotation is not None:
        t = np.deg2rad(draw.rotation)
        cos, sin = np.cos(t), np.sin(t)
        m = np.array([[cos, -sin, 0], [sin, cos, 0], [0, 0, 1]]) @ m
    if draw.translation is not None:
        tx, ty = draw.translation
        m = np.array([[1.0, 0, ty], [0, 1.0, tx], [0, 0, 1]]) @ m
    to_center = np.array([[1.0, 0, -cy], [0, 1.0, -cx], [0, 0, 1]])
    back = np.array([[1.0, 0, cy], [0, 1.0, cx], [0, 0, 1]])
    return back @ m @ to_center


def _warp(plane, inverse, order, cval):
    return ndimage.affine_transform(
        plane, inverse[:2, :2], offset=inverse[:2, 2], order=order, mode="constant", cval=cval
    )


def apply_augmentation(image, mask, draw):
    if (image.height, image.width) != mask.shape:
        raise InvalidArgumentError(
            f"image {image.width}x{image.height} and mask {mask.width}x{mask.height} differ"
        )
    if draw.is_identity:
        return image, mask
    data = image.samples
    bits = mask.bits
    if draw.channel_order is not None:
        data = data[:, :, list(draw.channel_order)]
    geometric = draw.flip_lr or any(
        v is not None for v in (draw.translation, draw.rotation, draw.shear)
    )
    if geometric:
        inverse = np.linalg.inv(affine_matrix(draw, data.shape))
        data = np.stack(
            [_warp(data[:, :, k], inverse, 1, BACKGROUND) for k in range(data.shape[2])], axis=-1
        )
        bits = _warp(bits.astype(np.uint8), inverse, 0, 0).astype(bool)
    if draw.blur_sigma:
        data = np.stack(
            [ndimage.gaussian_filter(data[:, :, k], draw.blur_sigma) for k in range(data.shape[2])],
            axis=-1,
        )
    return Raster(np.clip(data, 0.0, 1.0), image.mpp), BinaryMask(bits)


def augment(image, mask, params, rng):
    """Randomly augment an image/mask pair; geometric moves are shared, photometric ones hit the image only."""
    if (image.height, image.width) != mask.shape:
        raise InvalidArgumentError(
            f"image {image.width}x{image.height} and mask {mask.width}x{mask.height} differ"
        )
    return apply_augmentation(image, mask, draw_augmentation(params, rng, image.shape))
