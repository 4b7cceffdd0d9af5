"""Seeded synthetic glomeruli and slides with exact ground truth.

Objects are star-convex blobs ``r(theta) = r0 * (1 + sum_k a_k sin(k*theta + phi_k))``
with frequencies ``k`` from :func:`harmonic_orders`, so fine boundary detail
survives moderate downsampling but not the coarsest ladder steps.  They are
rendered darker than a light background, with a darkening tubule texture
inside and mild Gaussian noise everywhere.  Images are quantized to 8 bits
like a scanned slide; masks come straight from the analytic boundary.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import InfeasiblePlacementError, InvalidArgumentError
from .geometry import Box, tight_box
from .pipeline import EXPANSION_FACTOR, MANUAL, NATIVE_MPP, CropRecord, Slide, crop_rng
from .raster import BinaryMask, Raster

FG_TINT = np.array([0.06, -0.09, 0.03], dtype=np.float32)
BG_TINT = np.array([0.02, -0.03, 0.01], dtype=np.float32)
_STRIP = 512


@dataclass(frozen=True)
class SynthParams:
    side_range: tuple = (1000, 1400)
    harmonics: int = 6
    amplitude: float = 0.12
    fg_intensity: tuple = (0.45, 0.60)
    bg_intensity: tuple = (0.85, 0.95)
    texture: float = 0.08
    noise: float = 0.02
    seed: int = 0

    def __post_init__(self):
        lo, hi = self.side_range
        if lo < 512 or hi < lo:
            raise InvalidArgumentError(f"side_range must satisfy 512 <= lo <= hi, got {self.side_range}")
        if not 0.0 <= self.amplitude < 0.3:
            raise InvalidArgumentError(f"amplitude must lie in [0, 0.3), got {self.amplitude}")
        if self.harmonics < 0:
            raise InvalidArgumentError("harmonics must be >= 0")
        if self.fg_intensity[1] >= self.bg_intensity[0]:
            raise InvalidArgumentError("foreground band must lie below the background band")

    @property
    def band_gap(self):
        return self.bg_intensity[0] - self.fg_intensity[1]


@dataclass(frozen=True)
class _Blob:
    diameter: int
    r0: float
    amps: np.ndarray
    phases: np.ndarray
    level: float
    period: float
    tex_phase: tuple

    @property
    def r_max(self):
        return self.r0 * (1.0 + float(np.abs(self.amps).sum()))


def harmonic_orders(count):
    """Angular frequencies of the boundary terms, spread geometrically over 2..32."""
    if count <= 1:
        return [2] * count
    return [int(round(2 * 16 ** (i / (count - 1)))) for i in range(count)]


def _draw_blob(params, rng):
    diameter = int(rng.integers(params.side_range[0], params.side_range[1] + 1))
    k = params.harmonics
    if k and params.amplitude > 0:
        # weight by order: most of the amplitude sits in fine lobulation
        u = rng.uniform(0.2, 1.0, size=k) * np.asarray(harmonic_orders(k), dtype=np.float64)
        amps = params.amplitude * u / u.sum()
    else:
        amps = np.zeros(k)
    phases = rng.uniform(0.0, 2 * np.pi, size=k)
    r0 = diameter / 2.0 / (1.0 + float(amps.sum()))
    return _Blob(
        diameter=diameter,
        r0=r0,
        amps=amps,
        phases=phases,
        level=float(rng.uniform(*params.fg_intensity)),
        period=float(rng.uniform(30.0, 60.0)),
        tex_phase=(float(rng.uniform(0, 2 * np.pi)), float(rng.uniform(0, 2 * np.pi))),
    )


def _render_blob(blob, params, cx, cy, x0, y0, x1, y1):
    """Mask and noise-free RGB of ``blob`` centered at (cx, cy) over window [x0,x1)x[y0,y1)."""
    ys = np.arange(y0, y1, dtype=np.float64)[:, None] + 0.5
    xs = np.arange(x0, x1, dtype=np.float64)[None, :] + 0.5
    dx, dy = xs - cx, ys - cy
    d2 = dx * dx + dy * dy
    r_min = blob.r0 * (1.0 - float(np.abs(blob.amps).sum()))
    bits = d2 <= r_min * r_min
    # the angular profile only matters inside the annulus r_min < d <= r_max
    band = (d2 > r_min * r_min) & (d2 <= blob.r_max * blob.r_max)
    theta = np.arctan2(np.broadcast_to(dy, d2.shape)[band], np.broadcast_to(dx, d2.shape)[band])
    radius = np.full(theta.shape, blob.r0)
    for k, a, phi in zip(harmonic_orders(len(blob.amps)), blob.amps, blob.phases):
        radius += blob.r0 * a * np.sin(k * theta + phi)
    bits[band] = d2[band] <= radius * radius
    w = 2 * np.pi / blob.period
    tex = 0.5 * (1.0 + np.sin(w * xs + blob.tex_phase[0]) * np.sin(w * ys + blob.tex_phase[1]))
    level = (blob.level - params.texture * tex).astype(np.float32)
    rgb = level[:, :, None] + FG_TINT
    return bits, rgb


def _finish(base, rng, params):
    """Add noise and quantize a float32 RGB block to uint8."""
    if params.noise > 0:
        noise = rng.standard_normal(size=base.shape, dtype=np.float32)
        noise *= np.float32(params.noise)
        base = base + noise
    base *= np.float32(255.0)
    np.clip(base, 0.0, 255.0, out=base)
    return np.rint(base).astype(np.uint8)


def gen_glomerulus(params, rng, crop_id="synth_0000"):
    """One object on a square canvas 1.5x its diameter, as a manual crop record."""
    blob = _draw_blob(params, rng)
    side = int(np.floor(EXPANSION_FACTOR * blob.diameter + 0.5))
    slack = (side - 2 * blob.r_max) / 4.0
    cx = side / 2.0 + rng.uniform(-slack, slack)
    cy = side / 2.0 + rng.uniform(-slack, slack)
    bg = float(rng.uniform(*params.bg_intensity))
    bits, rgb = _render_blob(blob, params, cx, cy, 0, 0, side, side)
    base = np.empty((side, side, 3), dtype=np.float32)
    base[:] = bg + BG_TINT
    base[bits] = rgb[bits]
    image = _finish(base, rng, params)
    return CropRecord(
        crop_id=crop_id,
        slide_id="synth",
        native_box=Box(0, 0, side, side),
        image=Raster(image, NATIVE_MPP),
        gt_mask=BinaryMask(bits),
        source=MANUAL,
    )


def gen_crops(params, n, seed=None):
    """``n`` independent glomerulus crops with ids ``synth_0000`` ..."""
    seed = params.seed if seed is None else seed
    return [gen_glomerulus(params, crop_rng(seed, f"glom{i}"), f"synth_{i:04d}") for i in range(n)]


def gen_slide(params, n_objects, slide_side, rng, slide_id="slide_000", max_attempts=10_000, gap=None):
    """A native-resolution slide holding ``n_objects`` non-overlapping glomeruli.

    Returns ``(slide, boxes, masks)``; each mask covers exactly its box.
    Objects keep ``gap`` pixels (default a quarter of the largest diameter)
    from each other and from the slide border.
    """
    if n_objects < 0:
        raise InvalidArgumentError("n_objects must be >= 0")
    blobs = [_draw_blob(params, rng) for _ in range(n_objects)]
    if gap is None:
        gap = max((b.diameter for b in blobs), default=0) // 4 + 1
    placed = []  # (blob, cx, cy, square)
    for blob in blobs:
        half = int(np.ceil(blob.r_max)) + 1
        lo, hi = half + gap, slide_side - half - gap
        for _ in range(max_attempts):
            if hi <= lo:
                break
            cx = float(rng.uniform(lo, hi))
            cy = float(rng.uniform(lo, hi))
            sq = Box(int(cx) - half, int(cy) - half, int(cx) + half + 1, int(cy) + half + 1)
            if all(
                sq.x0 >= o.x1 + gap or o.x0 >= sq.x1 + gap or sq.y0 >= o.y1 + gap or o.y0 >= sq.y1 + gap
                for _, _, _, o in placed
            ):
                placed.append((blob, cx, cy, sq))
                break
        else:
            raise InfeasiblePlacementError(
                f"placed only {len(placed)} of {n_objects} objects on a {slide_side} slide",
                achieved=len(placed),
            )
        if hi <= lo:
            raise InfeasiblePlacementError(
                f"object of diameter {blob.diameter} does not fit a {slide_side} slide; "
                f"placed {len(placed)} of {n_objects}",
                achieved=len(placed),
            )

    rendered = [(_render_blob(b, params, cx, cy, *sq), sq) for b, cx, cy, sq in placed]
    bg = float(rng.uniform(*params.bg_intensity))
    image = np.empty((slide_side, slide_side, 3), dtype=np.uint8)
    for r0 in range(0, slide_side, _STRIP):
        r1 = min(slide_side, r0 + _STRIP)
        base = np.empty((r1 - r0, slide_side, 3), dtype=np.float32)
        base[:] = bg + BG_TINT
        for (bits, rgb), sq in rendered:
            a, b = max(r0, sq.y0), min(r1, sq.y1)
            if a >= b:
                continue
            sb = bits[a - sq.y0 : b - sq.y0]
            view = base[a - r0 : b - r0, sq.x0 : sq.x1]
            view[sb] = rgb[a - sq.y0 : b - sq.y0][sb]
        image[r0:r1] = _finish(base, rng, params)

    boxes, masks = [], []
    for (bits, _), sq in rendered:
        local = tight_box(bits)
        box = local.translate(sq.x0, sq.y0)
        boxes.append(box)
        masks.append(BinaryMask(bits[local.y0 : local.y1, local.x0 : local.x1]))
    slide = Slide(Raster(image, NATIVE_MPP), NATIVE_MPP, slide_id)
    return slide, boxes, masks


def slide_mask(slide, boxes, masks):
    """Union of per-object masks as one slide-sized :class:`BinaryMask`."""
    bits = np.zeros((slide.raster.height, slide.raster.width), dtype=bool)
    for box, mask in zip(boxes, masks):
        bits[int(box.y0) : int(box.y1), int(box.x0) : int(box.x1)] |= mask.bits
    return BinaryMask(bits)
