"""Axis-aligned boxes, IoU, randomized square expansion and detection matching."""

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import CannotExpandError, InvalidArgumentError


@dataclass(frozen=True)
class Box:
    """Half-open pixel rectangle ``[x0, x1) x [y0, y1)``."""

    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self):
        coords = (self.x0, self.y0, self.x1, self.y1)
        if not all(math.isfinite(c) for c in coords):
            raise InvalidArgumentError(f"box coordinates must be finite: {coords}")
        if self.x1 <= self.x0 or self.y1 <= self.y0:
            raise InvalidArgumentError(f"degenerate box {coords}")

    @property
    def width(self):
        return self.x1 - self.x0

    @property
    def height(self):
        return self.y1 - self.y0

    @property
    def area(self):
        return self.width * self.height

    @property
    def center(self):
        return ((self.x0 + self.x1) / 2, (self.y0 + self.y1) / 2)

    def __iter__(self):
        return iter((self.x0, self.y0, self.x1, self.y1))

    def contains(self, other):
        return (
            self.x0 <= other.x0
            and self.y0 <= other.y0
            and self.x1 >= other.x1
            and self.y1 >= other.y1
        )

    def translate(self, dx, dy):
        return Box(self.x0 + dx, self.y0 + dy, self.x1 + dx, self.y1 + dy)


@dataclass(frozen=True)
class Detection:
    box: Box
    confidence: float = 1.0
    label: str | None = None

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise InvalidArgumentError(f"confidence must lie in [0, 1], got {self.confidence}")


@dataclass(frozen=True)
class MatchResult:
    pairs: list = field(default_factory=list)  # (pred index, gt index, iou)
    unmatched_predictions: list = field(default_factory=list)
    unmatched_ground_truths: list = field(default_factory=list)


@dataclass(frozen=True)
class Expansion:
    """Outcome of :func:`expand_box_details`.

    ``unclamped`` is the square before it is translated into the bounds and
    ``shift`` the drawn center offset.
    """

    box: Box
    unclamped: Box
    shift: tuple
    side: int


def iou(a, b):
    ix = min(a.x1, b.x1) - max(a.x0, b.x0)
    iy = min(a.y1, b.y1) - max(a.y0, b.y0)
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    return inter / (a.area + b.area - inter)


def _round_half_up(x):
    return int(math.floor(x + 0.5))


def expand_box_details(b, factor, bounds, rng=None):
    """Square expansion of ``b`` with a random center shift, kept inside ``bounds``.

    The square side is ``round(factor * max(w, h))``. The center is moved by a
    uniform draw in ``[-(s-w)/2, (s-w)/2] x [-(s-h)/2, (s-h)/2]``, which keeps
    ``b`` inside the square. Passing ``rng=None`` gives the zero shift.
    """
    if factor < 1:
        raise InvalidArgumentError(f"expansion factor must be >= 1, got {factor}")
    if not bounds.contains(b):
        raise InvalidArgumentError(f"box {b} lies outside bounds {bounds}")
    w, h = b.width, b.height
    side = _round_half_up(factor * max(w, h))
    if side > min(bounds.width, bounds.height):
        raise CannotExpandError(
            f"expanded side {side} exceeds bounds {bounds.width}x{bounds.height}"
        )
    max_dx, max_dy = (side - w) / 2, (side - h) / 2
    if rng is None:
        dx = dy = 0.0
    else:
        dx = float(rng.uniform(-max_dx, max_dx))
        dy = float(rng.uniform(-max_dy, max_dy))
    cx, cy = b.center
    x0 = _round_half_up(cx + dx - side / 2)
    y0 = _round_half_up(cy + dy - side / 2)
    # rounding must not push the square off the box
    x0 = min(max(x0, math.ceil(b.x1 - side)), math.floor(b.x0))
    y0 = min(max(y0, math.ceil(b.y1 - side)), math.floor(b.y0))
    unclamped = Box(x0, y0, x0 + side, y0 + side)

    x0 = min(max(x0, bounds.x0), bounds.x1 - side)
    y0 = min(max(y0, bounds.y0), bounds.y1 - side)
    return Expansion(Box(x0, y0, x0 + side, y0 + side), unclamped, (dx, dy), side)


def expand_box(b, factor, bounds, rng=None):
    return expand_box_details(b, factor, bounds, rng).box


def scale_box(b, factor):
    """Scale coordinates by ``factor`` and round outward to whole pixels."""
    if not factor > 0:
        raise InvalidArgumentError(f"scale factor must be > 0, got {factor}")

    # snap products that are integral up to float noise before floor/ceil
    def snap(v):
        r = round(v)
        return r if abs(v - r) < 1e-9 else v

    return Box(
        math.floor(snap(b.x0 * factor)),
        math.floor(snap(b.y0 * factor)),
        math.ceil(snap(b.x1 * factor)),
        math.ceil(snap(b.y1 * factor)),
    )


def clip_box(b, bounds):
    return Box(
        max(b.x0, bounds.x0), max(b.y0, bounds.y0), min(b.x1, bounds.x1), min(b.y1, bounds.y1)
    )


def match_detections(preds, gts, threshold=0.5):
    """Greedy one-to-one matching of predictions to ground-truth boxes.

    Candidate pairs with IoU strictly above ``threshold`` are visited by
    descending IoU, then descending confidence, then ascending prediction
    index; a pair is kept when neither side is matched yet.
    """
    if not 0.0 < threshold < 1.0:
        raise InvalidArgumentError(f"threshold must lie in (0, 1), got {threshold}")
    candidates = []
    for pi, det in enumerate(preds):
        for gi, gt in enumerate(gts):
            v = iou(det.box, gt)
            if v > threshold:
                candidates.append((-v, -det.confidence, pi, gi, v))
    candidates.sort()
    used_p, used_g, pairs = set(), set(), []
    for _, _, pi, gi, v in candidates:
        if pi in used_p or gi in used_g:
            continue
        used_p.add(pi)
        used_g.add(gi)
        pairs.append((pi, gi, v))
    return MatchResult(
        pairs=pairs,
        unmatched_predictions=[i for i in range(len(preds)) if i not in used_p],
        unmatched_ground_truths=[i for i in range(len(gts)) if i not in used_g],
    )


def _fmt(v):
    return str(int(v)) if float(v).is_integer() else repr(float(v))


def write_boxes_csv(path, rows):
    """Write ``(id, box[, confidence])`` rows as ``id,x0,y0,x1,y1[,confidence]``."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        for row in rows:
            ident, box = row[0], row[1]
            out = [ident, *(_fmt(c) for c in box)]
            if len(row) > 2 and row[2] is not None:
                out.append(repr(float(row[2])))
            writer.writerow(out)


def read_boxes_csv(path):
    """Return ``[(id, Box, confidence or None), ...]``; a header row is skipped."""
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.reader(fh):
            if not rec or not rec[0].strip():
                continue
            try:
                coords = [float(v) for v in rec[1:5]]
            except ValueError:
                if not rows:
                    continue  # header
                raise InvalidArgumentError(f"malformed box row in {path}: {rec}") from None
            if len(coords) != 4:
                raise InvalidArgumentError(f"malformed box row in {path}: {rec}")
            coords = [int(c) if c.is_integer() else c for c in coords]
            conf = float(rec[5]) if len(rec) > 5 and rec[5].strip() else None
            rows.append((rec[0], Box(*coords), conf))
    return rows


def boxes_disjoint(boxes):
    return all(iou(a, b) == 0.0 for i, a in enumerate(boxes) for b in boxes[i + 1 :])


def tight_box(bits):
    """Tight half-open bounding box of the ``True`` pixels of a 2-D array."""
    ys, xs = np.nonzero(bits)
    if ys.size == 0:
        raise InvalidArgumentError("empty mask has no bounding box")
    return Box(int(xs.min()), int(ys.min()), int(xs.max()) + 1, int(ys.max()) + 1)
