"""Dice scores, evaluation records, summaries and rank-sum statistics."""

import math
from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from .exceptions import InvalidArgumentError

DEFAULT_LADDER = (512, 256, 128, 64, 32, 28)
SPACES = ("sample", "full")
# Largest n + m for which the rank-sum p-value is computed exactly.
EXACT_MAX_TOTAL = 20
NOTCH_CONSTANT = 1.57


@dataclass(frozen=True)
class ResolutionLadder:
    resolutions: tuple = DEFAULT_LADDER

    def __post_init__(self):
        res = tuple(int(r) for r in self.resolutions)
        if not res:
            raise InvalidArgumentError("resolution ladder is empty")
        if any(r < 1 for r in res):
            raise InvalidArgumentError(f"ladder entries must be >= 1: {res}")
        if any(a <= b for a, b in zip(res, res[1:])):
            raise InvalidArgumentError(f"ladder must be strictly decreasing: {res}")
        object.__setattr__(self, "resolutions", res)

    @classmethod
    def parse(cls, text):
        try:
            return cls(tuple(int(p) for p in str(text).split(",") if p.strip()))
        except ValueError:
            raise InvalidArgumentError(f"malformed ladder {text!r}") from None

    def __iter__(self):
        return iter(self.resolutions)

    def __len__(self):
        return len(self.resolutions)

    def __str__(self):
        return ",".join(str(r) for r in self.resolutions)


@dataclass(frozen=True)
class EvalRecord:
    crop_id: str
    resolution: int
    space: str
    color_space: str
    backend: str
    dsc: float

    def __post_init__(self):
        if self.space not in SPACES:
            raise InvalidArgumentError(f"unknown evaluation space {self.space!r}")
        if not 0.0 <= self.dsc <= 1.0:
            raise InvalidArgumentError(f"dsc out of range: {self.dsc}")

    @property
    def group(self):
        return (self.resolution, self.space, self.color_space, self.backend)


@dataclass(frozen=True)
class Summary:
    resolution: int
    space: str
    color_space: str
    backend: str
    n: int
    mean: float
    median: float
    std: float


def dsc(a, b):
    """Dice similarity of two equally sized masks (both empty counts as 1.0)."""
    if a.shape != b.shape:
        raise InvalidArgumentError(f"mask shapes differ: {a.shape} vs {b.shape}")
    sa = int(np.count_nonzero(a.bits))
    sb = int(np.count_nonzero(b.bits))
    if sa + sb == 0:
        return 1.0
    inter = int(np.count_nonzero(a.bits & b.bits))
    return 2.0 * inter / (sa + sb)


def _median(sorted_vals):
    n = len(sorted_vals)
    mid = n // 2
    if n % 2:
        return sorted_vals[mid]
    return (sorted_vals[mid - 1] + sorted_vals[mid]) / 2.0


def describe(values):
    """``(n, mean, median, std)`` with the n-1 standard deviation (0 for n=1)."""
    vals = sorted(float(v) for v in values)
    n = len(vals)
    if n == 0:
        raise InvalidArgumentError("cannot describe an empty sample")
    mean = math.fsum(vals) / n
    std = math.sqrt(math.fsum((v - mean) ** 2 for v in vals) / (n - 1)) if n > 1 else 0.0
    return n, mean, _median(vals), std


def aggregate(records):
    """Group by (resolution, space, color space, backend) and summarize the DSCs.

    Groups come out sorted by descending resolution, then space, color space
    and backend, so reports are stable.
    """
    records = list(records)
    if not records:
        raise InvalidArgumentError("no records to aggregate")
    groups = defaultdict(list)
    for rec in records:
        groups[rec.group].append(rec.dsc)
    out = []
    for key in sorted(groups, key=lambda k: (-k[0], k[1], k[2], k[3])):
        n, mean, median, std = describe(groups[key])
        out.append(Summary(*key, n=n, mean=mean, median=median, std=std))
    return out


def midranks(values):
    """1-based ranks with ties replaced by their average rank."""
    values = np.asarray(values, dtype=np.float64)
    order = np.argsort(values, kind="mergesort")
    ranks = np.empty(len(values), dtype=np.float64)
    sorted_vals = values[order]
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def _rank_sum_distribution(doubled_ranks, n):
    """Counts of every achievable doubled rank sum over all size-``n`` subsets.

    ``counts[k][s]`` is built by a subset-sum recursion over the pooled
    (doubled, hence integral) ranks, which tallies every one of the
    C(N, n) assignments exactly.
    """
    total = int(sum(doubled_ranks))
    counts = np.zeros((n + 1, total + 1), dtype=object)
    counts[0, 0] = 1
    for r in doubled_ranks:
        r = int(r)
        for k in range(n, 0, -1):
            counts[k, r:] = counts[k, r:] + counts[k - 1, : total + 1 - r]
    return counts[n]


def _exact_p(ranks, n, w):
    doubled = [int(round(2 * r)) for r in ranks]
    dist = _rank_sum_distribution(doubled, n)
    center = n * (len(doubled) + 1)  # doubled expectation of W
    observed = abs(int(round(2 * w)) - center)
    hits = sum(c for s, c in enumerate(dist) if c and abs(s - center) >= observed)
    return hits / math.comb(len(doubled), n)


def _normal_p(ranks, n, m, w):
    big_n = n + m
    mean_w = n * (big_n + 1) / 2.0
    _, tie_counts = np.unique(ranks, return_counts=True)
    tie_term = float(np.sum(tie_counts**3 - tie_counts)) / (big_n * (big_n - 1)) if big_n > 1 else 0.0
    var = n * m / 12.0 * ((big_n + 1) - tie_term)
    if var <= 0:
        return 1.0
    z = max(abs(w - mean_w) - 0.5, 0.0) / math.sqrt(var)
    return math.erfc(z / math.sqrt(2.0))


def wilcoxon_rank_sum(x, y, method="auto"):
    """Two-sided Wilcoxon rank-sum test.

    Returns ``(W, p)`` where ``W`` is the midrank sum of ``x``. ``method`` is
    ``"exact"`` (enumerate every rank assignment), ``"normal"`` (tie-corrected
    normal approximation with 0.5 continuity correction) or ``"auto"``, which
    is exact when ``len(x) + len(y) <= 20``.
    """
    x = [float(v) for v in x]
    y = [float(v) for v in y]
    if not x or not y:
        raise InvalidArgumentError("both samples must be non-empty")
    if method not in ("auto", "exact", "normal"):
        raise InvalidArgumentError(f"unknown method {method!r}")
    n, m = len(x), len(y)
    ranks = midranks(x + y)
    w = float(ranks[:n].sum())
    if method == "auto":
        method = "exact" if n + m <= EXACT_MAX_TOTAL else "normal"
    p = _exact_p(ranks, n, w) if method == "exact" else _normal_p(ranks, n, m, w)
    return w, min(max(p, np.nextafter(0.0, 1.0)), 1.0)


@dataclass(frozen=True)
class BoxplotStats:
    q1: float
    median: float
    q3: float
    notch_lo: float
    notch_hi: float
    whisker_lo: float
    whisker_hi: float
    outliers: tuple


def notch_boxplot_stats(values):
    """Quartiles (inclusive linear interpolation), McGill notches, 1.5 IQR whiskers."""
    vals = np.sort(np.asarray(values, dtype=np.float64))
    if vals.size == 0:
        raise InvalidArgumentError("cannot summarize an empty sample")
    q1, median, q3 = (float(v) for v in np.percentile(vals, [25, 50, 75], method="linear"))
    iqr = q3 - q1
    half_notch = NOTCH_CONSTANT * iqr / math.sqrt(vals.size)
    lo_fence, hi_fence = q1 - 1.5 * iqr, q3 + 1.5 * iqr
    inside = vals[(vals >= lo_fence) & (vals <= hi_fence)]
    outliers = tuple(float(v) for v in vals[(vals < lo_fence) | (vals > hi_fence)])
    return BoxplotStats(
        q1=q1,
        median=median,
        q3=q3,
        notch_lo=median - half_notch,
        notch_hi=median + half_notch,
        whisker_lo=float(inside.min()),
        whisker_hi=float(inside.max()),
        outliers=outliers,
    )
