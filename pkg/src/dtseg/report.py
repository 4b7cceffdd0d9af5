"""Report files: summaries, rank-sum p-value matrices and box-plot data.

Numbers are written with ``repr`` (shortest round-trip form), ``.`` as the
decimal separator and LF line endings, so identical inputs give identical
bytes on every platform.
"""

import csv
import json
import os
from collections import defaultdict
from dataclasses import asdict

from .evalstats import EvalRecord, aggregate, notch_boxplot_stats, wilcoxon_rank_sum
from .exceptions import InvalidArgumentError

RECORD_FIELDS = ("crop_id", "resolution", "space", "color_space", "backend", "dsc")
SUMMARY_FIELDS = ("resolution", "space", "color_space", "backend", "n", "mean", "median", "std")
BOXPLOT_FIELDS = (
    "resolution", "space", "color_space", "backend", "n",
    "q1", "median", "q3", "notch_lo", "notch_hi", "whisker_lo", "whisker_hi", "outliers",
)  # fmt: skip
SIGNIFICANCE_LEVELS = (0.05, 0.01)


def _num(v):
    if isinstance(v, bool) or not isinstance(v, float):
        return str(v)
    return repr(float(v))


def _writer(fh):
    return csv.writer(fh, lineterminator="\n")


def write_records(records, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = _writer(fh)
        w.writerow(RECORD_FIELDS)
        for rec in records:
            w.writerow([_num(getattr(rec, f)) for f in RECORD_FIELDS])


def read_records(path):
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            out.append(
                EvalRecord(
                    crop_id=row["crop_id"],
                    resolution=int(row["resolution"]),
                    space=row["space"],
                    color_space=row["color_space"],
                    backend=row["backend"],
                    dsc=float(row["dsc"]),
                )
            )
    return out


def _by_condition(records):
    """``{(space, color, backend): {resolution: [dsc, ...]}}`` in crop-id order."""
    out = defaultdict(lambda: defaultdict(list))
    for rec in sorted(records, key=lambda r: (r.crop_id, -r.resolution, r.space)):
        out[(rec.space, rec.color_space, rec.backend)][rec.resolution].append(rec.dsc)
    return out


def wilcoxon_matrix(records):
    """Pairwise two-sided rank-sum p-values between ladder resolutions.

    Returns ``{condition: (resolutions, matrix, stats)}`` where ``matrix[i][j]``
    is the p-value and ``stats[i][j]`` the rank sum of resolution ``i``.
    """
    out = {}
    for cond, by_res in sorted(_by_condition(records).items()):
        res = sorted(by_res, reverse=True)
        p = [[1.0] * len(res) for _ in res]
        stat = [[0.0] * len(res) for _ in res]
        for i, a in enumerate(res):
            for j, b in enumerate(res):
                stat[i][j], p[i][j] = wilcoxon_rank_sum(by_res[a], by_res[b])
        out[cond] = (res, p, stat)
    return out


def boxplot_rows(records):
    rows = []
    for cond, by_res in sorted(_by_condition(records).items()):
        for r in sorted(by_res, reverse=True):
            rows.append(((r, *cond), len(by_res[r]), notch_boxplot_stats(by_res[r])))
    rows.sort(key=lambda t: (-t[0][0], t[0][1], t[0][2], t[0][3]))
    return rows


def write_reports(summaries, wilcoxon, boxplots, out_dir):
    """Write ``summary.csv``, ``summary.json``, ``wilcoxon.csv``, ``wilcoxon_pairs.csv``, ``boxplot.csv``."""
    if not summaries:
        raise InvalidArgumentError("no summaries to report")
    os.makedirs(out_dir, exist_ok=True)
    paths = {}

    path = os.path.join(out_dir, "summary.csv")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = _writer(fh)
        w.writerow(SUMMARY_FIELDS)
        for s in summaries:
            w.writerow([_num(getattr(s, f)) for f in SUMMARY_FIELDS])
    paths["summary.csv"] = path

    path = os.path.join(out_dir, "summary.json")
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        json.dump([asdict(s) for s in summaries], fh, indent=2)
        fh.write("\n")
    paths["summary.json"] = path

    path = os.path.join(out_dir, "wilcoxon.csv")
    pairs_path = os.path.join(out_dir, "wilcoxon_pairs.csv")
    with open(path, "w", newline="", encoding="utf-8") as fh, open(
        pairs_path, "w", newline="", encoding="utf-8"
    ) as ph:
        w, pw = _writer(fh), _writer(ph)
        pw.writerow(
            ["space", "color_space", "backend", "resolution_a", "resolution_b", "rank_sum_a", "p"]
            + [f"p_lt_{lvl}" for lvl in SIGNIFICANCE_LEVELS]
        )
        for (space, color, backend), (res, p, stat) in wilcoxon.items():
            w.writerow(["space", "color_space", "backend", "resolution", *res])
            for i, a in enumerate(res):
                w.writerow([space, color, backend, a, *(_num(v) for v in p[i])])
                for j in range(i + 1, len(res)):
                    pw.writerow(
                        [space, color, backend, a, res[j], _num(stat[i][j]), _num(p[i][j])]
                        + [int(p[i][j] < lvl) for lvl in SIGNIFICANCE_LEVELS]
                    )
    paths["wilcoxon.csv"] = path
    paths["wilcoxon_pairs.csv"] = pairs_path

    path = os.path.join(out_dir, "boxplot.csv")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = _writer(fh)
        w.writerow(BOXPLOT_FIELDS)
        for key, n, b in boxplots:
            w.writerow(
                [*key, n]
                + [_num(v) for v in (b.q1, b.median, b.q3, b.notch_lo, b.notch_hi, b.whisker_lo, b.whisker_hi)]
                + [";".join(_num(v) for v in b.outliers)]
            )
    paths["boxplot.csv"] = path
    return paths


def report_from_records(records, out_dir):
    records = list(records)
    return write_reports(aggregate(records), wilcoxon_matrix(records), boxplot_rows(records), out_dir)
