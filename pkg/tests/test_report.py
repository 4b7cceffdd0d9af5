import csv
import json

import pytest

from dtseg.evalstats import EvalRecord, aggregate, notch_boxplot_stats
from dtseg.exceptions import InvalidArgumentError
from dtseg.report import (
    boxplot_rows,
    read_records,
    report_from_records,
    wilcoxon_matrix,
    write_records,
    write_reports,
)

LADDER = (512, 256, 128, 64, 32, 28)


def _records():
    out = []
    for i in range(5):
        for k, r in enumerate(LADDER):
            for space in ("sample", "full"):
                out.append(EvalRecord(f"c{i}", r, space, "rgb", "oracle", 1.0 - 0.01 * k * (i + 1) / 5))
    return out


def _read(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_summary_has_twelve_rows(tmp_path):
    report_from_records(_records(), tmp_path)
    rows = _read(tmp_path / "summary.csv")
    assert rows[0] == ["resolution", "space", "color_space", "backend", "n", "mean", "median", "std"]
    assert len(rows) == 13
    assert [int(r[0]) for r in rows[1:]] == [r for r in LADDER for _ in range(2)]
    data = json.loads((tmp_path / "summary.json").read_text())
    assert len(data) == 12
    assert data[0]["mean"] == float(rows[1][5])


def test_wilcoxon_matrix_is_symmetric_with_unit_diagonal():
    for res, p, _ in wilcoxon_matrix(_records()).values():
        assert res == list(LADDER)
        for i in range(len(res)):
            assert p[i][i] == 1.0
            for j in range(len(res)):
                assert p[i][j] == pytest.approx(p[j][i], abs=1e-15)


def test_wilcoxon_csv_layout(tmp_path):
    report_from_records(_records(), tmp_path)
    rows = _read(tmp_path / "wilcoxon.csv")
    # one header + six rows per (space, color, backend) condition
    assert len(rows) == 2 * 7
    header = rows[0]
    assert header[4:] == [str(r) for r in LADDER]
    body = rows[1:7]
    matrix = [[float(v) for v in r[4:]] for r in body]
    for i in range(6):
        assert matrix[i][i] == 1.0
        for j in range(6):
            assert matrix[i][j] == matrix[j][i]
    pairs = _read(tmp_path / "wilcoxon_pairs.csv")
    assert pairs[0][-2:] == ["p_lt_0.05", "p_lt_0.01"]
    assert len(pairs) == 1 + 2 * 15
    for row in pairs[1:]:
        p = float(row[6])
        assert row[7] == str(int(p < 0.05)) and row[8] == str(int(p < 0.01))


def test_boxplot_row_matches_stats_module(tmp_path):
    recs = [EvalRecord(f"c{i}", 28, "full", "lab", "threshold", v) for i, v in enumerate([0.1, 0.2, 0.3, 0.4, 0.5])]
    report_from_records(recs, tmp_path)
    rows = _read(tmp_path / "boxplot.csv")
    assert len(rows) == 2
    ref = notch_boxplot_stats([0.1, 0.2, 0.3, 0.4, 0.5])
    row = dict(zip(rows[0], rows[1]))
    for key in ("q1", "median", "q3", "notch_lo", "notch_hi"):
        assert float(row[key]) == getattr(ref, key)
    assert (float(row["whisker_lo"]), float(row["whisker_hi"])) == (ref.whisker_lo, ref.whisker_hi)
    assert row["outliers"] == ""


def test_boxplot_rows_for_one_to_five_scaled():
    recs = [EvalRecord(f"c{v}", 64, "full", "rgb", "oracle", v / 5) for v in (1, 2, 3, 4, 5)]
    (key, n, stats), = boxplot_rows(recs)
    assert key == (64, "full", "rgb", "oracle") and n == 5
    assert stats.median == pytest.approx(0.6)


def test_records_roundtrip(tmp_path):
    recs = _records()
    write_records(recs, tmp_path / "records.csv")
    assert read_records(tmp_path / "records.csv") == recs


def test_reports_are_byte_stable_and_lf(tmp_path):
    report_from_records(_records(), tmp_path / "a")
    report_from_records(list(reversed(_records())), tmp_path / "b")
    for name in ("summary.csv", "summary.json", "wilcoxon.csv", "wilcoxon_pairs.csv", "boxplot.csv"):
        a = (tmp_path / "a" / name).read_bytes()
        assert a == (tmp_path / "b" / name).read_bytes()
        assert b"\r" not in a


def test_write_reports_needs_summaries(tmp_path):
    with pytest.raises(InvalidArgumentError):
        write_reports([], {}, [], tmp_path)


def test_aggregate_feeds_write_reports(tmp_path):
    recs = _records()
    paths = write_reports(aggregate(recs), wilcoxon_matrix(recs), boxplot_rows(recs), tmp_path)
    assert sorted(paths) == ["boxplot.csv", "summary.csv", "summary.json", "wilcoxon.csv", "wilcoxon_pairs.csv"]
