"""Acceptance suite: one PASS/FAIL line per primary criterion.

Run with ``pytest tests/test_acceptance.py -v``; the verdict lines are printed
even when output capture is on.
"""

import filecmp
import math
import time

import numpy as np
import pytest

from dtseg.cli import main
from dtseg.colorspace import lab_to_rgb, rgb_to_lab, srgb_to_lab_values, unscale_lab
from dtseg.evalstats import DEFAULT_LADDER, dsc, wilcoxon_rank_sum
from dtseg.geometry import Box, expand_box_details, iou, scale_box
from dtseg.pipeline import eval_space, run_detect_then_segment
from dtseg.raster import BinaryMask, Raster, mask_roundtrip
from dtseg.synth import SynthParams, gen_crops

from helpers import run_chain
from oracles import dsc_bruteforce, rank_sum_enumeration, srgb_to_lab_scalar

N_CROPS = 50
EVAL_SIDE = 512
REPORT_FILES = ("summary.csv", "summary.json", "wilcoxon.csv", "wilcoxon_pairs.csv", "boxplot.csv")


@pytest.fixture
def verdict(capsys):
    def emit(name, ok, detail):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'}  {name}: {detail}")
        assert ok, f"{name}: {detail}"

    return emit


@pytest.fixture(scope="module")
def corpus():
    params = SynthParams(amplitude=0.12, seed=2024)
    t0 = time.perf_counter()
    crops = gen_crops(params, N_CROPS)
    return crops, time.perf_counter() - t0


@pytest.fixture(scope="module")
def oracle_run(corpus):
    crops, _ = corpus
    t0 = time.perf_counter()
    result = run_detect_then_segment(crops, DEFAULT_LADDER, "rgb", "oracle", EVAL_SIDE)
    return result, time.perf_counter() - t0


@pytest.fixture(scope="module")
def threshold_run(corpus):
    crops, _ = corpus
    return run_detect_then_segment(crops, DEFAULT_LADDER, "rgb", "threshold", EVAL_SIDE)


def _full_means(result):
    out = {}
    for r in DEFAULT_LADDER:
        vals = [rec.dsc for rec in result.records if rec.space == "full" and rec.resolution == r]
        out[r] = math.fsum(vals) / len(vals)
    return out


def test_oracle_equivalence(corpus, oracle_run, verdict):
    crops, gen_time = corpus
    result, run_time = oracle_run
    full = {(r.crop_id, r.resolution): r.dsc for r in result.records if r.space == "full"}
    worst, cases = 0.0, 0
    for crop in crops:
        _, gt = eval_space(crop, EVAL_SIDE)
        g = gt.bits
        for r in DEFAULT_LADDER:
            back = mask_roundtrip(gt, r).bits
            expected = 2.0 * np.count_nonzero(g & back) / (np.count_nonzero(g) + np.count_nonzero(back))
            worst = max(worst, abs(full[(crop.crop_id, r)] - expected))
            cases += 1
    ok = cases == 300 and not result.failures and worst <= 1e-12 and run_time < 60
    verdict(
        "oracle equivalence",
        ok,
        f"{cases} cases, max |diff| = {worst:.3g} (tol 1e-12), pipeline {run_time:.1f} s (limit 60 s), "
        f"corpus generation {gen_time:.1f} s",
    )


def test_oracle_resolution_trend(oracle_run, verdict):
    means = _full_means(oracle_run[0])
    seq = [means[r] for r in DEFAULT_LADDER]
    monotone = all(a >= b for a, b in zip(seq, seq[1:]))
    gap = means[128] - means[28]
    ok = means[512] == 1.0 and monotone and gap >= 0.01
    detail = ", ".join(f"{r}:{means[r]:.4f}" for r in DEFAULT_LADDER)
    verdict("oracle degradation trend", ok, f"{detail}; DSC(128)-DSC(28) = {gap:.4f} (need >= 0.01)")


def test_sample_full_coincidence(corpus, oracle_run, threshold_run, verdict):
    crops, _ = corpus
    pairs = []
    for result in (oracle_run[0], threshold_run):
        recs = {(r.crop_id, r.resolution, r.space): r.dsc for r in result.records}
        pairs += [(recs[(c.crop_id, EVAL_SIDE, "sample")], recs[(c.crop_id, EVAL_SIDE, "full")]) for c in crops]
    # native evaluation space: the ladder top equals each crop's own side
    for crop in crops[:5]:
        side = crop.image.width
        res = run_detect_then_segment([crop], (side, 64), "lab", "threshold", eval_side=None)
        recs = {(r.resolution, r.space): r.dsc for r in res.records}
        pairs.append((recs[(side, "sample")], recs[(side, "full")]))
    mismatches = sum(a != b for a, b in pairs)
    verdict("sample vs full coincidence", mismatches == 0, f"{len(pairs)} records at r = eval side, {mismatches} differ")


def test_dsc_oracle(verdict):
    rng = np.random.default_rng(16)
    mismatches = 0
    for _ in range(1000):
        density = rng.random()
        a = rng.random((16, 16)) < density
        b = rng.random((16, 16)) < rng.random()
        mismatches += dsc(BinaryMask(a), BinaryMask(b)) != dsc_bruteforce(a.tolist(), b.tolist())
    a = BinaryMask(rng.random((16, 16)) < 0.5)
    empty = BinaryMask(np.zeros((16, 16), dtype=bool))
    specials = dsc(a, a) == 1.0 and dsc(empty, empty) == 1.0 and dsc(a, empty) == 0.0
    verdict("DSC oracle", mismatches == 0 and specials, f"1000 pairs, {mismatches} mismatches; self/empty cases {'ok' if specials else 'wrong'}")


def test_wilcoxon(verdict):
    rng = np.random.default_rng(6)
    worst_exact = 0.0
    for n in range(1, 7):
        for m in range(1, 7):
            for _ in range(100):
                # coarse values force ties
                x = np.round(rng.random(n), 1).tolist()
                y = np.round(rng.random(m), 1).tolist()
                w, p = wilcoxon_rank_sum(x, y, method="exact")
                ew, ep = rank_sum_enumeration(x, y)
                worst_exact = max(worst_exact, abs(p - ep), abs(w - ew))
    _, p_hand = wilcoxon_rank_sum([1, 2, 3], [4, 5, 6])
    worst_approx = 0.0
    for _ in range(100):
        x, y = rng.random(10), rng.random(10)
        pe = wilcoxon_rank_sum(x, y, method="exact")[1]
        pn = wilcoxon_rank_sum(x, y, method="normal")[1]
        worst_approx = max(worst_approx, abs(pe - pn))
    ok = worst_exact <= 1e-12 and p_hand == 0.1 and worst_approx <= 0.01
    verdict(
        "Wilcoxon rank-sum",
        ok,
        f"exact vs enumeration max diff {worst_exact:.3g} over 3600 instances; "
        f"p({{1,2,3}},{{4,5,6}}) = {p_hand!r}; normal vs exact at n=m=10 max |dp| = {worst_approx:.4f}",
    )


def test_geometry(verdict):
    rng = np.random.default_rng(48)
    bounds = Box(0, 0, 8192, 8192)
    bad = 0
    for _ in range(10_000):
        x0, y0 = (int(v) for v in rng.integers(0, 8000, size=2))
        w, h = (int(v) for v in rng.integers(1, 1500, size=2))
        b = Box(x0, y0, min(x0 + w, 8192), min(y0 + h, 8192))
        e = expand_box_details(b, 1.5, bounds, rng)
        side = math.floor(1.5 * max(b.width, b.height) + 0.5)
        dx_max, dy_max = (side - b.width) / 2, (side - b.height) / 2
        bad += not (
            e.unclamped.width == e.unclamped.height == side
            and e.box.width == side
            and e.unclamped.contains(b)
            and e.box.contains(b)
            and bounds.contains(e.box)
            and abs(e.shift[0]) <= dx_max
            and abs(e.shift[1]) <= dy_max
        )
    iou_err = abs(iou(Box(0, 0, 10, 10), Box(5, 5, 15, 15)) - 1 / 7)
    scale_bad = 0
    for _ in range(1000):
        x0, y0 = (int(v) for v in rng.integers(0, 500, size=2))
        x1, y1 = x0 + int(rng.integers(1, 100)), y0 + int(rng.integers(1, 100))
        scale_bad += scale_box(Box(x0, y0, x1, y1), 4.0 / 0.25) != Box(16 * x0, 16 * y0, 16 * x1, 16 * y1)
    ok = bad == 0 and iou_err <= 1e-12 and scale_bad == 0
    verdict(
        "geometry",
        ok,
        f"10000 expansions, {bad} violations; |IoU - 1/7| = {iou_err:.3g}; scale_box x16 {scale_bad}/1000 mismatches",
    )


def test_color(verdict):
    rng = np.random.default_rng(255)
    colors = Raster(rng.random((100, 100, 3)))
    roundtrip = np.abs(lab_to_rgb(rgb_to_lab(colors)).samples - colors.samples).max()
    white = unscale_lab(rgb_to_lab(Raster(np.ones((1, 1, 3)))).samples)[0, 0]
    black = unscale_lab(rgb_to_lab(Raster(np.zeros((1, 1, 3)))).samples)[0, 0]
    red = srgb_to_lab_values(np.array([1.0, 0.0, 0.0]))
    red_ref = np.array(srgb_to_lab_scalar(1.0, 0.0, 0.0))
    target = np.array([53.24, 80.09, 67.20])
    white_err = np.abs(white - [100, 0, 0]).max()
    black_err = np.abs(black).max()
    ok = (
        roundtrip <= 1 / 255
        and white_err <= 1e-6
        and black_err <= 1e-6
        and np.abs(red - red_ref).max() <= 0.05
        and np.abs(red - target).max() <= 0.05
    )
    verdict(
        "color",
        ok,
        f"round-trip max err {roundtrip:.3g} (limit {1 / 255:.4f}); white err {white_err:.2g}, black err {black_err:.2g}; "
        f"red = ({red[0]:.3f}, {red[1]:.3f}, {red[2]:.3f}), reference ({red_ref[0]:.3f}, {red_ref[1]:.3f}, {red_ref[2]:.3f})",
    )


def test_end_to_end_determinism(tmp_path, verdict):
    runs = [
        run_chain(main, tmp_path / "a", backend="threshold", jobs=1),
        run_chain(main, tmp_path / "b", backend="threshold", jobs=1),
        run_chain(main, tmp_path / "c", backend="threshold", jobs=4),
    ]
    differing = []
    for other, label in ((runs[1], "repeat"), (runs[2], "jobs 4")):
        _, mismatch, errors = filecmp.cmpfiles(runs[0]["stats"], other["stats"], REPORT_FILES, shallow=False)
        differing += [f"{label}:{name}" for name in mismatch + errors]
    records_same = all(
        (runs[0]["eval"] / "records.csv").read_bytes() == (r["eval"] / "records.csv").read_bytes() for r in runs[1:]
    )
    ok = not differing and records_same
    verdict(
        "end-to-end determinism",
        ok,
        f"synth->stats three times (jobs 1, 1, 4): {len(REPORT_FILES)} report files "
        + ("byte-identical" if ok else f"differ: {differing or ['records.csv']}"),
    )


def test_threshold_backend_gap(threshold_run, verdict):
    means = _full_means(threshold_run)
    gap = means[512] - means[28]
    detail = ", ".join(f"{r}:{means[r]:.4f}" for r in DEFAULT_LADDER)
    verdict("threshold backend gap", gap >= 0.03, f"{detail}; DSC(512)-DSC(28) = {gap:.4f} (need >= 0.03)")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
