import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dtseg.backends import (
    ExternalBackend,
    OracleBackend,
    ThresholdBackend,
    otsu_cut,
    parse_backend,
    segment,
    threshold_segment,
)
from dtseg.exceptions import BackendFailure, InvalidArgumentError
from dtseg.raster import BinaryMask, Raster, binarize

from helpers import disk_mask
from oracles import otsu_bruteforce


def _rgb(gray):
    return Raster(np.repeat(np.asarray(gray, dtype=np.float64)[:, :, None], 3, axis=2))


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 40))
def test_otsu_minimizes_within_class_variance(seed, occupied):
    rng = np.random.default_rng(seed)
    hist = np.zeros(256, dtype=np.int64)
    bins = rng.choice(256, size=occupied, replace=False)
    hist[bins] = rng.integers(1, 500, size=occupied)
    cut = otsu_cut(hist)
    within = otsu_bruteforce(hist.tolist())
    best = min(within.values())
    assert within[cut] == pytest.approx(best, rel=1e-9, abs=1e-9)
    # ties resolve to the smallest optimal cut
    assert cut == min(t for t, v in within.items() if v <= best * (1 + 1e-9) + 1e-9)


def test_otsu_degenerate_histograms():
    assert otsu_cut(np.zeros(256)) is None
    h = np.zeros(256)
    h[40] = 10
    assert otsu_cut(h) is None
    h[200] = 5
    assert otsu_cut(h) == 41


def test_threshold_recovers_a_clean_disk_exactly():
    bits = disk_mask(128, 40, cx=70, cy=60)
    out = threshold_segment(_rgb(np.where(bits, 0.3, 0.9)))
    assert np.array_equal(binarize(out, 0.5).bits, bits)
    assert set(np.unique(out.samples)) <= {0.0, 1.0}


def test_threshold_on_constant_image_is_empty():
    out = threshold_segment(_rgb(np.full((32, 32), 0.6)))
    assert out.samples.max() == 0.0


def test_threshold_keeps_largest_component_and_fills_holes():
    img = np.full((100, 100), 0.9)
    img[10:60, 10:60] = 0.2
    img[30:35, 30:35] = 0.9  # hole
    img[80:90, 80:90] = 0.2  # small blob
    mask = binarize(threshold_segment(_rgb(img)), 0.5).bits
    expected = np.zeros((100, 100), dtype=bool)
    expected[10:60, 10:60] = True
    assert np.array_equal(mask, expected)


def test_threshold_diagonal_neighbours_are_separate_components():
    img = np.full((10, 10), 0.9)
    img[2:4, 2:4] = 0.1
    img[4:7, 4:7] = 0.1  # touches only at a corner
    mask = binarize(threshold_segment(_rgb(img)), 0.5).bits
    assert mask.sum() == 9


def test_oracle_backend_returns_area_downsampled_truth():
    gt = BinaryMask(disk_mask(64, 20))
    out = segment("oracle", Raster(np.zeros((16, 16, 3))), context=gt)
    ref = gt.bits.reshape(16, 4, 16, 4).mean(axis=(1, 3))
    np.testing.assert_allclose(out.samples[:, :, 0], ref, atol=1e-12)


def test_oracle_needs_context():
    with pytest.raises(InvalidArgumentError):
        OracleBackend().segment(Raster(np.zeros((4, 4, 3))))


def test_segment_validates_input():
    with pytest.raises(InvalidArgumentError):
        segment("threshold", Raster(np.zeros((4, 5, 3))))
    with pytest.raises(InvalidArgumentError):
        segment("threshold", Raster(np.zeros((4, 4))))


def test_parse_backend():
    assert isinstance(parse_backend("oracle"), OracleBackend)
    assert isinstance(parse_backend("threshold"), ThresholdBackend)
    ext = parse_backend("external:my-model --fast")
    assert isinstance(ext, ExternalBackend) and ext.command == "my-model --fast"
    assert str(ext) == "external:my-model --fast"
    with pytest.raises(InvalidArgumentError):
        parse_backend("unet")
    with pytest.raises(InvalidArgumentError):
        parse_backend("external:")


FULL_MASK = """
import sys
from PIL import Image
src = Image.open(sys.argv[1])
Image.new("L", src.size, 255).save(sys.argv[2])
"""

WRONG_SIZE = """
import sys
from PIL import Image
Image.new("L", (3, 3), 255).save(sys.argv[2])
"""

CRASH = """
import sys
print("model exploded", file=sys.stderr)
sys.exit(3)
"""


def _script(tmp_path, name, body):
    path = tmp_path / name
    path.write_text(body)
    return f"{sys.executable} {path}"


def test_external_backend_roundtrip(tmp_path):
    backend = ExternalBackend(_script(tmp_path, "full.py", FULL_MASK), workdir=tmp_path / "work")
    out = segment(backend, Raster(np.zeros((24, 24, 3)), mpp=1.0), name="crop7")
    assert out.shape == (24, 24, 1)
    assert out.samples.min() == 1.0
    assert out.mpp == 1.0


def test_external_backend_nonzero_exit_carries_diagnostics(tmp_path):
    backend = ExternalBackend(_script(tmp_path, "crash.py", CRASH))
    with pytest.raises(BackendFailure) as info:
        backend.segment(Raster(np.zeros((8, 8, 3))))
    assert "status 3" in str(info.value)
    assert "model exploded" in info.value.diagnostics


def test_external_backend_wrong_size(tmp_path):
    backend = ExternalBackend(_script(tmp_path, "small.py", WRONG_SIZE))
    with pytest.raises(BackendFailure):
        backend.segment(Raster(np.zeros((8, 8, 3))))


def test_external_backend_missing_program():
    with pytest.raises(BackendFailure):
        ExternalBackend("/nonexistent/model-binary").segment(Raster(np.zeros((8, 8, 3))))
