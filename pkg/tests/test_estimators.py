import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError
from sklearn.pipeline import make_pipeline

from dtseg.estimators import ColorSpaceTransformer, DetectThenSegment, LadderResampler, ThresholdSegmenter
from dtseg.evalstats import dsc
from dtseg.exceptions import InvalidArgumentError
from dtseg.pipeline import eval_space
from dtseg.raster import BinaryMask, mask_roundtrip

from helpers import disk_mask


def _disk_batch(n=3, side=64):
    masks = np.stack([disk_mask(side, 12 + 4 * i) for i in range(n)])
    images = np.where(masks[..., None], 0.25, 0.9).repeat(3, axis=-1)
    return images, masks


def test_params_and_clone():
    est = DetectThenSegment(ladder=(128, 28), color_space="lab", backend="oracle")
    params = est.get_params()
    assert params["ladder"] == (128, 28) and params["backend"] == "oracle"
    twin = clone(est).set_params(eval_side=256)
    assert twin.eval_side == 256 and est.eval_side == 512


def test_resampler_and_color_pipeline_roundtrip(rng):
    X = rng.random((2, 40, 40, 3))
    pipe = make_pipeline(LadderResampler(20), ColorSpaceTransformer("lab"))
    out = pipe.fit_transform(X)
    assert out.shape == (2, 20, 20, 3)
    back = pipe.named_steps["colorspacetransformer"].inverse_transform(out)
    ref = LadderResampler(20).fit_transform(X)
    np.testing.assert_allclose(back, ref, atol=1e-6)


def test_rgb_transformer_is_identity(rng):
    X = rng.random((1, 5, 5, 3))
    assert np.array_equal(ColorSpaceTransformer("rgb").fit_transform(X), X)


def test_threshold_segmenter_scores_clean_disks():
    X, y = _disk_batch()
    seg = ThresholdSegmenter().fit(X)
    assert np.array_equal(seg.predict(X), y)
    assert seg.score(X, y) == 1.0


def test_segmenter_in_a_pipeline_after_resampling():
    X, y = _disk_batch(side=128)
    pipe = make_pipeline(LadderResampler(128), ThresholdSegmenter())
    pipe.fit(X)
    assert pipe.score(X, y) == 1.0


def test_unfitted_and_invalid_inputs():
    with pytest.raises(NotFittedError):
        ThresholdSegmenter().predict(np.zeros((1, 4, 4, 3)))
    with pytest.raises(InvalidArgumentError):
        LadderResampler(8, mode="cubic").fit(np.zeros((1, 4, 4, 3)))
    with pytest.raises(InvalidArgumentError):
        ColorSpaceTransformer().fit(np.zeros((1, 4, 4)))
    with pytest.raises(InvalidArgumentError):
        ThresholdSegmenter().fit(np.zeros((1, 4, 4, 3))).score(np.zeros((1, 4, 4, 3)), np.zeros((1, 5, 5)))


def test_detect_then_segment_matches_roundtrip(small_crops):
    est = DetectThenSegment(ladder=(256, 28), backend="oracle").fit()
    preds = est.predict(small_crops[:2])
    for crop, by_res in zip(small_crops[:2], preds):
        _, gt = eval_space(crop, 512)
        for r, mask in by_res.items():
            assert isinstance(mask, BinaryMask) and mask.shape == (512, 512)
            assert dsc(mask, gt) == dsc(mask_roundtrip(gt, r), gt)
    score = est.score(small_crops[:2])
    assert 0.9 < score < 1.0


def test_detect_then_segment_evaluate_returns_records(small_crops):
    result = DetectThenSegment(ladder=(64,), backend="threshold", eval_side=None).fit().evaluate(small_crops[:1])
    assert {(r.resolution, r.space) for r in result.records} == {(64, "sample"), (64, "full")}
