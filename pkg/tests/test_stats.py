import numpy as np
import pytest

from lesionseg.augment import Sample, flip_h, flip_v, rot90
from lesionseg.rasters import Mask, RgbImage
from lesionseg.stats import (
    ChannelStats,
    dataset_stats,
    mask_proportion,
    normalize_image,
    resample_mask_nearest,
    spatial_prior,
)


def _mask(arr):
    return Mask(np.asarray(arr, dtype=np.uint8))


def test_mask_proportion_counts():
    m = np.zeros((4, 4), dtype=np.uint8)
    m[0, :4] = 1
    assert mask_proportion(_mask(m)) == 0.25
    assert mask_proportion(_mask(np.zeros((3, 5)))) == 0.0
    assert mask_proportion(_mask(np.ones((3, 5)))) == 1.0


def test_mask_proportion_invariant_under_flips_and_rotations():
    rng = np.random.default_rng(2)
    for _ in range(20):
        mask = _mask(rng.integers(0, 2, (6, 4)))
        s = Sample(np.zeros((3, 6, 4), np.float32), mask)
        p = mask_proportion(mask)
        assert mask_proportion(flip_h(s).mask) == p
        assert mask_proportion(flip_v(s).mask) == p
        for k in range(4):
            assert mask_proportion(rot90(s, k).mask) == p


def test_dataset_stats_constant_gray():
    img = RgbImage(np.full((3, 4, 4), 0.5, dtype=np.float32))
    st = dataset_stats([img])
    assert st.mean == (0.5, 0.5, 0.5)
    assert st.std == (0.0, 0.0, 0.0)


def test_dataset_stats_two_pixel_population_std():
    a = RgbImage(np.array([0.0, 0.5, 0.5], np.float32).reshape(3, 1, 1))
    b = RgbImage(np.array([1.0, 0.5, 0.5], np.float32).reshape(3, 1, 1))
    st = dataset_stats([a, b])
    assert st.mean[0] == pytest.approx(0.5, abs=1e-12)
    # population std of {0, 1} is 0.5 (divisor N, not N-1)
    assert st.std[0] == pytest.approx(0.5, abs=1e-12)


def test_dataset_stats_pixel_weighted_not_image_weighted():
    big = RgbImage(np.zeros((3, 2, 2), dtype=np.float32))
    small = RgbImage(np.ones((3, 1, 1), dtype=np.float32))
    st = dataset_stats([big, small])
    assert st.mean[0] == pytest.approx(1.0 / 5.0, abs=1e-12)


def test_dataset_stats_duplication_identity():
    rng = np.random.default_rng(4)
    images = [RgbImage(rng.uniform(0, 1, (3, 5, 7)).astype(np.float32)) for _ in range(3)]
    assert dataset_stats(images) == dataset_stats(images + images)


def test_dataset_stats_empty_errors():
    with pytest.raises(ValueError):
        dataset_stats([])


def test_nearest_resample_indices():
    # src 4 -> dst 2: floor((i + 0.5) * 4 / 2) picks source columns 1 and 3
    out = resample_mask_nearest(_mask([[1, 0, 1, 0]]), 2, 1)
    assert out.data.tolist() == [[0, 0]]


def test_spatial_prior_identity_resample():
    rng = np.random.default_rng(5)
    mask = _mask(rng.integers(0, 2, (6, 5)))
    prior = spatial_prior([mask], 5, 6)
    assert np.array_equal(prior.data, mask.data.astype(np.float32))


def test_spatial_prior_disjoint_masks_average():
    a = _mask([[1, 0]])
    b = _mask([[0, 1]])
    prior = spatial_prior([a, b], 2, 1)
    assert prior.data.tolist() == [[0.5, 0.5]]


def test_spatial_prior_mean_equals_mean_proportion_when_same_size():
    rng = np.random.default_rng(6)
    masks = [_mask(rng.integers(0, 2, (8, 8))) for _ in range(7)]
    prior = spatial_prior(masks, 8, 8)
    assert float(prior.data.mean()) == pytest.approx(
        float(np.mean([mask_proportion(m) for m in masks])), abs=1e-6
    )


def test_spatial_prior_errors():
    with pytest.raises(ValueError):
        spatial_prior([], 4, 4)
    with pytest.raises(ValueError):
        spatial_prior([_mask([[1]])], 0, 4)


def test_normalize_image_zero_at_mean_one_at_std():
    stats = ChannelStats((0.7, 0.6, 0.5), (0.1, 0.2, 0.25))
    data = np.stack(
        [
            np.full((2, 2), 0.7, np.float32),
            np.full((2, 2), 0.8, np.float32),
            np.full((2, 2), 0.5, np.float32),
        ]
    )
    out = normalize_image(RgbImage(data), stats)
    assert np.allclose(out[0], 0.0, atol=1e-6)
    assert np.allclose(out[1], 1.0, atol=1e-6)  # mean + std -> 1
    assert np.allclose(out[2], 0.0, atol=1e-6)


def test_normalize_round_trip():
    rng = np.random.default_rng(7)
    img = RgbImage(rng.uniform(0, 1, (3, 6, 6)).astype(np.float32))
    stats = ChannelStats((0.4, 0.5, 0.6), (0.11, 0.21, 0.31))
    out = normalize_image(img, stats)
    back = out * np.array(stats.std, np.float32).reshape(3, 1, 1) + np.array(
        stats.mean, np.float32
    ).reshape(3, 1, 1)
    assert np.abs(back - img.data).max() < 1e-6


def test_normalize_center_only_ignores_std():
    img = RgbImage(np.full((3, 2, 2), 0.75, np.float32))
    stats = ChannelStats((0.5, 0.5, 0.5), (0.1, 0.1, 0.1))
    out = normalize_image(img, stats, center_only=True)
    assert np.allclose(out, 0.25, atol=1e-6)


def test_normalize_zero_std_errors():
    img = RgbImage(np.zeros((3, 1, 1), np.float32))
    with pytest.raises(ValueError):
        normalize_image(img, ChannelStats((0.5, 0.5, 0.5), (0.0, 0.1, 0.1)))
