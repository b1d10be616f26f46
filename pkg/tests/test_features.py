"""Tests for the fixed multi-scale feature bank."""

import numpy as np
import pytest

from shadowphys.features import STANDIN_CHANNELS, STANDIN_SCALES, standin_features
from shadowphys.imagecore import Image
from shadowphys.losses import loss_feature


def _img(rng, h=40, w=32):
    return Image(rng.uniform(0.0, 1.0, (h, w, 3)))


def test_shape_and_channel_count():
    rng = np.random.default_rng(0)
    feats = standin_features(_img(rng, 25, 37))
    assert feats.data.shape == (STANDIN_CHANNELS, 25, 37)
    assert STANDIN_CHANNELS == 2 * len(STANDIN_SCALES)


def test_deterministic():
    rng = np.random.default_rng(1)
    img = _img(rng)
    a = standin_features(img).data
    b = standin_features(img).data
    assert np.array_equal(np.asarray(a), np.asarray(b))


def test_constant_image_gives_zero_features():
    # blur of a constant leaves ~1 ulp of kernel-normalization residue
    img = Image(np.full((16, 16, 3), 0.4))
    feats = np.asarray(standin_features(img).data)
    assert np.abs(feats).max() < 1e-12


def test_gradient_channels_fire_on_edges():
    arr = np.zeros((32, 32, 3))
    arr[:, 16:] = 0.9
    feats = np.asarray(standin_features(Image(arr)).data)
    finest = feats[0]
    # strong response at the step, none far from it
    assert finest[:, 15:17].max() > 0.1
    assert finest[:, :6].max() < 1e-6


def test_contrast_channels_fire_on_texture_not_flat():
    rng = np.random.default_rng(2)
    arr = np.full((32, 32, 3), 0.5)
    arr[8:24, 8:24] += rng.uniform(-0.2, 0.2, (16, 16, 3))
    feats = np.asarray(standin_features(Image(np.clip(arr, 0, 1))).data)
    coarse_contrast = feats[4]
    assert coarse_contrast[10:22, 10:22].mean() > 1e-3
    assert coarse_contrast[:4, :4].max() < 1e-12


def test_feature_loss_zero_on_self():
    rng = np.random.default_rng(3)
    img = _img(rng)
    value, _ = loss_feature(standin_features(img), standin_features(img))
    assert value == 0.0


def test_features_finite_and_nonnegative():
    rng = np.random.default_rng(4)
    feats = np.asarray(standin_features(_img(rng)).data)
    assert np.all(np.isfinite(feats))
    assert np.all(feats >= 0.0)


def test_brightness_shift_barely_moves_features():
    # an additive intensity shift leaves gradients and contrast unchanged
    rng = np.random.default_rng(5)
    base = rng.uniform(0.2, 0.6, (24, 24, 3))
    shifted = np.clip(base + 0.25, 0.0, 1.0)
    a = np.asarray(standin_features(Image(base)).data)
    b = np.asarray(standin_features(Image(shifted)).data)
    assert np.abs(a - b).max() < 1e-9
