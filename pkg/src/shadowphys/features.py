"""Fixed multi-scale feature bank for images.

A deterministic, training-free stand-in for learned perceptual features:
8 channels built from Gaussian-derivative gradient magnitudes and
center-surround local contrast of the intensity plane, at four spatial
scales each. Real network features can replace these via SPTN files;
this bank keeps the feature loss exercisable with no model on disk.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from .imagecore import FeatureMap, as_image_array

__all__ = ["STANDIN_CHANNELS", "STANDIN_SCALES", "standin_features"]

# Gaussian scales (pixels) of the gradient and contrast banks.
STANDIN_SCALES = (1.0, 2.0, 4.0, 8.0)
STANDIN_CHANNELS = 2 * len(STANDIN_SCALES)


def standin_features(img) -> FeatureMap:
    """8-channel gradient-magnitude and local-contrast stack of an image.

    Channels 0..3 are Gaussian-derivative gradient magnitudes at scales
    1, 2, 4, 8; channels 4..7 are local contrast (absolute deviation from
    the Gaussian-blurred intensity) at the same scales. Borders use
    replicate padding, so the output is the exact input size.
    """
    rgb = as_image_array(img)
    intensity = rgb.mean(axis=2)
    channels = []
    for sigma in STANDIN_SCALES:
        gy = ndimage.gaussian_filter(intensity, sigma, order=(1, 0), mode="nearest")
        gx = ndimage.gaussian_filter(intensity, sigma, order=(0, 1), mode="nearest")
        channels.append(np.hypot(gx, gy))
    for sigma in STANDIN_SCALES:
        blurred = ndimage.gaussian_filter(intensity, sigma, mode="nearest")
        channels.append(np.abs(intensity - blurred))
    return FeatureMap(np.stack(channels, axis=0))
