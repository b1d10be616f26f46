"""Soft shadow masks, noise-robust boundaries, and boundary smoothness.

The difference between a shadow image and its shadow-free counterpart is
largest where the shadow sits.  Normalizing that difference per channel and
averaging the channels gives a soft mask in [0, 1].  A boundary detector
turns the mask into an edge weight: windowed, spatial-affinity-weighted
partial derivatives, robust to single-pixel noise because each output pixel
pools a 3x3 neighborhood.  The smoothness loss uses the boundary map as a
fixed weight on the gradient magnitude of a candidate shadow-free image,
penalizing residual shadow edges.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import correlate

from .imagecore import SoftMask, as_image_array, normalize_minmax

# spatial-affinity scale in normalized image coordinates
DEFAULT_TAU = 0.01


@dataclass(frozen=True)
class BoundaryMap:
    """Nonnegative per-pixel boundary strength, B = |B_x| + |B_y|."""

    data: np.ndarray

    def __post_init__(self):
        a = np.array(self.data, dtype=np.float64, copy=True)
        if a.ndim != 2:
            raise ValueError(f"boundary map must be (H, W), got {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError("boundary map contains non-finite values")
        if a.min() < 0.0:
            raise ValueError("boundary map must be nonnegative")
        a.flags.writeable = False
        object.__setattr__(self, "data", a)

    @property
    def height(self):
        return self.data.shape[0]

    @property
    def width(self):
        return self.data.shape[1]

    @property
    def shape(self):
        return self.data.shape


@dataclass(frozen=True)
class AffinityKernel:
    """3x3 spatial-affinity weights g = exp(-|p-q|^2 / (2 tau^2)).

    Offsets are measured in normalized coordinates (dx / W, dy / H): with
    raw pixel offsets and tau = 0.01 every neighbor weight would underflow
    to exp(-5000), leaving the window meaningless.
    """

    tau: float
    window: np.ndarray  # (3, 3, 2) row/col offsets
    weights: np.ndarray  # (3, 3)

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64, copy=True)
        if w.shape != (3, 3):
            raise ValueError("affinity kernel must be 3x3")
        off = np.array(self.window, dtype=np.int64, copy=True)
        w.flags.writeable = False
        off.flags.writeable = False
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "window", off)


def affinity_kernel(tau: float, height: int, width: int) -> AffinityKernel:
    """Affinity weights for a 3x3 window on an image of the given size."""
    if tau <= 0.0:
        raise ValueError("tau must be positive")
    if height < 1 or width < 1:
        raise ValueError("image size must be positive")
    offsets = np.stack(
        np.meshgrid(np.arange(-1, 2), np.arange(-1, 2), indexing="ij"), axis=-1
    )
    dy = offsets[..., 0] / float(height)
    dx = offsets[..., 1] / float(width)
    weights = np.exp(-(dx**2 + dy**2) / (2.0 * tau**2))
    return AffinityKernel(float(tau), offsets, weights)


def shadow_mask(i_s, z_sf) -> SoftMask:
    """Soft shadow mask from an image pair: mean over channels of |N(diff)|.

    N is the global per-channel min-max normalization of the difference
    image, so a channel's full contrast maps to [0, 1] and a constant
    channel contributes zero.
    """
    a = as_image_array(i_s)
    b = as_image_array(z_sf)
    if a.shape != b.shape:
        raise ValueError(f"image shapes differ: {a.shape} vs {b.shape}")
    diff = a - b
    channels = [np.abs(normalize_minmax(diff[..., c])) for c in range(diff.shape[2])]
    return SoftMask(np.mean(channels, axis=0))


def _central_diffs(field: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Central differences with replicate padding at the borders."""
    padded = np.pad(field, 1, mode="edge")
    dx = (padded[1:-1, 2:] - padded[1:-1, :-2]) / 2.0
    dy = (padded[2:, 1:-1] - padded[:-2, 1:-1]) / 2.0
    return dx, dy


def boundary(mask: SoftMask, tau: float = DEFAULT_TAU) -> BoundaryMap:
    """Noise-robust boundary of a soft mask: B = B_x + B_y.

    B_x(p) = |sum over the 3x3 window of g(p, q) * d/dx mask(q)| and B_y
    likewise; derivatives are central differences and the window sum uses
    replicate padding, one consistent border rule throughout.
    """
    m = mask.data if isinstance(mask, SoftMask) else SoftMask(mask).data
    if tau <= 0.0:
        raise ValueError("tau must be positive")
    h, w = m.shape
    g = affinity_kernel(tau, h, w).weights
    dx, dy = _central_diffs(m)
    bx = np.abs(correlate(dx, g, mode="nearest"))
    by = np.abs(correlate(dy, g, mode="nearest"))
    return BoundaryMap(bx + by)


def loss_smooth(z_sf, bound: BoundaryMap) -> tuple[float, np.ndarray]:
    """Boundary-weighted smoothness penalty with its analytic gradient.

    value = mean over pixels and channels of B * (|dZ/dx| + |dZ/dy|), with
    forward differences that are zero along the last column/row.  The
    boundary map is treated as a constant weight (no gradient flows through
    it), and sign(0) = 0 at the kinks of |.|.
    """
    z = as_image_array(z_sf)
    b = bound.data if isinstance(bound, BoundaryMap) else np.asarray(bound)
    if b.shape != z.shape[:2]:
        raise ValueError(f"boundary shape {b.shape} != image plane {z.shape[:2]}")
    gx = np.zeros_like(z)
    gy = np.zeros_like(z)
    gx[:, :-1] = z[:, 1:] - z[:, :-1]
    gy[:-1, :] = z[1:, :] - z[:-1, :]

    weighted = b[..., None] * (np.abs(gx) + np.abs(gy))
    n = weighted.size
    value = float(weighted.mean())

    sx = b[..., None] * np.sign(gx)
    sy = b[..., None] * np.sign(gy)
    grad = np.zeros_like(z)
    grad[:, :-1] -= sx[:, :-1]
    grad[:, 1:] += sx[:, :-1]
    grad[:-1, :] -= sy[:-1, :]
    grad[1:, :] += sy[:-1, :]
    grad /= n
    return value, grad


__all__ = [
    "DEFAULT_TAU",
    "AffinityKernel",
    "BoundaryMap",
    "affinity_kernel",
    "boundary",
    "loss_smooth",
    "shadow_mask",
]
