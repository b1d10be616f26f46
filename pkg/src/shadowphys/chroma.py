"""Illumination-invariant chromaticity by entropy minimization.

A Planckian illumination change moves every surface's 2-D log-chromaticity
along one shared direction.  Projecting the log-chromaticity cloud onto the
candidate axis (cos t, sin t) and scanning t over a 1-degree grid, the
projection entropy is minimal where shadow and lit pixels of each surface
collapse together.  Keeping only that component (plus a global offset
recovered from the brightest pixels) yields a shadow-free chromaticity.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .imagecore import as_image_array

# channel floor applied before logs; 8-bit quantum keeps logs bounded
EPS_CHANNEL = 1.0 / 255.0

# orthonormal basis of the plane orthogonal to (1,1,1) in log-RGB space
PLANE_BASIS = np.array(
    [
        [1.0, -1.0, 0.0],
        [1.0, 1.0, -2.0],
    ]
)
PLANE_BASIS[0] /= np.sqrt(2.0)
PLANE_BASIS[1] /= np.sqrt(6.0)
PLANE_BASIS.flags.writeable = False

ANGLE_GRID_DEGREES = np.arange(180)
ANGLE_GRID_DEGREES.flags.writeable = False

# profile max-min below this many bits carries no angular information
FLAT_PROFILE_BITS = 0.05

# histogram-size guard for degenerate sample spreads
_MAX_BINS = 1 << 20


@dataclass(frozen=True)
class LogChroma:
    """Per-pixel 2-D log-chromaticity coordinates, (H, W, 2), finite."""

    data: np.ndarray

    def __post_init__(self):
        a = np.array(self.data, dtype=np.float64, copy=True)
        if a.ndim != 3 or a.shape[2] != 2:
            raise ValueError(f"log-chroma must be (H, W, 2), got {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError("log-chroma contains non-finite values")
        a.flags.writeable = False
        object.__setattr__(self, "data", a)

    @property
    def shape(self):
        return self.data.shape


@dataclass(frozen=True)
class ChromaticityImage:
    """Intensity-free color image: (H, W, 3), nonnegative, rows sum to 1."""

    data: np.ndarray

    def __post_init__(self):
        a = np.array(self.data, dtype=np.float64, copy=True)
        if a.ndim != 3 or a.shape[2] != 3:
            raise ValueError(f"chromaticity must be (H, W, 3), got {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError("chromaticity contains non-finite values")
        if a.min() < -1e-12 or a.max() > 1.0 + 1e-12:
            raise ValueError("chromaticity values must lie in [0, 1]")
        if np.max(np.abs(a.sum(axis=2) - 1.0)) > 1e-9:
            raise ValueError("chromaticity channels must sum to 1 per pixel")
        a.flags.writeable = False
        object.__setattr__(self, "data", a)

    @property
    def shape(self):
        return self.data.shape


@dataclass(frozen=True)
class InvariantAngle:
    """Grid angle (degrees in [0, 180)) minimizing projection entropy."""

    degrees: float
    entropy_bits: float

    def __post_init__(self):
        if not (0.0 <= self.degrees < 180.0):
            raise ValueError(f"angle {self.degrees} outside [0, 180)")


@dataclass(frozen=True)
class EntropyProfile:
    """Projection entropy (bits) for every integer angle 0..179."""

    bits: np.ndarray
    flat: bool

    def __post_init__(self):
        a = np.array(self.bits, dtype=np.float64, copy=True)
        if a.shape != (180,):
            raise ValueError(f"profile must have 180 entries, got {a.shape}")
        a.flags.writeable = False
        object.__setattr__(self, "bits", a)

    @property
    def angles(self):
        return ANGLE_GRID_DEGREES


@dataclass(frozen=True)
class ShadowFreeChroma:
    """Result of the invariant projection: compensated and raw chromaticity."""

    compensated: ChromaticityImage
    projected: ChromaticityImage
    angle: InvariantAngle
    profile: EntropyProfile
    offset: float


def log_chromaticity(img) -> LogChroma:
    """Geometric-mean log-chromaticity of an RGB image.

    Channels are floored at 1/255 before logs, divided by the per-pixel
    geometric mean, and the 3-D log vector (which sums to zero) is expressed
    in the 2-D plane basis.
    """
    rgb = np.maximum(as_image_array(img), EPS_CHANNEL)
    logs = np.log(rgb)
    centered = logs - logs.mean(axis=2, keepdims=True)
    return LogChroma(centered @ PLANE_BASIS.T)


def backmap_chromaticity(chi: np.ndarray) -> ChromaticityImage:
    """Map plane coordinates back to a sum-to-one RGB chromaticity."""
    a = np.asarray(chi, dtype=np.float64)
    rho = np.exp(a @ PLANE_BASIS)
    return ChromaticityImage(rho / rho.sum(axis=2, keepdims=True))


def _trim_bounds(sorted_values: np.ndarray) -> tuple[float, float]:
    """[5th, 95th] percentile bounds (linear interpolation) of sorted data."""
    n = sorted_values.shape[0]
    lo_pos = 0.05 * (n - 1)
    hi_pos = 0.95 * (n - 1)
    lo_i = int(np.floor(lo_pos))
    hi_i = int(np.floor(hi_pos))
    lo = sorted_values[lo_i] + (lo_pos - lo_i) * (
        sorted_values[min(lo_i + 1, n - 1)] - sorted_values[lo_i]
    )
    hi = sorted_values[hi_i] + (hi_pos - hi_i) * (
        sorted_values[min(hi_i + 1, n - 1)] - sorted_values[hi_i]
    )
    return float(lo), float(hi)


def _entropy_of_sorted(sorted_values: np.ndarray) -> float:
    """Shannon entropy (bits) of the trimmed, Scott-binned sample histogram."""
    lo, hi = _trim_bounds(sorted_values)
    i0 = int(np.searchsorted(sorted_values, lo, side="left"))
    i1 = int(np.searchsorted(sorted_values, hi, side="right"))
    retained = sorted_values[i0:i1]
    if retained.shape[0] < 2 or retained[0] == retained[-1]:
        return 0.0
    span = float(retained[-1] - retained[0])
    scale = max(abs(float(retained[0])), abs(float(retained[-1])), np.finfo(np.float64).tiny)
    if span <= scale * 1e-12:
        # span of a few ulps: one effective value, zero entropy
        return 0.0
    sigma = float(retained.std())
    if sigma == 0.0:
        return 0.0
    width = 3.5 * sigma * retained.shape[0] ** (-1.0 / 3.0)
    nbins = min(max(int(np.ceil(span / width)), 1), _MAX_BINS)
    counts, _ = np.histogram(retained, bins=nbins, range=(retained[0], retained[-1]))
    p = counts[counts > 0] / retained.shape[0]
    return float(-(p * np.log2(p)).sum())


def projection_entropy(chroma: LogChroma, theta_degrees: float) -> float:
    """Entropy (bits) of the chroma cloud projected onto angle theta."""
    chi = chroma.data.reshape(-1, 2)
    if chi.shape[0] < 2:
        raise ValueError("projection entropy needs at least 2 pixels")
    t = np.deg2rad(theta_degrees)
    proj = chi[:, 0] * np.cos(t) + chi[:, 1] * np.sin(t)
    return _entropy_of_sorted(np.sort(proj))


def find_invariant_angle(chroma: LogChroma) -> tuple[InvariantAngle, EntropyProfile]:
    """Scan integer angles 0..179 and return the entropy minimizer.

    Ties break to the smallest angle.  A profile whose total variation is
    under 0.05 bits carries no direction information; it is flagged and a
    warning is emitted.
    """
    if chroma.data.reshape(-1, 2).shape[0] < 2:
        raise ValueError("invariant angle search needs at least 2 pixels")
    # one shared code path with projection_entropy keeps the profile entries
    # bit-identical to single-angle queries
    bits = np.array(
        [projection_entropy(chroma, float(a)) for a in ANGLE_GRID_DEGREES]
    )
    flat = bool(bits.max() - bits.min() < FLAT_PROFILE_BITS)
    if flat:
        warnings.warn(
            "entropy profile is flat (< 0.05 bits of variation); "
            "the recovered angle is not meaningful",
            RuntimeWarning,
            stacklevel=2,
        )
    best = int(np.argmin(bits))  # argmin takes the smallest index on ties
    return InvariantAngle(float(best), float(bits[best])), EntropyProfile(bits, flat)


# share of the image (by r+g+b brightness) used to recover the offset
BRIGHT_SHARE = 0.3


def shadow_free_chromaticity(img) -> ShadowFreeChroma:
    """Shadow-free chromaticity via invariant projection plus compensation.

    The component along the invariant axis survives; the discarded
    orthogonal component is reinstated as a constant, the mean over the
    brightest 30% of pixels, so unshadowed regions keep their color cast.
    """
    rgb = as_image_array(img)
    chroma = log_chromaticity(rgb)
    angle, profile = find_invariant_angle(chroma)
    t = np.deg2rad(angle.degrees)
    axis = np.array([np.cos(t), np.sin(t)])
    ortho = np.array([-np.sin(t), np.cos(t)])

    along = chroma.data @ axis
    chi_ent = along[..., None] * axis
    projected = backmap_chromaticity(chi_ent)

    brightness = rgb.sum(axis=2).ravel()
    n = brightness.shape[0]
    k = max(1, int(np.ceil(BRIGHT_SHARE * n)))
    bright = np.argsort(-brightness, kind="stable")[:k]
    beta = (chroma.data @ ortho).ravel()
    offset = float(beta[bright].mean())

    compensated = backmap_chromaticity(chi_ent + offset * ortho)
    return ShadowFreeChroma(compensated, projected, angle, profile, offset)


def chromaticity_map(img) -> ChromaticityImage:
    """Per-pixel channel shares Z_c / (Z_r + Z_g + Z_b).

    A pixel whose channels sum to zero has no defined color; it maps to the
    neutral share (1/3, 1/3, 1/3), which keeps the map total-sum continuous.
    """
    rgb = as_image_array(img)
    s = rgb.sum(axis=2, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        sigma = np.where(s > 0.0, rgb / np.where(s > 0.0, s, 1.0), 1.0 / 3.0)
    return ChromaticityImage(sigma)


def chroma_loss(z, target) -> tuple[float, np.ndarray]:
    """Mean L1 gap between the chromaticity of z and a target chromaticity.

    Returns the scalar value and its analytic gradient with respect to z.
    The gradient uses the quotient rule through the channel shares, with
    sign(0) = 0 at kinks; zero-sum pixels contribute zero gradient.
    """
    rgb = as_image_array(z)
    tgt = target.data if isinstance(target, ChromaticityImage) else np.asarray(target)
    if tgt.shape != rgb.shape:
        raise ValueError(f"target shape {tgt.shape} != image shape {rgb.shape}")
    sigma = chromaticity_map(rgb).data
    diff = sigma - tgt
    n = diff.size
    value = float(np.abs(diff).mean())

    sgn = np.sign(diff)
    s = rgb.sum(axis=2, keepdims=True)
    safe = np.where(s > 0.0, s, 1.0)
    dot = (sgn * rgb).sum(axis=2, keepdims=True)
    grad = np.where(s > 0.0, (sgn * safe - dot) / safe**2, 0.0) / n
    return value, grad


__all__ = [
    "ANGLE_GRID_DEGREES",
    "EPS_CHANNEL",
    "PLANE_BASIS",
    "ChromaticityImage",
    "EntropyProfile",
    "InvariantAngle",
    "LogChroma",
    "ShadowFreeChroma",
    "backmap_chromaticity",
    "chroma_loss",
    "chromaticity_map",
    "find_invariant_angle",
    "log_chromaticity",
    "projection_entropy",
    "shadow_free_chromaticity",
]
