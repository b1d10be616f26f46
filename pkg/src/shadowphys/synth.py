"""Synthetic shadow scenes with exact physical ground truth.

Real photographs never come with the quantities this toolkit estimates: the
illumination-invariant direction, the soft shadow mask, the shadow-free
counterpart image.  This module manufactures scenes where all three are known
by construction.  A Mondrian patchwork of matte reflectances is lit by a
Planckian radiator; a second, cooler radiator fills a polygonal shadow whose
penumbra blends the two illuminants.  Under narrowband (delta) camera
sensitivities the log-chromaticity of every surface then moves along one
shared direction between lit and shadow, exactly, which is the property the
estimators in :mod:`shadowphys.chroma` exploit.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import cv2
import numpy as np
from scipy import constants
from scipy.ndimage import gaussian_filter

from .chroma import PLANE_BASIS, InvariantAngle
from .imagecore import Image, SoftMask

# delta-function camera sensitivities (meters): red, green, blue
SENSOR_WAVELENGTHS_M = np.array([610e-9, 540e-9, 465e-9])
SENSOR_WAVELENGTHS_M.flags.writeable = False

TEMPERATURE_RANGE_K = (2500.0, 10000.0)

# reflectance contract: every channel of every surface inside these bounds
REFLECTANCE_BOUNDS = (0.2, 0.9)

# palette sampling: per-surface base albedo and log-normal channel jitter
_ALBEDO_BASE_RANGE = (0.3, 0.8)
_CHROMA_JITTER = 0.05
_MIN_CHANNEL_SPREAD = 1e-3

# shadow polygon: jagged star with rejection on blurred-mask coverage
_POLY_VERTICES = 36
_POLY_RADIUS_RANGE = (0.30, 0.45)
_POLY_RADIAL_JITTER = 0.75
_POLY_CENTER_RANGE = (0.3, 0.7)
_COVERAGE_RANGE = (0.12, 0.5)
_PLACEMENT_TRIES = 64


@dataclass(frozen=True)
class SceneParams:
    """Knobs of the scene generator; every field has a physical meaning.

    ``noise_sigma`` adds the same Gaussian field to both output images
    (per-channel std, in image units), so noise never masquerades as a
    shadow difference.  Default 0 keeps the illumination model exact.
    """

    width: int = 224
    height: int = 224
    n_surfaces: int = 12
    lit_temperature: float = 6500.0
    shadow_temperature: float = 3500.0
    shadow_strength: float = 0.5
    penumbra_sigma: float = 5.0
    noise_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.width < 8 or self.height < 8:
            raise ValueError("scene must be at least 8x8 pixels")
        if self.n_surfaces < 1:
            raise ValueError("need at least one surface")
        lo, hi = TEMPERATURE_RANGE_K
        for name in ("lit_temperature", "shadow_temperature"):
            t = getattr(self, name)
            if not (lo <= t <= hi):
                raise ValueError(f"{name}={t} outside [{lo}, {hi}] K")
        if not (0.0 <= self.shadow_strength <= 1.0):
            raise ValueError("shadow_strength must lie in [0, 1]")
        if self.penumbra_sigma < 0.0:
            raise ValueError("penumbra_sigma must be nonnegative")
        if self.noise_sigma < 0.0:
            raise ValueError("noise_sigma must be nonnegative")
        if not (0 <= int(self.seed) < 2**64):
            raise ValueError("seed must fit in unsigned 64 bits")


@dataclass(frozen=True)
class SyntheticScene:
    """Generated scene plus every ground-truth quantity the toolkit estimates.

    ``gt_angle.entropy_bits`` is stored as 0.0: at this angle the noise-free
    hard-shadow construction collapses each surface to a single projected
    value, the idealized entropy minimum.
    """

    shadow_image: Image
    shadowfree_image: Image
    gt_mask: SoftMask
    gt_angle: InvariantAngle
    surface_labels: np.ndarray
    seed: int

    def __post_init__(self):
        labels = np.array(self.surface_labels, dtype=np.int32, copy=True)
        if labels.shape != self.gt_mask.shape:
            raise ValueError("surface_labels shape must match the mask")
        labels.flags.writeable = False
        object.__setattr__(self, "surface_labels", labels)

        shadow = self.shadow_image.data
        free = self.shadowfree_image.data
        mask = self.gt_mask.data
        if shadow.shape != free.shape or shadow.shape[:2] != mask.shape:
            raise ValueError("images and mask must agree on size")
        # shadows only darken; outside the shadow the images are identical
        inside = mask > 0.0
        if np.any(shadow[inside] > free[inside]):
            raise ValueError("shadow image exceeds shadow-free image in shadow")
        outside = ~inside
        if not np.array_equal(shadow[outside], free[outside]):
            raise ValueError("images differ outside the shadow mask")


def planck_rgb(temperature: float) -> np.ndarray:
    """Relative RGB of a Planckian radiator through the fixed sensitivities.

    Spectral radiance B(lambda, T) proportional to
    1 / (lambda^5 (exp(h c / lambda k T) - 1)) is sampled at the three sensor
    wavelengths and scaled so the largest channel equals 1.
    """
    lo, hi = TEMPERATURE_RANGE_K
    if not (lo <= temperature <= hi):
        raise ValueError(f"temperature {temperature} outside [{lo}, {hi}] K")
    wl = SENSOR_WAVELENGTHS_M
    radiance = 1.0 / (
        wl**5 * np.expm1(constants.h * constants.c / (wl * constants.k * temperature))
    )
    return radiance / radiance.max()


def _surface_grid(rng: np.random.Generator, h: int, w: int, k: int) -> np.ndarray:
    """Jittered grid of k near-equal rectangles, painted in random order."""
    ncols = int(np.ceil(np.sqrt(k)))
    nrows = int(np.ceil(k / ncols))
    cells = [(r, c) for r in range(nrows) for c in range(ncols)][:k]
    order = rng.permutation(k)
    labels = np.zeros((h, w), np.int32)
    cell_h, cell_w = h / nrows, w / ncols
    for idx in order:
        r, c = cells[idx]
        y0 = int(np.clip((r + rng.uniform(-0.25, 0.25)) * cell_h, 0, h - 2))
        x0 = int(np.clip((c + rng.uniform(-0.25, 0.25)) * cell_w, 0, w - 2))
        y1 = int(np.clip((r + 1 + rng.uniform(-0.25, 0.25)) * cell_h, y0 + 1, h))
        x1 = int(np.clip((c + 1 + rng.uniform(-0.25, 0.25)) * cell_w, x0 + 1, w))
        labels[y0:y1, x0:x1] = idx
    return labels


def _sample_reflectances(rng: np.random.Generator, k: int) -> np.ndarray:
    """k chromatic RGB reflectances, rejection-sampled inside the bounds."""
    lo, hi = REFLECTANCE_BOUNDS
    out = np.empty((k, 3))
    for i in range(k):
        while True:
            base = rng.uniform(*_ALBEDO_BASE_RANGE)
            cand = base * np.exp(rng.normal(0.0, _CHROMA_JITTER, size=3))
            if (
                cand.min() >= lo
                and cand.max() <= hi
                and cand.max() - cand.min() > _MIN_CHANNEL_SPREAD
            ):
                out[i] = cand
                break
    return out


def _shadow_polygon(rng: np.random.Generator, h: int, w: int) -> np.ndarray:
    """Binary raster of a jagged shadow polygon with bounded area share.

    Resamples until the polygon covers an area inside _COVERAGE_RANGE; after
    _PLACEMENT_TRIES attempts the last draw is kept, so generation always
    terminates and stays deterministic in the generator state.
    """
    lo, hi = _POLY_CENTER_RANGE
    hard = np.zeros((h, w), np.uint8)
    for _ in range(_PLACEMENT_TRIES):
        cx, cy = rng.uniform(lo, hi, 2) * (w, h)
        radius = rng.uniform(*_POLY_RADIUS_RANGE) * min(h, w)
        angles = np.sort(rng.uniform(0.0, 2.0 * np.pi, _POLY_VERTICES))
        radii = radius * (
            1.0 + _POLY_RADIAL_JITTER * rng.uniform(-1.0, 1.0, _POLY_VERTICES)
        )
        pts = np.stack([cx + radii * np.cos(angles), cy + radii * np.sin(angles)], 1)
        hard[:] = 0
        cv2.fillPoly(hard, [np.round(pts).astype(np.int32)], 1)
        if _COVERAGE_RANGE[0] <= hard.mean() <= _COVERAGE_RANGE[1]:
            break
    return hard


def _displacement_direction(
    e_lit: np.ndarray, e_shadow: np.ndarray, strength: float
) -> np.ndarray:
    """Plane direction the shadow moves log-chromaticity along.

    For strength > 0 this is the chord from the lit illuminant to the umbra
    mix (1-s) lit + s shadow; at strength 0 the chord degenerates and the
    infinitesimal-shadow limit (the derivative of the mix at s=0) is used.
    """
    if strength > 0.0:
        umbra = (1.0 - strength) * e_lit + strength * e_shadow
        return PLANE_BASIS @ (np.log(umbra) - np.log(e_lit))
    return PLANE_BASIS @ ((e_shadow - e_lit) / e_lit)


def generate(params: SceneParams) -> SyntheticScene:
    """Render shadow / shadow-free image pair with mask and angle ground truth.

    Construction, in the order the random stream is consumed:

    1. surface layout: jittered grid of ``n_surfaces`` rectangles;
    2. per-surface chromatic reflectances inside the contract bounds;
    3. shadow polygon, rasterized and blurred by ``penumbra_sigma`` into the
       soft mask m (binary when the blur is 0);
    4. optional shared noise field.

    The lit image is reflectance x planck_rgb(lit_T).  Inside the shadow the
    illuminant is the convex mix (1-s) lit + s shadow with
    s = shadow_strength x m, and the shadow illuminant is pre-scaled by the
    largest factor that keeps every channel at or below the lit one, so
    shadows only ever darken.  That scale is chromaticity-neutral, so the
    ground-truth angle is untouched: gt_angle is the orientation, rotated a
    quarter turn into entropy-minimum convention and reduced mod 180, of the
    plane displacement between the lit and full-strength umbra illuminants.
    """
    rng = np.random.default_rng(params.seed)
    h, w = params.height, params.width
    k = params.n_surfaces

    labels = _surface_grid(rng, h, w, k)
    reflectance = _sample_reflectances(rng, k)

    e_lit = planck_rgb(params.lit_temperature)
    e_shadow_raw = planck_rgb(params.shadow_temperature)
    # largest scale keeping the shadow illuminant below the lit one per channel;
    # the minimum guards the argmin channel against a one-ulp round-up
    alpha = float((e_lit / e_shadow_raw).min())
    e_shadow = np.minimum(alpha * e_shadow_raw, e_lit)

    if params.lit_temperature == params.shadow_temperature:
        warnings.warn(
            "lit and shadow temperatures are equal: zero chromaticity "
            "displacement, the scene carries no recoverable angle",
            RuntimeWarning,
            stacklevel=2,
        )

    hard = _shadow_polygon(rng, h, w)
    if params.penumbra_sigma > 0.0:
        mask = np.clip(
            gaussian_filter(hard.astype(np.float64), params.penumbra_sigma), 0.0, 1.0
        )
    else:
        mask = hard.astype(np.float64)

    s = params.shadow_strength * mask
    base = reflectance[labels]
    illum = (1.0 - s[..., None]) * e_lit + s[..., None] * e_shadow
    shadowfree = base * e_lit
    # the convex mix can round one ulp above the lit product; shadows darken
    shadow = np.minimum(base * illum, shadowfree)

    if params.noise_sigma > 0.0:
        noise = rng.normal(0.0, params.noise_sigma, shadow.shape)
        shadow = shadow + noise
        shadowfree = shadowfree + noise
    shadow = np.clip(shadow, 0.0, 1.0)
    shadowfree = np.clip(shadowfree, 0.0, 1.0)

    direction = _displacement_direction(e_lit, e_shadow, params.shadow_strength)
    gt_degrees = (np.rad2deg(np.arctan2(direction[1], direction[0])) + 90.0) % 180.0

    return SyntheticScene(
        shadow_image=Image(shadow),
        shadowfree_image=Image(shadowfree),
        gt_mask=SoftMask(mask),
        gt_angle=InvariantAngle(float(gt_degrees), 0.0),
        surface_labels=labels,
        seed=int(params.seed),
    )


__all__ = [
    "REFLECTANCE_BOUNDS",
    "SENSOR_WAVELENGTHS_M",
    "TEMPERATURE_RANGE_K",
    "SceneParams",
    "SyntheticScene",
    "generate",
    "planck_rgb",
]
