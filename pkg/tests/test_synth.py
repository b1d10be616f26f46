"""Synthetic scene generator: Planck illuminants and ground-truth contracts."""

import numpy as np
import pytest
from mpmath import mp

from shadowphys.chroma import (
    PLANE_BASIS,
    find_invariant_angle,
    log_chromaticity,
)
from shadowphys.synth import (
    REFLECTANCE_BOUNDS,
    SENSOR_WAVELENGTHS_M,
    SceneParams,
    generate,
    planck_rgb,
)

# ---------- planck_rgb ----------


def _planck_oracle(temperature):
    """Independent high-precision Planck-law evaluation (50 digits).

    B(lambda, T) = (2 h c^2 / lambda^5) / (exp(h c / lambda k T) - 1); the
    leading constants cancel in the max-normalized ratio, matching the
    relative RGB the generator promises.  CODATA 2018 exact values, written
    out here rather than imported, so the oracle shares nothing with the
    implementation.
    """
    mp.dps = 50
    h = mp.mpf("6.62607015e-34")
    c = mp.mpf("2.99792458e8")
    kb = mp.mpf("1.380649e-23")
    t = mp.mpf(temperature)
    vals = []
    for wl_m in ("610e-9", "540e-9", "465e-9"):
        lam = mp.mpf(wl_m)
        vals.append(1 / (lam**5 * (mp.e ** (h * c / (lam * kb * t)) - 1)))
    top = max(vals)
    return np.array([float(v / top) for v in vals])


@pytest.mark.parametrize("temperature", [2500.0, 3500.0, 5000.0, 6500.0, 10000.0])
def test_planck_rgb_matches_high_precision_oracle(temperature):
    got = planck_rgb(temperature)
    want = _planck_oracle(temperature)
    assert np.max(np.abs(got - want)) < 1e-12


def test_planck_rgb_red_blue_ratio_strictly_decreasing():
    # hotter radiators are bluer; sampled every 500 K across the full range
    temps = np.arange(2500.0, 10000.0 + 1, 500.0)
    ratios = [planck_rgb(t)[0] / planck_rgb(t)[2] for t in temps]
    assert all(a > b for a, b in zip(ratios, ratios[1:]))


def test_planck_rgb_positive_and_max_normalized():
    for t in (2500.0, 4321.0, 9999.0):
        e = planck_rgb(t)
        assert e.shape == (3,)
        assert np.all(e > 0.0)
        assert e.max() == 1.0


def test_planck_rgb_rejects_out_of_range_temperature():
    with pytest.raises(ValueError):
        planck_rgb(2499.9)
    with pytest.raises(ValueError):
        planck_rgb(10000.1)


def test_sensor_wavelengths_are_fixed_rgb_order():
    assert SENSOR_WAVELENGTHS_M.tolist() == [610e-9, 540e-9, 465e-9]


# ---------- SceneParams validation ----------


def test_scene_params_reject_invalid_fields():
    with pytest.raises(ValueError):
        SceneParams(lit_temperature=2000.0)
    with pytest.raises(ValueError):
        SceneParams(shadow_temperature=12000.0)
    with pytest.raises(ValueError):
        SceneParams(shadow_strength=1.2)
    with pytest.raises(ValueError):
        SceneParams(shadow_strength=-0.1)
    with pytest.raises(ValueError):
        SceneParams(n_surfaces=0)
    with pytest.raises(ValueError):
        SceneParams(penumbra_sigma=-1.0)
    with pytest.raises(ValueError):
        SceneParams(noise_sigma=-0.5)
    with pytest.raises(ValueError):
        SceneParams(width=4)


# ---------- generate: contract examples ----------


def test_zero_strength_scene_images_identical():
    scene = generate(SceneParams(width=64, height=48, shadow_strength=0.0, seed=3))
    assert np.array_equal(scene.shadow_image.data, scene.shadowfree_image.data)
    assert scene.gt_mask.data.max() > 0.0  # the mask is still stored


def test_zero_penumbra_gives_binary_mask():
    scene = generate(SceneParams(width=64, height=64, penumbra_sigma=0.0, seed=4))
    values = np.unique(scene.gt_mask.data)
    assert set(values.tolist()) <= {0.0, 1.0}
    assert values.size == 2  # polygon coverage bounds guarantee both states


def test_default_scene_seed42_angle_recovered_within_2_degrees():
    # the module's reason to exist: the estimator finds the constructed angle
    scene = generate(SceneParams(seed=42))
    angle, _ = find_invariant_angle(log_chromaticity(scene.shadow_image))
    dev = abs(angle.degrees - scene.gt_angle.degrees)
    assert min(dev, 180.0 - dev) <= 2.0


def test_equal_temperatures_warn_degenerate():
    with pytest.warns(RuntimeWarning, match="equal"):
        scene = generate(
            SceneParams(
                width=48, height=48, lit_temperature=5000.0, shadow_temperature=5000.0
            )
        )
    # identical illuminants: no displacement, so no shadow beyond fp rounding
    diff = scene.shadowfree_image.data - scene.shadow_image.data
    assert diff.max() < 1e-15


# ---------- generate: invariants ----------


def test_bit_determinism_in_params_and_seed():
    p = SceneParams(width=80, height=64, penumbra_sigma=2.5, noise_sigma=0.01, seed=11)
    a = generate(p)
    b = generate(p)
    assert np.array_equal(a.shadow_image.data, b.shadow_image.data)
    assert np.array_equal(a.shadowfree_image.data, b.shadowfree_image.data)
    assert np.array_equal(a.gt_mask.data, b.gt_mask.data)
    assert np.array_equal(a.surface_labels, b.surface_labels)
    assert a.gt_angle.degrees == b.gt_angle.degrees


def test_shadows_only_darken_and_lit_region_untouched():
    for seed in (0, 1, 2):
        scene = generate(SceneParams(width=96, height=72, seed=seed))
        shadow = scene.shadow_image.data
        free = scene.shadowfree_image.data
        assert np.all(shadow <= free)
        outside = scene.gt_mask.data == 0.0
        assert outside.any()
        assert np.array_equal(shadow[outside], free[outside])


def test_reflectances_recoverable_and_inside_bounds():
    scene = generate(SceneParams(width=64, height=64, seed=9))
    e_lit = planck_rgb(6500.0)
    refl = scene.shadowfree_image.data / e_lit
    lo, hi = REFLECTANCE_BOUNDS
    assert refl.min() >= lo - 1e-12
    assert refl.max() <= hi + 1e-12
    # constant reflectance inside each surface
    labels = scene.surface_labels
    for k in np.unique(labels):
        patch = refl[labels == k]
        assert np.max(np.abs(patch - patch[0])) < 1e-12


def test_surface_labels_shape_and_range():
    scene = generate(SceneParams(width=70, height=50, n_surfaces=7, seed=5))
    assert scene.surface_labels.shape == (50, 70)
    assert scene.surface_labels.min() >= 0
    assert scene.surface_labels.max() < 7


@pytest.mark.parametrize("strength", [0.5, 1.0])
def test_per_surface_chroma_collinearity_hard_mask(strength):
    # lit and shadow pixels of one surface must lie on a single line in the
    # log-chromaticity plane; with a binary mask the populations are two
    # exact points, so the orthogonal SVD residual is at float precision
    scene = generate(
        SceneParams(
            width=96, height=96, shadow_strength=strength, penumbra_sigma=0.0, seed=21
        )
    )
    chi = log_chromaticity(scene.shadow_image).data
    mask = scene.gt_mask.data
    labels = scene.surface_labels
    checked = 0
    for k in np.unique(labels):
        sel = labels == k
        pts = chi[sel]
        if (mask[sel] == 0.0).sum() < 5 or (mask[sel] == 1.0).sum() < 5:
            continue
        centered = pts - pts.mean(axis=0)
        # smallest principal direction carries the off-line residual
        _, s, vt = np.linalg.svd(centered, full_matrices=False)
        residual = np.max(np.abs(centered @ vt[-1]))
        assert residual < 1e-6
        checked += 1
    assert checked >= 3  # several surfaces straddle the shadow edge


def test_gt_angle_matches_pixel_displacement_oracle():
    # oracle read from the rendered data, not the formula: the chi shift of
    # an umbra pixel relative to a lit pixel of the same surface must point
    # along gt_angle - 90
    scene = generate(
        SceneParams(
            width=96, height=96, shadow_strength=0.7, penumbra_sigma=0.0, seed=33
        )
    )
    chi = log_chromaticity(scene.shadow_image).data
    mask = scene.gt_mask.data
    labels = scene.surface_labels
    found = False
    for k in np.unique(labels):
        sel = labels == k
        lit_pts = chi[sel & (mask == 0.0)]
        umbra_pts = chi[sel & (mask == 1.0)]
        if len(lit_pts) < 5 or len(umbra_pts) < 5:
            continue
        d = umbra_pts.mean(axis=0) - lit_pts.mean(axis=0)
        got = (np.degrees(np.arctan2(d[1], d[0])) + 90.0) % 180.0
        dev = abs(got - scene.gt_angle.degrees)
        assert min(dev, 180.0 - dev) < 1e-6
        found = True
    assert found


def test_gt_angle_depends_on_strength_through_the_umbra_mix():
    # the umbra illuminant is a convex mix, so the chord direction moves
    # with strength; at full strength it is the pure illuminant-pair chord
    a = generate(SceneParams(shadow_strength=0.4, penumbra_sigma=0.0, seed=2))
    b = generate(SceneParams(shadow_strength=1.0, penumbra_sigma=0.0, seed=2))
    assert abs(a.gt_angle.degrees - b.gt_angle.degrees) > 0.5
    e_lit = planck_rgb(6500.0)
    e_raw = planck_rgb(3500.0)
    e_shadow = np.minimum(float((e_lit / e_raw).min()) * e_raw, e_lit)
    d = PLANE_BASIS @ (np.log(e_shadow) - np.log(e_lit))
    pair = (np.degrees(np.arctan2(d[1], d[0])) + 90.0) % 180.0
    assert abs(b.gt_angle.degrees - pair) < 1e-9


def test_noise_field_is_shared_between_the_image_pair():
    scene = generate(
        SceneParams(width=96, height=96, penumbra_sigma=2.0, noise_sigma=0.02, seed=6)
    )
    outside = scene.gt_mask.data == 0.0
    assert outside.any()
    assert np.array_equal(
        scene.shadow_image.data[outside], scene.shadowfree_image.data[outside]
    )
    assert np.all(scene.shadow_image.data <= scene.shadowfree_image.data)


def test_non_square_scene_shapes():
    scene = generate(SceneParams(width=100, height=60, seed=8))
    assert scene.shadow_image.shape == (60, 100, 3)
    assert scene.gt_mask.shape == (60, 100)
    assert scene.surface_labels.shape == (60, 100)
    assert 0.0 <= scene.gt_angle.degrees < 180.0


def test_mask_coverage_within_generator_bounds():
    # placement resamples until the polygon covers a reasonable share
    for seed in (0, 5, 17):
        scene = generate(SceneParams(width=96, height=96, seed=seed))
        hard_share = (scene.gt_mask.data > 0.5).mean()
        assert 0.05 < hard_share < 0.6
