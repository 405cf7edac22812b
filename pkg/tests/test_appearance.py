import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from touchsim.appearance import (AppearanceError, ColorTransform,
                                 InsufficientOverlapError, LOG_EPS,
                                 apply_to_texture, fit_color_transform,
                                 hand_region_mask, lab_to_rgb, rgb_to_lab)


def test_roundtrip_random_colors(rng):
    rgb = rng.uniform(0.0, 1.0, size=(10_000, 3))
    back = lab_to_rgb(rgb_to_lab(rgb))
    assert np.abs(back - rgb).max() < 1e-5


def test_black_maps_to_log_floor():
    lab = rgb_to_lab(np.zeros(3))
    floor = np.log10(LOG_EPS)
    # All-log-floor LMS rotates to (sqrt(3)*floor, 0, 0).
    assert lab[0] == pytest.approx(np.sqrt(3) * floor)
    assert abs(lab[1]) < 1e-9 and abs(lab[2]) < 1e-9


def test_neutral_gray_is_achromatic():
    lab = rgb_to_lab(np.array([0.5, 0.5, 0.5]))
    assert abs(lab[1]) < 1e-6
    assert abs(lab[2]) < 1e-6


def test_lab_to_rgb_clamps():
    out = lab_to_rgb(np.array([[10.0, 5.0, -5.0]]))
    assert np.all(out >= 0.0) and np.all(out <= 1.0)
    assert np.all(np.isfinite(out))


# -- hand_region_mask --------------------------------------------------------

def test_mask_equal_depths_selects_jointly_valid():
    d = np.full((4, 4), 0.5)
    d2 = d.copy()
    d2[0, 0] = 0.0  # invalid in one layer
    mask = hand_region_mask(d, d2)
    assert not mask[0, 0]
    assert mask.sum() == 15


def test_mask_large_difference_is_empty():
    a = np.full((4, 4), 0.5)
    b = np.full((4, 4), 0.6)
    assert not hand_region_mask(a, b).any()


def test_mask_half_and_half():
    a = np.full((2, 10), 0.5)
    b = a.copy()
    b[:, :5] += 0.01
    b[:, 5:] += 0.08
    mask = hand_region_mask(a, b)
    assert mask[:, :5].all() and not mask[:, 5:].any()


def test_mask_rejects_dimension_mismatch():
    with pytest.raises(AppearanceError):
        hand_region_mask(np.zeros((2, 2)), np.zeros((3, 3)))


@given(st.floats(0.0, 0.1), st.floats(0.0, 0.1), st.integers(0, 2 ** 31 - 1))
@settings(max_examples=30, deadline=None)
def test_mask_monotone_in_tolerance(tol_a, tol_b, seed):
    rng = np.random.default_rng(seed)
    d1 = rng.uniform(0.1, 1.0, size=(8, 8))
    d2 = d1 + rng.normal(0.0, 0.05, size=(8, 8))
    lo, hi = sorted((tol_a, tol_b))
    m_lo = hand_region_mask(d1, d2, lo)
    m_hi = hand_region_mask(d1, d2, hi)
    assert np.all(m_hi | ~m_lo)  # m_lo is a subset of m_hi


# -- fit_color_transform -----------------------------------------------------

def _pair(rng, shape=(32, 32)):
    img = rng.uniform(0.2, 0.9, size=shape + (3,))
    return img


def test_fit_identity_on_equal_images(rng):
    img = _pair(rng)
    mask = np.ones(img.shape[:2], dtype=bool)
    ct = fit_color_transform(img, img, mask)
    assert np.allclose(ct.gain, 1.0, atol=1e-6)
    lab = rgb_to_lab(img[mask])
    assert np.abs(ct.apply_lab(lab) - lab).max() < 1e-6


def test_fit_constant_regions_is_pure_offset(rng):
    gray = np.full((16, 16, 3), 0.5)
    skin = np.full((16, 16, 3), [0.78, 0.58, 0.48])
    mask = np.ones((16, 16), dtype=bool)
    ct = fit_color_transform(skin, gray, mask)
    assert np.allclose(ct.gain, 1.0)  # both sides near-constant
    out = lab_to_rgb(ct.apply_lab(rgb_to_lab(gray[mask])))
    assert np.abs(out - skin[mask]).max() < 1e-5


def test_fit_recovers_known_gain_and_offset(rng):
    # Narrow value range so doubling the lab spread stays inside RGB gamut
    # (clamping would corrupt the statistics).
    mesh_rgb = rng.uniform(0.45, 0.6, size=(32, 32, 3))
    mask = np.ones(mesh_rgb.shape[:2], dtype=bool)
    lab = rgb_to_lab(mesh_rgb)
    truth = ColorTransform(np.full(3, 2.0), lab[mask].mean(axis=0),
                           lab[mask].mean(axis=0) + 0.02)
    image_rgb = lab_to_rgb(truth.apply_lab(lab))
    ct = fit_color_transform(image_rgb, mesh_rgb, mask)
    assert np.abs(ct.gain - 2.0).max() < 1e-4
    check = ct.apply_lab(lab[mask])
    assert np.abs(check - rgb_to_lab(image_rgb)[mask]).max() < 1e-4


def test_fit_matches_masked_statistics(rng):
    image = _pair(rng)
    mesh = np.clip(_pair(rng) * 0.6 + 0.1, 0, 1)
    mask = np.zeros(image.shape[:2], dtype=bool)
    mask[4:28, 4:28] = True
    ct = fit_color_transform(image, mesh, mask)
    out = ct.apply_lab(rgb_to_lab(mesh[mask]))
    ref = rgb_to_lab(image[mask])
    assert np.abs(out.mean(axis=0) - ref.mean(axis=0)).max() < 1e-4
    assert np.abs(out.std(axis=0) - ref.std(axis=0)).max() < 1e-4


def test_fit_rejects_small_mask(rng):
    img = _pair(rng, (8, 8))
    mask = np.zeros((8, 8), dtype=bool)
    mask[0, :4] = True
    with pytest.raises(InsufficientOverlapError):
        fit_color_transform(img, img, mask)


def test_gain_is_clamped(rng):
    # Near-constant mesh region vs a high-variance image region would give a
    # huge gain; it must be clamped to the documented ceiling.
    image = rng.uniform(0.0, 1.0, size=(32, 32, 3))
    mesh = np.full((32, 32, 3), 0.5) + rng.normal(0, 1e-4, (32, 32, 3))
    mask = np.ones((32, 32), dtype=bool)
    ct = fit_color_transform(image, np.clip(mesh, 0, 1), mask)
    assert np.all(ct.gain <= 5.0) and np.all(ct.gain >= 0.2)


def test_color_transform_validates_gains():
    with pytest.raises(AppearanceError):
        ColorTransform(np.array([1.0, -1.0, 1.0]), np.zeros(3), np.zeros(3))


# -- apply_to_texture --------------------------------------------------------

def test_apply_identity_transform_keeps_texture(rng):
    tex = rng.uniform(0.1, 0.9, size=(16, 16, 3))
    out = apply_to_texture(tex, ColorTransform.identity())
    assert np.abs(out - tex).max() < 1e-5


def test_apply_clamps_out_of_range(rng):
    tex = rng.uniform(0.5, 1.0, size=(8, 8, 3))
    pushy = ColorTransform(np.full(3, 5.0), np.zeros(3), np.full(3, 1.0))
    out = apply_to_texture(tex, pushy)
    assert np.all(np.isfinite(out))
    assert np.all(out >= 0.0) and np.all(out <= 1.0)
