"""Hand-region masking and log-space lab color transfer for the mesh texture.

The decorrelated lab space follows the classic statistics-transfer
construction: RGB -> LMS, log10, then the fixed rotation into (L, alpha,
beta). The RGB->LMS rows are normalized to sum to 1 so the achromatic axis
maps exactly onto alpha = beta = 0.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

LOG_EPS = 1e-6
MIN_MASK_PIXELS = 64
GAIN_CLAMP = (0.2, 5.0)

_RGB2LMS_RAW = np.array([
    [0.3811, 0.5783, 0.0402],
    [0.1967, 0.7244, 0.0782],
    [0.0241, 0.1288, 0.8444],
])
_RGB2LMS = _RGB2LMS_RAW / _RGB2LMS_RAW.sum(axis=1, keepdims=True)
_LMS2RGB = np.linalg.inv(_RGB2LMS)

_LOG2LAB = np.diag([1 / np.sqrt(3), 1 / np.sqrt(6), 1 / np.sqrt(2)]) @ np.array([
    [1.0, 1.0, 1.0],
    [1.0, 1.0, -2.0],
    [1.0, -1.0, 0.0],
])
_LAB2LOG = np.linalg.inv(_LOG2LAB)


class AppearanceError(ValueError):
    pass


class InsufficientOverlapError(AppearanceError):
    """Too few depth-consistent pixels to fit color statistics."""


def rgb_to_lab(rgb: np.ndarray) -> np.ndarray:
    """Convert (..., 3) linear RGB in [0, 1] to log-space lab channels."""
    rgb = np.asarray(rgb, dtype=float)
    lms = rgb @ _RGB2LMS.T
    log_lms = np.log10(np.maximum(lms, 0.0) + LOG_EPS)
    return log_lms @ _LOG2LAB.T


def lab_to_rgb(lab: np.ndarray) -> np.ndarray:
    """Inverse of rgb_to_lab, clamped to [0, 1]."""
    log_lms = np.asarray(lab, dtype=float) @ _LAB2LOG.T
    lms = np.power(10.0, log_lms) - LOG_EPS
    rgb = lms @ _LMS2RGB.T
    return np.clip(rgb, 0.0, 1.0)


def hand_region_mask(depth_image: np.ndarray, depth_mesh: np.ndarray,
                     tol: float = 0.05) -> np.ndarray:
    """Pixels where both layers have valid depth that agrees within tol meters."""
    di = np.asarray(depth_image, dtype=float)
    dg = np.asarray(depth_mesh, dtype=float)
    if di.shape != dg.shape:
        raise AppearanceError("depth rasters must share dimensions")
    both = (di > 0) & (dg > 0)
    return both & (np.abs(di - dg) < tol)


@dataclass(frozen=True)
class ColorTransform:
    """Per-lab-channel affine map c' = gain * (c - mean_src) + mean_dst."""

    gain: np.ndarray
    mean_src: np.ndarray
    mean_dst: np.ndarray

    def __post_init__(self):
        for name in ("gain", "mean_src", "mean_dst"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if not np.all(np.isfinite(self.gain)) or np.any(self.gain <= 0):
            raise AppearanceError("color gains must be finite and positive")

    def apply_lab(self, lab: np.ndarray) -> np.ndarray:
        return self.gain * (lab - self.mean_src) + self.mean_dst

    @classmethod
    def identity(cls) -> "ColorTransform":
        return cls(np.ones(3), np.zeros(3), np.zeros(3))


def fit_color_transform(rgb_image: np.ndarray, rgb_mesh: np.ndarray,
                        mask: np.ndarray) -> ColorTransform:
    """Fit the lab statistics map taking masked mesh pixels onto image pixels.

    Uses population standard deviation. Near-constant source channels get
    their gain clamped instead of blowing up.
    """
    mask = np.asarray(mask, dtype=bool)
    if mask.sum() < MIN_MASK_PIXELS:
        raise InsufficientOverlapError(
            f"hand-region mask has {int(mask.sum())} pixels, need {MIN_MASK_PIXELS}")
    lab_i = rgb_to_lab(np.asarray(rgb_image, dtype=float)[mask])
    lab_g = rgb_to_lab(np.asarray(rgb_mesh, dtype=float)[mask])
    m_i, m_g = lab_i.mean(axis=0), lab_g.mean(axis=0)
    s_i, s_g = lab_i.std(axis=0), lab_g.std(axis=0)
    gain = np.where((s_g < 1e-6) & (s_i < 1e-6), 1.0,
                    s_i / np.maximum(s_g, 1e-6))
    gain = np.clip(gain, *GAIN_CLAMP)
    return ColorTransform(gain, m_g, m_i)


def apply_to_texture(texture: np.ndarray, transform: ColorTransform) -> np.ndarray:
    """Push every texel through the lab transform and back, clamped to [0, 1]."""
    lab = rgb_to_lab(np.asarray(texture, dtype=float))
    return lab_to_rgb(transform.apply_lab(lab))
