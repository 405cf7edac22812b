"""Distance-based fusion of the image-based and mesh-based hand layers.

The mesh layer's alpha ramps linearly from 1 at d_min to 0 at d_max of
hand-to-screen distance; the layers are then combined with overlay blending
(image layer as base) and composed over an opaque background. All math is in
linear color.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import SCREEN_PLANE, Plane
from .imaging import LayerImage, compose_over_background
from .skeleton import HandSkeleton


class FusionError(ValueError):
    pass


@dataclass(frozen=True)
class FusionParams:
    """Distance ramp endpoints in meters (defaults are the deployed values)."""

    d_min: float = 0.2
    d_max: float = 0.4

    def __post_init__(self):
        if not (0 < self.d_min < self.d_max):
            raise FusionError("need 0 < d_min < d_max")


@dataclass(frozen=True)
class HandDistance:
    d: float
    d_hat: float


def hand_distance(skeleton: HandSkeleton, screen_plane: Plane = SCREEN_PLANE,
                  params: FusionParams = FusionParams(),
                  unsigned: bool = False) -> HandDistance:
    """Mean signed joint distance to the screen plane, clamped at 0.

    ``unsigned=True`` measures |distance| instead; used when the skeleton has
    already been mapped behind the local screen plane (remote hands).
    """
    dists = screen_plane.signed_distance(skeleton.joints)
    if unsigned:
        dists = np.abs(dists)
    d = max(float(np.mean(dists)), 0.0)
    d_hat = float(np.clip(d, params.d_min, params.d_max))
    return HandDistance(d, d_hat)


def alpha_from_distance(dist: HandDistance, params: FusionParams) -> float:
    # Exact at the ramp endpoints (with rounding slack from the joint mean)
    # so the boundary frames are bit-reproducible.
    if dist.d_hat <= params.d_min + 1e-12:
        return 1.0
    if dist.d_hat >= params.d_max - 1e-12:
        return 0.0
    return (params.d_max - dist.d_hat) / (params.d_max - params.d_min)


def hand_alpha(dist: HandDistance, params: FusionParams,
               hand_mask: np.ndarray) -> np.ndarray:
    """Alpha raster for the mesh layer: the distance ramp on hand pixels, 0 off."""
    mask = np.asarray(hand_mask, dtype=bool)
    return alpha_from_distance(dist, params) * mask.astype(float)


def overlay_blend(base: LayerImage, overlay: LayerImage,
                  overlay_alpha: np.ndarray | None = None) -> LayerImage:
    """Overlay the mesh layer onto the image-based base layer.

    alpha_f = a_g + a_i (1 - a_g);  c_f = (c_g a_g + c_i a_i (1 - a_g)) / alpha_f
    with c_f = 0 where alpha_f = 0. Pixels with a_g = 0 copy the base layer
    exactly (same value, bitwise), which keeps the d >= d_max boundary
    bit-identical to the pure image-based frame.
    """
    a_g = overlay.alpha if overlay_alpha is None else np.asarray(overlay_alpha, dtype=float)
    if base.alpha.shape != a_g.shape or base.alpha.shape != overlay.alpha.shape:
        raise FusionError("layer dimensions must match")
    a_i = base.alpha
    alpha_f = a_g + a_i * (1.0 - a_g)
    num = overlay.rgb * a_g[..., None] + base.rgb * (a_i * (1.0 - a_g))[..., None]
    c_f = np.zeros_like(num)
    np.divide(num, alpha_f[..., None], out=c_f, where=alpha_f[..., None] > 0)
    passthrough = a_g == 0
    c_f[passthrough] = base.rgb[passthrough]
    alpha_f[passthrough] = a_i[passthrough]

    depth = base.depth.copy()
    mesh_vis = (a_g > 0) & overlay.valid_depth
    closer = mesh_vis & ((overlay.depth < depth) | ~base.valid_depth)
    depth[closer] = overlay.depth[closer]
    return LayerImage(c_f, alpha_f, depth, base.camera)


def compose_background(layer: LayerImage, background: np.ndarray) -> np.ndarray:
    """Over-composite the fused layer onto an opaque background raster."""
    bg = np.asarray(background, dtype=float)
    if bg.shape != layer.rgb.shape:
        raise FusionError("background dimensions must match the layer")
    return compose_over_background(layer.rgb, layer.alpha, bg)


def fuse_frame(image_layer: LayerImage, mesh_layer: LayerImage,
               dist: HandDistance, params: FusionParams,
               background: np.ndarray) -> tuple[np.ndarray, LayerImage, float]:
    """One receiver fusion step; returns (final RGB, fused layer, alpha_g)."""
    a_scalar = alpha_from_distance(dist, params)
    a_g = hand_alpha(dist, params, mesh_layer.alpha > 0)
    fused = overlay_blend(image_layer, mesh_layer, a_g)
    return compose_background(fused, background), fused, a_scalar
