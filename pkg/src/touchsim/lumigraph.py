"""Deterministic image-based rendering of the portrait layer.

Builds a view-dependent geometry proxy by min-filter fusion of the source
depth maps, warps each source image onto the target view through the proxy,
and blends the warps with angular weights. The output is the RGBA + depth
portrait layer consumed by fusion.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import Camera
from .imaging import DEPTH_EMPTY, LayerImage

#: Angular falloff constant for blend weights (radians).
THETA_0 = np.radians(20.0)
#: Occlusion tolerance when sampling a source depth map (meters). Half the
#: 5 cm depth-consistency tolerance used for hand masking.
OCCLUSION_TOL = 0.02


class LumigraphError(ValueError):
    pass


@dataclass
class CaptureRig:
    """Source cameras around the screen plus their current RGBD frames."""

    cameras: list[Camera]
    frames: list[LayerImage] = field(default_factory=list)

    def __post_init__(self):
        if len(self.cameras) < 2:
            raise LumigraphError("a capture rig needs at least 2 cameras")
        if self.frames and len(self.frames) != len(self.cameras):
            raise LumigraphError("one frame per rig camera expected")

    def with_frames(self, frames: list[LayerImage]) -> "CaptureRig":
        return CaptureRig(self.cameras, frames)


def fuse_depth_min(frames: list[LayerImage], target_camera: Camera) -> np.ndarray:
    """Geometry proxy in the target view: per-pixel minimum of the source
    depths splatted into the target camera. Keeps depth edges sharp because
    projected depths are never averaged."""
    if not frames:
        raise LumigraphError("no source frames to fuse")
    h, w = target_camera.height, target_camera.width
    fused = np.full((h, w), np.inf)
    for frame in frames:
        valid = frame.valid_depth & (frame.alpha > 0)
        if not valid.any():
            continue
        vv, uu = np.nonzero(valid)
        pixels = np.stack([uu + 0.5, vv + 0.5], axis=1)
        points = frame.camera.unproject(pixels, frame.depth[vv, uu])
        px, z = target_camera.project(points)
        front = z > 1e-6
        px, z = px[front], z[front]
        ui = np.floor(px[:, 0]).astype(int)
        vi = np.floor(px[:, 1]).astype(int)
        inside = (ui >= 0) & (ui < w) & (vi >= 0) & (vi < h)
        np.minimum.at(fused, (vi[inside], ui[inside]), z[inside])
    fused[~np.isfinite(fused)] = DEPTH_EMPTY
    return fused


def _bilinear(plane: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Bilinear sample at pixel-center coordinates; clamps at borders."""
    h, w = plane.shape[:2]
    x = np.clip(u - 0.5, 0.0, w - 1.0)
    y = np.clip(v - 0.5, 0.0, h - 1.0)
    x0 = np.floor(x).astype(int)
    y0 = np.floor(y).astype(int)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = (x - x0)[..., None] if plane.ndim == 3 else (x - x0)
    fy = (y - y0)[..., None] if plane.ndim == 3 else (y - y0)
    top = plane[y0, x0] * (1 - fx) + plane[y0, x1] * fx
    bot = plane[y1, x0] * (1 - fx) + plane[y1, x1] * fx
    return top * (1 - fy) + bot * fy


def warp_view(source: LayerImage, proxy_depth: np.ndarray,
              target_camera: Camera) -> LayerImage:
    """Resample the source image onto the target view through the proxy.

    Pixels whose proxy point is occluded in the source (source depth closer
    by more than OCCLUSION_TOL) or falls outside the source frame get alpha 0.
    """
    h, w = target_camera.height, target_camera.width
    out_rgb = np.zeros((h, w, 3))
    out_alpha = np.zeros((h, w))
    valid = proxy_depth > DEPTH_EMPTY
    if not valid.any():
        return LayerImage(out_rgb, out_alpha, proxy_depth.copy(), target_camera)
    vv, uu = np.nonzero(valid)
    pixels = np.stack([uu + 0.5, vv + 0.5], axis=1)
    points = target_camera.unproject(pixels, proxy_depth[vv, uu])
    spx, sz = source.camera.project(points)
    ok = (sz > 1e-6)
    ok &= (spx[:, 0] >= 0) & (spx[:, 0] <= source.width)
    ok &= (spx[:, 1] >= 0) & (spx[:, 1] <= source.height)
    if ok.any():
        su, sv = spx[ok, 0], spx[ok, 1]
        src_depth = _bilinear(source.depth, su, sv)
        visible = (src_depth > DEPTH_EMPTY) & (src_depth > sz[ok] - OCCLUSION_TOL)
        color = _bilinear(source.rgb, su, sv)
        alpha = _bilinear(source.alpha, su, sv) * visible
        out_rgb[vv[ok], uu[ok]] = color * (alpha[:, None] > 0)
        out_alpha[vv[ok], uu[ok]] = alpha
    return LayerImage(out_rgb, out_alpha, proxy_depth.copy(), target_camera)


def blend_ulr(warped: list[LayerImage], target_camera: Camera,
              source_cameras: list[Camera],
              proxy_depth: np.ndarray | None = None) -> LayerImage:
    """Angular-weighted blend of warped source layers.

    Weight of source k at a pixel is exp(-theta_k / THETA_0) with theta_k the
    angle between the target and source rays at the proxy point; zeroed where
    the warped sample is empty, then renormalized to a convex combination.
    """
    if not warped:
        raise LumigraphError("no warped layers to blend")
    if proxy_depth is None:
        proxy_depth = warped[0].depth
    h, w = target_camera.height, target_camera.width
    valid = proxy_depth > DEPTH_EMPTY
    vv, uu = np.nonzero(valid)
    points = target_camera.unproject(
        np.stack([uu + 0.5, vv + 0.5], axis=1), proxy_depth[vv, uu])

    t_dir = points - target_camera.center
    t_dir /= np.maximum(np.linalg.norm(t_dir, axis=1, keepdims=True), 1e-12)

    weights = np.zeros((len(warped), len(vv)))
    for k, (layer, cam) in enumerate(zip(warped, source_cameras)):
        s_dir = points - cam.center
        s_dir /= np.maximum(np.linalg.norm(s_dir, axis=1, keepdims=True), 1e-12)
        cosang = np.clip(np.sum(t_dir * s_dir, axis=1), -1.0, 1.0)
        theta = np.arccos(cosang)
        wk = np.exp(-theta / THETA_0)
        wk[layer.alpha[vv, uu] <= 0] = 0.0
        weights[k] = wk
    total = weights.sum(axis=0)
    contributing = total > 0
    weights[:, contributing] /= total[contributing]

    rgb = np.zeros((h, w, 3))
    alpha = np.zeros((h, w))
    acc = np.zeros((len(vv), 3))
    amax = np.zeros(len(vv))
    for k, layer in enumerate(warped):
        acc += weights[k][:, None] * layer.rgb[vv, uu]
        contrib = weights[k] > 0
        amax = np.maximum(amax, layer.alpha[vv, uu] * contrib)
    rgb[vv, uu] = acc
    alpha[vv, uu] = amax
    return LayerImage(rgb, alpha, proxy_depth.copy(), target_camera)


def render_portrait(rig: CaptureRig, target_camera: Camera) -> LayerImage:
    """Full image-based pipeline: fuse depth, warp each source, blend."""
    if not rig.frames:
        raise LumigraphError("rig carries no frames")
    proxy = fuse_depth_min(rig.frames, target_camera)
    warped = [warp_view(frame, proxy, target_camera) for frame in rig.frames]
    return blend_ulr(warped, target_camera, [f.camera for f in rig.frames],
                     proxy_depth=proxy)


def select_cameras(rig: CaptureRig, hand_x: float | None) -> CaptureRig:
    """Touch-phase camera subset: drop the two rig cameras nearest the
    touching hand's side of the screen (keeps at least two)."""
    if hand_x is None or len(rig.cameras) <= 3:
        return rig
    xs = np.array([cam.center[0] for cam in rig.cameras])
    order = np.argsort(np.abs(xs - hand_x))
    drop = set(order[:min(2, len(rig.cameras) - 2)].tolist())
    keep = [i for i in range(len(rig.cameras)) if i not in drop]
    cams = [rig.cameras[i] for i in keep]
    frames = [rig.frames[i] for i in keep] if rig.frames else []
    return CaptureRig(cams, frames)
