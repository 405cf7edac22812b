"""Coordinate frames for the two-site setup: rigid registration, the shared
screen-aligned global space, viewpoint triangulation, and the remote target
camera derived from it.

Mirror convention: site B embeds into global space through a half-turn about
the y axis (x and z negated), so both screen rectangles coincide and the
participants face each other through the shared plane.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import (Camera, apply_transform, check_rigid,
                       default_camera, inv_rigid, look_at, rotation_y, rt)


class CalibrationError(ValueError):
    pass


class DegenerateConfigurationError(CalibrationError):
    pass


def solve_rigid_registration(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Closed-form orthogonal Procrustes fit of T minimizing sum ||p_i - T q_i||^2.

    Requires at least 3 non-collinear correspondences; returns a 4x4 rigid
    transform with det(R) = +1.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape or p.ndim != 2 or p.shape[1] != 3:
        raise CalibrationError("correspondences must be matching (N, 3) arrays")
    if len(p) < 3:
        raise DegenerateConfigurationError("need at least 3 correspondences")
    cp, cq = p.mean(axis=0), q.mean(axis=0)
    qc = q - cq
    # Collinear q points leave the rotation about the line unconstrained.
    sv = np.linalg.svd(qc, compute_uv=False)
    if sv[1] < 1e-9 * max(sv[0], 1.0):
        raise DegenerateConfigurationError("correspondences are collinear")
    H = qc.T @ (p - cp)
    U, _, Vt = np.linalg.svd(H)
    d = np.sign(np.linalg.det(Vt.T @ U.T))
    R = Vt.T @ np.diag([1.0, 1.0, d]) @ U.T
    return rt(R, cp - R @ cq)


def registration_rmse(T: np.ndarray, p: np.ndarray, q: np.ndarray) -> float:
    res = np.asarray(p) - apply_transform(T, np.asarray(q))
    return float(np.sqrt(np.mean(np.sum(res ** 2, axis=1))))


@dataclass(frozen=True)
class ScreenGeometry:
    """Display surface dimensions; the site frame puts the screen at z = 0."""

    width: float = 1.439   # 65-inch 16:9 diagonal
    height: float = 0.809
    pose: np.ndarray = field(default_factory=lambda: np.eye(4))  # screen-local -> site

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise CalibrationError("screen dimensions must be positive")
        object.__setattr__(self, "pose", check_rigid(np.asarray(self.pose, dtype=float),
                                                     "screen pose"))

    def contains(self, xy: np.ndarray) -> np.ndarray:
        xy = np.atleast_2d(np.asarray(xy, dtype=float))
        inside = (np.abs(xy[:, 0]) <= self.width / 2) & (np.abs(xy[:, 1]) <= self.height / 2)
        return inside


@dataclass(frozen=True)
class SiteTransform:
    site_to_global: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "site_to_global",
                           check_rigid(np.asarray(self.site_to_global, dtype=float),
                                       "site transform"))

    @property
    def global_to_site(self) -> np.ndarray:
        return inv_rigid(self.site_to_global)


#: Half turn about y: the mirror embedding for site B.
MIRROR_Y = rt(rotation_y(np.pi), np.zeros(3))


def build_global_space(screen_a: ScreenGeometry,
                       screen_b: ScreenGeometry) -> tuple[SiteTransform, SiteTransform]:
    """Site-to-global transforms making both screen surfaces coincide.

    Site A's screen-local frame is the global frame; site B is embedded
    mirrored so its user sits on the far side of the shared plane.
    """
    if not (np.isclose(screen_a.width, screen_b.width)
            and np.isclose(screen_a.height, screen_b.height)):
        raise CalibrationError("screens must have equal dimensions")
    a = SiteTransform(inv_rigid(screen_a.pose))
    b = SiteTransform(MIRROR_Y @ inv_rigid(screen_b.pose))
    return a, b


@dataclass(frozen=True)
class Viewpoint:
    """User eye midpoint in the site frame."""

    position: np.ndarray
    timestamp_ms: int = 0

    def __post_init__(self):
        pos = np.asarray(self.position, dtype=float)
        if pos.shape != (3,) or not np.all(np.isfinite(pos)):
            raise CalibrationError("viewpoint must be a finite 3D point")
        object.__setattr__(self, "position", pos)


class UnderdeterminedError(CalibrationError):
    pass


class IllConditionedError(CalibrationError):
    pass


def _triangulate_rays(origins: np.ndarray, dirs: np.ndarray) -> np.ndarray:
    """Point minimizing the sum of squared distances to a set of rays."""
    A = np.zeros((3, 3))
    b = np.zeros(3)
    for o, d in zip(origins, dirs):
        P = np.eye(3) - np.outer(d, d)
        A += P
        b += P @ o
    return np.linalg.solve(A, b)


def _eye_ray(camera: Camera, pixel) -> tuple[np.ndarray, np.ndarray]:
    px = np.asarray(pixel, dtype=float)
    point = camera.unproject(px[None, :], np.array([1.0]))[0]
    d = point - camera.center
    return camera.center, d / np.linalg.norm(d)


def triangulate_point(cameras: list[Camera], pixels: list) -> np.ndarray:
    if len(cameras) < 2:
        raise UnderdeterminedError("triangulation needs at least 2 observing cameras")
    origins, dirs = zip(*(_eye_ray(c, px) for c, px in zip(cameras, pixels)))
    dirs = np.asarray(dirs)
    max_angle = 0.0
    for i in range(len(dirs)):
        for j in range(i + 1, len(dirs)):
            cosang = np.clip(abs(np.dot(dirs[i], dirs[j])), -1.0, 1.0)
            max_angle = max(max_angle, np.degrees(np.arccos(cosang)))
    if max_angle < 1.0:
        raise IllConditionedError("viewing rays nearly parallel (< 1 degree)")
    return _triangulate_rays(np.asarray(origins), dirs)


def compute_viewpoint(eye_obs: list[tuple[Camera, np.ndarray, np.ndarray]],
                      timestamp_ms: int = 0) -> Viewpoint:
    """Triangulate both eyes from multi-camera 2D observations and midpoint them.

    eye_obs: list of (camera, left-eye pixel, right-eye pixel).
    """
    cams = [obs[0] for obs in eye_obs]
    left = triangulate_point(cams, [obs[1] for obs in eye_obs])
    right = triangulate_point(cams, [obs[2] for obs in eye_obs])
    return Viewpoint((left + right) / 2.0, timestamp_ms)


def map_point_to_remote(point_local: np.ndarray, local: SiteTransform,
                        remote: SiteTransform) -> np.ndarray:
    """Express a local-site point in the remote site frame via global space."""
    g = apply_transform(local.site_to_global, point_local)
    return apply_transform(remote.global_to_site, g)


def remote_target_camera(viewpoint_local: Viewpoint, local: SiteTransform,
                         remote: SiteTransform, screen: ScreenGeometry,
                         width: int = 320, height: int = 240,
                         fov_deg: float = 60.0) -> Camera:
    """Target rendering camera at the remote site for a local viewpoint.

    The camera sits at the mapped viewpoint (behind the remote screen plane)
    looking at the screen center.
    """
    pos = map_point_to_remote(viewpoint_local.position, local, remote)
    screen_center = screen.pose[:3, 3]
    cam_from_world = look_at(pos, screen_center)
    return default_camera(width, height, fov_deg, cam_from_world)
