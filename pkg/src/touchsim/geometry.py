"""Rigid transforms, planes, and pinhole cameras shared by all pipeline stages.

Conventions: all distances in meters, right-handed frames, transforms are
4x4 float64 matrices acting on column vectors. A site frame has its screen
plane at z = 0 with +z pointing toward the local user.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ROT_TOL = 1e-6


class GeometryError(ValueError):
    pass


def rt(R, t) -> np.ndarray:
    """Compose a 4x4 rigid transform from a 3x3 rotation and translation."""
    T = np.eye(4)
    T[:3, :3] = np.asarray(R, dtype=float)
    T[:3, 3] = np.asarray(t, dtype=float)
    return T


def translation(t) -> np.ndarray:
    return rt(np.eye(3), t)


def rotation_x(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[1, 0, 0], [0, c, -s], [0, s, c]], dtype=float)


def rotation_y(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, 0, s], [0, 1, 0], [-s, 0, c]], dtype=float)


def rotation_z(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]], dtype=float)


def is_rigid(T: np.ndarray, tol: float = ROT_TOL) -> bool:
    T = np.asarray(T)
    if T.shape != (4, 4) or not np.all(np.isfinite(T)):
        return False
    R = T[:3, :3]
    if not np.allclose(R.T @ R, np.eye(3), atol=tol):
        return False
    if not np.isclose(np.linalg.det(R), 1.0, atol=tol):
        return False
    return bool(np.allclose(T[3], [0, 0, 0, 1], atol=tol))


def check_rigid(T: np.ndarray, what: str = "transform") -> np.ndarray:
    T = np.asarray(T, dtype=float)
    if not is_rigid(T):
        raise GeometryError(f"{what} is not a rigid transform")
    return T


def inv_rigid(T: np.ndarray) -> np.ndarray:
    R = T[:3, :3]
    out = np.eye(4)
    out[:3, :3] = R.T
    out[:3, 3] = -R.T @ T[:3, 3]
    return out


def apply_transform(T: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Apply a 4x4 transform to an (N, 3) array of points."""
    pts = np.asarray(points, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    out = pts @ T[:3, :3].T + T[:3, 3]
    return out[0] if single else out


def look_at(eye, target, up=(0.0, 1.0, 0.0)) -> np.ndarray:
    """cam_from_world for a camera at `eye` looking toward `target`.

    Camera convention: +x right, +y down, +z forward (standard pinhole
    projection frame).
    """
    eye = np.asarray(eye, dtype=float)
    fwd = np.asarray(target, dtype=float) - eye
    n = np.linalg.norm(fwd)
    if n < 1e-12:
        raise GeometryError("look_at eye and target coincide")
    fwd = fwd / n
    up = np.asarray(up, dtype=float)
    right = np.cross(fwd, up)
    rn = np.linalg.norm(right)
    if rn < 1e-9:
        up = np.array([0.0, 0.0, 1.0])
        right = np.cross(fwd, up)
        rn = np.linalg.norm(right)
    right /= rn
    down = np.cross(fwd, right)
    R_wc = np.stack([right, down, fwd], axis=1)  # world_from_cam rotation
    world_from_cam = rt(R_wc, eye)
    return inv_rigid(world_from_cam)


@dataclass(frozen=True)
class Plane:
    """Oriented plane given by a point and a unit normal."""

    point: np.ndarray
    normal: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "point", np.asarray(self.point, dtype=float))
        n = np.asarray(self.normal, dtype=float)
        norm = np.linalg.norm(n)
        if not np.isfinite(norm) or norm < 1e-12:
            raise GeometryError("degenerate plane normal")
        object.__setattr__(self, "normal", n / norm)

    def signed_distance(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        d = (pts - self.point) @ self.normal
        return d if np.asarray(points).ndim > 1 else d[0]


#: Screen plane of a site frame, +z toward the local user.
SCREEN_PLANE = Plane(np.zeros(3), np.array([0.0, 0.0, 1.0]))


@dataclass
class Camera:
    """Pinhole camera: intrinsics in pixels plus cam_from_world extrinsics."""

    width: int
    height: int
    fx: float
    fy: float
    cx: float
    cy: float
    cam_from_world: np.ndarray = field(default_factory=lambda: np.eye(4))

    def __post_init__(self):
        self.cam_from_world = check_rigid(self.cam_from_world, "camera extrinsics")

    @property
    def world_from_cam(self) -> np.ndarray:
        return inv_rigid(self.cam_from_world)

    @property
    def center(self) -> np.ndarray:
        """Camera center in world coordinates."""
        return self.world_from_cam[:3, 3]

    def project(self, points_world: np.ndarray):
        """Project (N, 3) world points to (N, 2) pixels and (N,) camera depth."""
        pc = apply_transform(self.cam_from_world, points_world)
        pc = np.atleast_2d(pc)
        z = pc[:, 2]
        with np.errstate(divide="ignore", invalid="ignore"):
            u = self.fx * pc[:, 0] / z + self.cx
            v = self.fy * pc[:, 1] / z + self.cy
        return np.stack([u, v], axis=1), z

    def unproject(self, pixels: np.ndarray, depth: np.ndarray) -> np.ndarray:
        """Lift (N, 2) pixels at (N,) camera depths back to world points."""
        px = np.atleast_2d(np.asarray(pixels, dtype=float))
        z = np.asarray(depth, dtype=float).reshape(-1)
        x = (px[:, 0] - self.cx) / self.fx * z
        y = (px[:, 1] - self.cy) / self.fy * z
        return apply_transform(self.world_from_cam, np.stack([x, y, z], axis=1))

    def pixel_rays(self):
        """Per-pixel unit ray directions in world frame, shape (H, W, 3)."""
        u, v = np.meshgrid(np.arange(self.width) + 0.5, np.arange(self.height) + 0.5)
        x = (u - self.cx) / self.fx
        y = (v - self.cy) / self.fy
        dirs_cam = np.stack([x, y, np.ones_like(x)], axis=-1)
        R = self.world_from_cam[:3, :3]
        dirs = dirs_cam @ R.T
        return dirs / np.linalg.norm(dirs, axis=-1, keepdims=True)

    def with_pose(self, cam_from_world: np.ndarray) -> "Camera":
        return Camera(self.width, self.height, self.fx, self.fy, self.cx, self.cy,
                      np.asarray(cam_from_world, dtype=float))


def default_camera(width: int = 320, height: int = 240, fov_deg: float = 60.0,
                   cam_from_world: np.ndarray | None = None) -> Camera:
    """Camera with a given horizontal field of view, centered principal point."""
    f = width / (2.0 * np.tan(np.radians(fov_deg) / 2.0))
    if cam_from_world is None:
        cam_from_world = np.eye(4)
    return Camera(width, height, f, f, width / 2.0, height / 2.0, cam_from_world)
