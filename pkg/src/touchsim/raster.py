"""Software triangle rasterizer (numba) and synthetic capture scenes.

Renders textured triangle meshes into RGB + alpha + z-buffer rasters. This
backs both the mesh-hand layer on the receiver and the synthetic RGBD
"camera" fixtures that replace real sensors.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .geometry import Camera, apply_transform
from .imaging import LayerImage

_NEAR = 1e-4


@njit(cache=True)
def _raster_kernel(verts, faces, uvs, texture, color_buf, depth_buf, alpha_buf):
    """Z-buffered rasterization of screen-space triangles.

    verts: (N, 3) with (u_px, v_px, camera_depth); depth <= _NEAR culls.
    Barycentric interpolation is affine in screen space, which is adequate
    for the small triangles this renderer sees.
    """
    h, w = depth_buf.shape
    th, tw = texture.shape[0], texture.shape[1]
    for f in range(faces.shape[0]):
        i0, i1, i2 = faces[f, 0], faces[f, 1], faces[f, 2]
        z0, z1, z2 = verts[i0, 2], verts[i1, 2], verts[i2, 2]
        if z0 <= _NEAR or z1 <= _NEAR or z2 <= _NEAR:
            continue
        x0, y0 = verts[i0, 0], verts[i0, 1]
        x1, y1 = verts[i1, 0], verts[i1, 1]
        x2, y2 = verts[i2, 0], verts[i2, 1]
        xmin = int(max(0.0, np.floor(min(x0, min(x1, x2)))))
        xmax = int(min(w - 1.0, np.ceil(max(x0, max(x1, x2)))))
        ymin = int(max(0.0, np.floor(min(y0, min(y1, y2)))))
        ymax = int(min(h - 1.0, np.ceil(max(y0, max(y1, y2)))))
        if xmin > xmax or ymin > ymax:
            continue
        area = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0)
        if abs(area) < 1e-12:
            continue
        inv_area = 1.0 / area
        for py in range(ymin, ymax + 1):
            cy = py + 0.5
            for px in range(xmin, xmax + 1):
                cx = px + 0.5
                w0 = ((x1 - cx) * (y2 - cy) - (x2 - cx) * (y1 - cy)) * inv_area
                w1 = ((x2 - cx) * (y0 - cy) - (x0 - cx) * (y2 - cy)) * inv_area
                w2 = 1.0 - w0 - w1
                if w0 < 0.0 or w1 < 0.0 or w2 < 0.0:
                    continue
                z = w0 * z0 + w1 * z1 + w2 * z2
                if alpha_buf[py, px] > 0.0 and z >= depth_buf[py, px]:
                    continue
                u = w0 * uvs[i0, 0] + w1 * uvs[i1, 0] + w2 * uvs[i2, 0]
                v = w0 * uvs[i0, 1] + w1 * uvs[i1, 1] + w2 * uvs[i2, 1]
                tx = int(u * tw)
                ty = int(v * th)
                if tx < 0:
                    tx = 0
                elif tx >= tw:
                    tx = tw - 1
                if ty < 0:
                    ty = 0
                elif ty >= th:
                    ty = th - 1
                color_buf[py, px, 0] = texture[ty, tx, 0]
                color_buf[py, px, 1] = texture[ty, tx, 1]
                color_buf[py, px, 2] = texture[ty, tx, 2]
                depth_buf[py, px] = z
                alpha_buf[py, px] = 1.0


@dataclass
class TexturedMesh:
    """A renderable triangle mesh in world coordinates."""

    vertices: np.ndarray  # (N, 3)
    faces: np.ndarray     # (M, 3) int
    uvs: np.ndarray       # (N, 2)
    texture: np.ndarray   # (th, tw, 3)

    def __post_init__(self):
        self.vertices = np.ascontiguousarray(self.vertices, dtype=np.float64)
        self.faces = np.ascontiguousarray(self.faces, dtype=np.int64)
        self.uvs = np.ascontiguousarray(self.uvs, dtype=np.float64)
        self.texture = np.ascontiguousarray(self.texture, dtype=np.float64)


def textured_plane(center, axis_u, axis_v, half_u: float, half_v: float,
                   texture: np.ndarray) -> TexturedMesh:
    """Rectangle spanned by two axes, split into two triangles."""
    c = np.asarray(center, dtype=float)
    au = np.asarray(axis_u, dtype=float) * half_u
    av = np.asarray(axis_v, dtype=float) * half_v
    verts = np.array([c - au - av, c + au - av, c + au + av, c - au + av])
    faces = np.array([[0, 1, 2], [0, 2, 3]])
    uvs = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    return TexturedMesh(verts, faces, uvs, np.asarray(texture, dtype=float))


def checker_texture(size: int = 64, tiles: int = 8,
                    a=(0.85, 0.85, 0.85), b=(0.25, 0.35, 0.55)) -> np.ndarray:
    ii, jj = np.meshgrid(np.arange(size), np.arange(size), indexing="ij")
    mask = ((ii * tiles // size) + (jj * tiles // size)) % 2 == 0
    tex = np.where(mask[..., None], np.asarray(a, dtype=float), np.asarray(b, dtype=float))
    return tex


def render_meshes(meshes: list[TexturedMesh], camera: Camera) -> LayerImage:
    """Render meshes into a fresh layer; alpha is 1 where any geometry covers."""
    h, w = camera.height, camera.width
    color = np.zeros((h, w, 3))
    depth = np.zeros((h, w))
    alpha = np.zeros((h, w))
    for mesh in meshes:
        px, z = camera.project(mesh.vertices)
        verts = np.ascontiguousarray(np.concatenate([px, z[:, None]], axis=1))
        _raster_kernel(verts, mesh.faces, mesh.uvs, mesh.texture,
                       color, depth, alpha)
    return LayerImage(color, alpha, depth, camera)


@dataclass
class Scene:
    """Static textured primitives plus an optional posed hand mesh."""

    primitives: list[TexturedMesh] = field(default_factory=list)

    def with_hand(self, posed_vertices: np.ndarray, faces, uvs,
                  texture) -> "Scene":
        hand = TexturedMesh(posed_vertices, faces, uvs, texture)
        return Scene(self.primitives + [hand])

    def render(self, camera: Camera) -> LayerImage:
        return render_meshes(self.primitives, camera)


def render_hand_layer(posed_vertices: np.ndarray, mesh_faces, mesh_uvs,
                      texture, camera: Camera) -> LayerImage:
    """Render a posed hand mesh alone (the geometry-based layer I_g, D_g)."""
    return render_meshes([TexturedMesh(posed_vertices, mesh_faces, mesh_uvs,
                                       np.asarray(texture, dtype=float))], camera)


def transform_mesh(mesh: TexturedMesh, T: np.ndarray) -> TexturedMesh:
    return TexturedMesh(apply_transform(T, mesh.vertices), mesh.faces,
                        mesh.uvs, mesh.texture)
