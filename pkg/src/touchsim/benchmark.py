"""Receiver-frame benchmark: mesh render + fusion + composition + detection."""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import fusion
from .calib import ScreenGeometry
from .geometry import default_camera, look_at
from .mesh import build_template_hand, skin_vertices
from .raster import TexturedMesh, render_meshes, textured_plane, checker_texture
from .scenario import HandTrajectory
from .touch import TouchDetector, TouchParams


@dataclass
class BenchmarkResult:
    frame_count: int
    median_ms: float
    mean_ms: float
    p95_ms: float

    def summary(self) -> str:
        return (f"{self.frame_count} frames: median {self.median_ms:.2f} ms, "
                f"mean {self.mean_ms:.2f} ms, p95 {self.p95_ms:.2f} ms")


def run_receiver_benchmark(frames: int = 300, width: int = 320,
                           height: int = 240) -> BenchmarkResult:
    """Time the per-frame receiver work at desk resolution.

    The portrait layer is a fixed pre-rendered input (it arrives over the
    wire in deployment); the measured loop is mesh skinning + rasterization,
    distance fusion, background composition, and touch detection.
    """
    camera = default_camera(width, height, 60.0,
                            look_at((0.0, 0.0, -0.7), (0.0, 0.0, 0.5)))
    body = textured_plane((0.0, 0.0, 0.7), (1, 0, 0), (0, 1, 0), 0.3, 0.4,
                          checker_texture(64, 8, (0.7, 0.6, 0.55), (0.5, 0.42, 0.4)))
    portrait = render_meshes([body], camera)
    background = np.full((height, width, 3), 0.1)
    mesh = build_template_hand()
    screen = ScreenGeometry()
    detector = TouchDetector(screen, TouchParams())
    params = fusion.FusionParams()
    traj = HandTrajectory([(0.0, 0.0, 0.0, 0.45), (10_000.0, 0.0, 0.0, 0.0)])

    # Warm up JIT-compiled kernels outside the timed region.
    warm = traj.skeleton_at(0)
    render_meshes([TexturedMesh(skin_vertices(mesh, warm), mesh.faces,
                                mesh.uvs, mesh.texture)], camera)

    times = np.empty(frames)
    for i in range(frames):
        t_ms = (i * 1000) // 30
        local = traj.skeleton_at(t_ms)
        remote = traj.skeleton_at(t_ms)
        start = time.perf_counter()
        posed = skin_vertices(mesh, remote)
        layer = render_meshes([TexturedMesh(posed, mesh.faces, mesh.uvs,
                                            mesh.texture)], camera)
        dist = fusion.hand_distance(remote, params=params)
        fusion.fuse_frame(portrait, layer, dist, params, background)
        detector.detect(local, remote, t_ms)
        times[i] = (time.perf_counter() - start) * 1000.0
    return BenchmarkResult(frames, float(np.median(times)), float(np.mean(times)),
                           float(np.percentile(times, 95)))
