"""Scenario files: declarative two-site runs on synthetic fixtures.

A scenario is YAML (units meters / milliseconds) describing screen geometry,
per-site hand trajectories, viewpoints, capture rigs, channel models, and
parameter overrides. See README for the schema.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import yaml

from .calib import ScreenGeometry, Viewpoint
from .fusion import FusionParams
from .geometry import Camera, default_camera, look_at
from .raster import TexturedMesh, checker_texture, textured_plane
from .skeleton import HandSkeleton, pose_from_tracker, template_joints
from .touch import TouchParams


class ScenarioError(ValueError):
    """Scenario validation failure; message carries the offending field path."""


@dataclass(frozen=True)
class ChannelModel:
    """Simulated stream transport: fixed latency, uniform jitter, drops."""

    base_latency_ms: float = 0.0
    jitter_ms: float = 0.0
    drop_rate: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.base_latency_ms < 0 or self.jitter_ms < 0:
            raise ScenarioError("channel latency and jitter must be >= 0")
        if not (0 <= self.drop_rate < 1):
            raise ScenarioError("drop_rate must be in [0, 1)")


#: Default end-to-end stream latencies (milliseconds).
PORTRAIT_LATENCY_MS = 400.0
SKELETON_LATENCY_MS = 250.0


@dataclass
class HandTrajectory:
    """Piecewise-linear (x, y, distance) path of a palm-parallel hand.

    Waypoints are (t_ms, x, y, d) with strictly increasing t; the pose holds
    at the endpoints outside the keyframed range.
    """

    waypoints: list[tuple[float, float, float, float]]

    def __post_init__(self):
        if not self.waypoints:
            raise ScenarioError("hand trajectory needs at least one waypoint")
        ts = [w[0] for w in self.waypoints]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ScenarioError("waypoint timestamps must be strictly increasing")

    def sample(self, t_ms: float) -> tuple[float, float, float]:
        wp = self.waypoints
        if t_ms <= wp[0][0]:
            return wp[0][1:]
        if t_ms >= wp[-1][0]:
            return wp[-1][1:]
        for (t0, *a), (t1, *b) in zip(wp, wp[1:]):
            if t0 <= t_ms <= t1:
                f = (t_ms - t0) / (t1 - t0)
                return tuple((1 - f) * np.array(a) + f * np.array(b))
        raise AssertionError("unreachable")

    def joints_at(self, t_ms: float) -> np.ndarray:
        """Template hand moved rigidly: palm parallel to the screen at the
        sampled (x, y) with every joint at the sampled distance."""
        x, y, d = self.sample(t_ms)
        tmpl = template_joints()
        center = tmpl[:, :2].mean(axis=0)
        joints = tmpl.copy()
        joints[:, 0] += x - center[0]
        joints[:, 1] += y - center[1]
        joints[:, 2] = d
        return joints

    def skeleton_at(self, t_ms: float) -> HandSkeleton:
        return pose_from_tracker(self.joints_at(t_ms), int(round(t_ms)))


@dataclass
class RigSpec:
    """Capture cameras plus the static scene they film (body stand-in etc.)."""

    cameras: list[Camera]
    scene: list[TexturedMesh]


def default_rig(screen: ScreenGeometry, width: int = 160, height: int = 120,
                camera_count: int = 4) -> RigSpec:
    """Cameras near the screen corners (and edge midpoints for 6), aimed at
    the seated user, watching a textured body plane at 0.75 m."""
    hw, hh = screen.width / 2 * 0.85, screen.height / 2 * 0.85
    spots = [(-hw, -hh), (hw, -hh), (-hw, hh), (hw, hh), (0.0, hh), (0.0, -hh)]
    cams = []
    for x, y in spots[:camera_count]:
        pose = look_at((x, y, 0.02), (0.0, 0.0, 0.65))
        cams.append(default_camera(width, height, 70.0, pose))
    body = textured_plane((0.0, 0.0, 0.75), (1, 0, 0), (0, 1, 0), 0.30, 0.40,
                          checker_texture(64, 8, (0.75, 0.62, 0.55), (0.55, 0.42, 0.38)))
    return RigSpec(cams, [body])


@dataclass
class SiteConfig:
    viewpoint: Viewpoint
    hand: HandTrajectory
    rig: RigSpec


@dataclass
class Scenario:
    duration_ms: int
    sites: dict[str, SiteConfig]
    screen: ScreenGeometry = field(default_factory=ScreenGeometry)
    fusion: FusionParams = field(default_factory=FusionParams)
    touch: TouchParams = field(default_factory=TouchParams)
    portrait_channel: ChannelModel = field(
        default_factory=lambda: ChannelModel(PORTRAIT_LATENCY_MS))
    skeleton_channel: ChannelModel = field(
        default_factory=lambda: ChannelModel(SKELETON_LATENCY_MS))
    seed: int = 0
    render_size: tuple[int, int] = (160, 120)
    background: tuple[float, float, float] = (0.1, 0.12, 0.18)
    appearance_min_pixels: int = 2000

    def __post_init__(self):
        if self.duration_ms <= 0:
            raise ScenarioError("duration_ms must be positive")
        if set(self.sites) != {"A", "B"}:
            raise ScenarioError("sites: exactly sites 'A' and 'B' are required")


def high_five_scenario(duration_ms: int = 2500, approach_ms: int = 2000,
                       start_d: float = 0.5, seed: int = 0,
                       one_sided: bool = False) -> Scenario:
    """Canonical fixture: both hands approach the screen center and hold."""
    def traj(moving: bool) -> HandTrajectory:
        if moving:
            return HandTrajectory([(0.0, 0.0, 0.0, start_d),
                                   (float(approach_ms), 0.0, 0.0, 0.0)])
        return HandTrajectory([(0.0, 0.0, 0.0, start_d)])

    screen = ScreenGeometry()
    sites = {}
    for name, moving in (("A", True), ("B", not one_sided)):
        sites[name] = SiteConfig(Viewpoint(np.array([0.0, 0.0, 0.7])),
                                 traj(moving), default_rig(screen))
    return Scenario(duration_ms, sites, screen=screen, seed=seed)


# ---------------------------------------------------------------------------
# YAML loading
# ---------------------------------------------------------------------------

def _get(mapping, key, path, default=None, required=False):
    if key not in mapping:
        if required:
            raise ScenarioError(f"{path}.{key}: missing required field")
        return default
    return mapping[key]


def _parse_channel(d, path, default_latency) -> ChannelModel:
    if d is None:
        return ChannelModel(default_latency)
    try:
        return ChannelModel(float(d.get("base_latency_ms", default_latency)),
                            float(d.get("jitter_ms", 0.0)),
                            float(d.get("drop_rate", 0.0)),
                            int(d.get("seed", 0)))
    except ScenarioError:
        raise
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"{path}: {exc}") from exc


def _parse_trajectory(d, path) -> HandTrajectory:
    kind = _get(d, "kind", path, default="waypoints")
    if kind == "approach":
        for f in ("start_distance", "end_distance", "end_ms"):
            _get(d, f, path, required=True)
        x = float(d.get("x", 0.0))
        y = float(d.get("y", 0.0))
        wps = [(float(d.get("start_ms", 0)), x, y, float(d["start_distance"])),
               (float(d["end_ms"]), x, y, float(d["end_distance"]))]
        return HandTrajectory(wps)
    if kind == "waypoints":
        raw = _get(d, "waypoints", path, required=True)
        try:
            return HandTrajectory([tuple(float(v) for v in w) for w in raw])
        except (TypeError, ValueError) as exc:
            raise ScenarioError(f"{path}.waypoints: {exc}") from exc
    raise ScenarioError(f"{path}.kind: unknown trajectory kind '{kind}'")


def _parse_rig(d, path, screen, render_size) -> RigSpec:
    if d is None or d == "default":
        return default_rig(screen, *render_size)
    cams = []
    for i, c in enumerate(_get(d, "cameras", path, required=True)):
        pose = look_at(c["position"], c.get("look_at", (0.0, 0.0, 0.65)))
        cams.append(default_camera(int(c.get("width", render_size[0])),
                                   int(c.get("height", render_size[1])),
                                   float(c.get("fov_deg", 70.0)), pose))
    scene = []
    for i, s in enumerate(d.get("scene", [])):
        spath = f"{path}.scene[{i}]"
        if s.get("kind", "plane") != "plane":
            raise ScenarioError(f"{spath}.kind: only 'plane' primitives supported")
        tex = checker_texture() if s.get("texture", "checker") == "checker" \
            else np.full((8, 8, 3), np.asarray(s["texture"], dtype=float))
        scene.append(textured_plane(s["center"], s.get("axis_u", (1, 0, 0)),
                                    s.get("axis_v", (0, 1, 0)),
                                    float(s.get("half_u", 0.3)),
                                    float(s.get("half_v", 0.3)), tex))
    if not scene:
        scene = default_rig(screen, *render_size).scene
    return RigSpec(cams, scene)


def load_scenario(path) -> Scenario:
    with open(path) as fh:
        data = yaml.safe_load(fh)
    if not isinstance(data, dict):
        raise ScenarioError("scenario file must be a mapping")
    duration = int(_get(data, "duration_ms", "scenario", required=True))
    scr = data.get("screen") or {}
    screen = ScreenGeometry(float(scr.get("width", 1.439)),
                            float(scr.get("height", 0.809)))
    render_size = tuple(int(x) for x in data.get("resolution", (160, 120)))
    fus = data.get("fusion") or {}
    fusion = FusionParams(float(fus.get("d_min", 0.2)), float(fus.get("d_max", 0.4)))
    tch = data.get("touch") or {}
    touch = TouchParams(float(tch.get("joint_screen_threshold", 0.02)),
                        float(tch.get("overlap_area_threshold", 50.0)),
                        int(tch.get("refractory_ms", 500)))
    channels = data.get("channels") or {}
    sites_raw = _get(data, "sites", "scenario", required=True)
    sites = {}
    for name in ("A", "B"):
        if name not in sites_raw:
            raise ScenarioError(f"sites.{name}: missing site")
        sd = sites_raw[name]
        spath = f"sites.{name}"
        vp = np.asarray(_get(sd, "viewpoint", spath, default=(0.0, 0.0, 0.7)),
                        dtype=float)
        hand = _parse_trajectory(_get(sd, "hand", spath, required=True),
                                 f"{spath}.hand")
        rig = _parse_rig(sd.get("rig"), f"{spath}.rig", screen, render_size)
        sites[name] = SiteConfig(Viewpoint(vp), hand, rig)
    return Scenario(
        duration_ms=duration,
        sites=sites,
        screen=screen,
        fusion=fusion,
        touch=touch,
        portrait_channel=_parse_channel(channels.get("portrait"),
                                        "channels.portrait", PORTRAIT_LATENCY_MS),
        skeleton_channel=_parse_channel(channels.get("skeleton"),
                                        "channels.skeleton", SKELETON_LATENCY_MS),
        seed=int(data.get("seed", 0)),
        render_size=render_size,
        background=tuple(float(x) for x in data.get("background", (0.1, 0.12, 0.18))),
        appearance_min_pixels=int(data.get("appearance_min_pixels", 2000)),
    )
