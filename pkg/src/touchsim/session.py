"""Two-site sender/receiver pipeline on a deterministic discrete-event clock.

Each site samples its scenario fixtures (portrait at 30 Hz, skeleton at
50 Hz), ships messages through seeded channel models, and runs the receiver
side: closest-timestamp pairing, mesh rigging with shape/appearance
adaptation, distance fusion, background composition, and mutual-touch
detection at 50 Hz. Every run yields a bit-reproducible trace.
"""
from __future__ import annotations

import hashlib
import heapq
import json
from dataclasses import dataclass, field

import numpy as np

from . import appearance, fusion, lumigraph, touch
from .calib import (SiteTransform, Viewpoint,
                    build_global_space, remote_target_camera)
from .geometry import Camera, apply_transform, default_camera, look_at
from .imaging import LayerImage
from .mesh import RiggedHandMesh, adapt_shape, default_hand_mesh, skin_vertices
from .raster import TexturedMesh, render_meshes
from .scenario import ChannelModel, Scenario, SiteConfig
from .skeleton import (HandSkeleton, compute_bone_scales, template_skeleton,
                       update_bind_transforms)
from .wire import (KIND_PORTRAIT, KIND_SKELETON, KIND_TOUCH, KIND_VIEWPOINT,
                   KIND_NAMES, SiteFrameMessage)

PORTRAIT_HZ = 30
SKELETON_HZ = 50
DETECT_HZ = 50
FUSE_HZ = 30

SITE_IDS = {"A": 0, "B": 1}
SITE_NAMES = {v: k for k, v in SITE_IDS.items()}


def cadence_times(hz: int, duration_ms: int) -> list[int]:
    """Tick timestamps {floor(k * 1000 / hz)} within [0, duration)."""
    out = []
    k = 0
    while True:
        t = (k * 1000) // hz
        if t >= duration_ms:
            return out
        out.append(t)
        k += 1


def pick_closest(timestamps: list[int], target: int) -> int | None:
    """Index of the timestamp closest to target; ties go to the earlier one."""
    if not timestamps:
        return None
    best = 0
    for i, t in enumerate(timestamps[1:], start=1):
        if abs(t - target) < abs(timestamps[best] - target):
            best = i
    return best


class Channel:
    """Seeded transport simulating one stream's latency/jitter/drops."""

    def __init__(self, model: ChannelModel, stream_seed: int):
        self.model = model
        self.rng = np.random.default_rng((model.seed, stream_seed))

    def arrival_time(self, send_ms: int) -> int | None:
        """Scheduled delivery time, or None if the message is dropped."""
        if self.model.drop_rate > 0 and self.rng.random() < self.model.drop_rate:
            return None
        jitter = 0.0
        if self.model.jitter_ms > 0:
            jitter = self.rng.uniform(-self.model.jitter_ms, self.model.jitter_ms)
        return int(round(send_ms + self.model.base_latency_ms + jitter))


def frame_hash(rgb: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(rgb, dtype="<f8").tobytes()).hexdigest()[:16]


@dataclass
class SessionTrace:
    records: list[dict] = field(default_factory=list)

    def add(self, **record):
        self.records.append(record)

    def of_type(self, rtype: str, site: str | None = None) -> list[dict]:
        return [r for r in self.records
                if r["type"] == rtype and (site is None or r.get("site") == site)]

    def touch_events(self, site: str | None = None) -> list[dict]:
        return self.of_type("touch", site)

    def to_jsonl(self) -> str:
        return "\n".join(json.dumps(r) for r in self.records) + "\n"

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_jsonl())

    def hash(self) -> str:
        return hashlib.sha256(self.to_jsonl().encode()).hexdigest()


@dataclass
class ReceiverResult:
    frame: np.ndarray
    d: float | None
    alpha_g: float
    portrait_ts: int
    skeleton_ts: int | None


class SiteState:
    """Everything one site owns: fixtures, outboxes, receive buffers,
    adaptation state, and the touch detector."""

    def __init__(self, name: str, config: SiteConfig, scenario: Scenario,
                 transform: SiteTransform, remote_transform: SiteTransform):
        self.name = name
        self.site_id = SITE_IDS[name]
        self.config = config
        self.scenario = scenario
        self.transform = transform
        self.remote_transform = remote_transform
        self.seq = 0
        self.remote_viewpoint: Viewpoint | None = None
        self.portraits: list[SiteFrameMessage] = []
        self.skeletons: list[SiteFrameMessage] = []
        self.max_seq: dict[int, int] = {}
        self.detector = touch.TouchDetector(scenario.screen, scenario.touch)
        self.actuator = touch.HapticActuator()
        self.template_mesh = default_hand_mesh()
        self.adapted_mesh: RiggedHandMesh | None = None
        self.color_transform: appearance.ColorTransform | None = None
        self.last_frame: np.ndarray | None = None

    def next_seq(self) -> int:
        self.seq += 1
        return self.seq

    def default_target_camera(self, width: int, height: int) -> Camera:
        pose = look_at((0.0, 0.0, -0.7), (0.0, 0.0, 0.65))
        return default_camera(width, height, 60.0, pose)

    def target_camera(self) -> Camera:
        w, h = self.scenario.render_size
        if self.remote_viewpoint is None:
            return self.default_target_camera(w, h)
        # The remote viewpoint arrives in the remote site frame; map it here.
        return remote_target_camera(self.remote_viewpoint, self.remote_transform,
                                    self.transform, self.scenario.screen,
                                    width=w, height=h)

    def remote_to_local(self) -> np.ndarray:
        return self.transform.global_to_site @ self.remote_transform.site_to_global

    def map_remote_skeleton(self, sk: HandSkeleton) -> HandSkeleton:
        M = self.remote_to_local()
        transforms = np.einsum("ij,bjk->bik", M, sk.bone_transforms)
        return HandSkeleton(apply_transform(M, sk.joints), sk.bones, transforms,
                            sk.timestamp_ms)


class Session:
    """Deterministic two-site simulation over a shared clock."""

    def __init__(self, scenario: Scenario, trace: SessionTrace | None = None):
        self.scenario = scenario
        self.trace = trace if trace is not None else SessionTrace()
        ta, tb = build_global_space(scenario.screen, scenario.screen)
        self.sites = {
            "A": SiteState("A", scenario.sites["A"], scenario, ta, tb),
            "B": SiteState("B", scenario.sites["B"], scenario, tb, ta),
        }
        base = scenario.seed * 1000
        self.channels = {
            (name, KIND_PORTRAIT): Channel(scenario.portrait_channel,
                                           base + 10 + SITE_IDS[name])
            for name in self.sites
        }
        for name in self.sites:
            sk_chan = Channel(scenario.skeleton_channel, base + 20 + SITE_IDS[name])
            self.channels[(name, KIND_SKELETON)] = sk_chan
            self.channels[(name, KIND_VIEWPOINT)] = sk_chan
            self.channels[(name, KIND_TOUCH)] = sk_chan

    # -- sender ------------------------------------------------------------

    def capture_frames(self, site: SiteState, now_ms: int) -> lumigraph.CaptureRig:
        """Synthetic RGBD capture: rasterize scene + posed local hand per camera."""
        joints = site.config.hand.joints_at(now_ms)
        pose = site.config.hand.skeleton_at(now_ms)
        posed = skin_vertices(site.template_mesh, pose)
        hand = TexturedMesh(posed, site.template_mesh.faces,
                            site.template_mesh.uvs, site.template_mesh.texture)
        meshes = site.config.rig.scene + [hand]
        d_local = float(np.mean(np.abs(joints[:, 2])))
        rig = lumigraph.CaptureRig(site.config.rig.cameras)
        if d_local <= self.scenario.fusion.d_max:
            rig = lumigraph.select_cameras(rig, float(np.mean(joints[:, 0])))
        frames = [render_meshes(meshes, cam) for cam in rig.cameras]
        return rig.with_frames(frames)

    def sender_step(self, site_name: str, now_ms: int,
                    kinds: tuple[int, ...] = (KIND_PORTRAIT,)) -> list[SiteFrameMessage]:
        """Produce this tick's outgoing messages for one site."""
        site = self.sites[site_name]
        out = []
        if KIND_VIEWPOINT in kinds:
            out.append(SiteFrameMessage(site.site_id, KIND_VIEWPOINT, now_ms,
                                        site.next_seq(), site.config.viewpoint))
        if KIND_SKELETON in kinds:
            sk = site.config.hand.skeleton_at(now_ms)
            out.append(SiteFrameMessage(site.site_id, KIND_SKELETON, now_ms,
                                        site.next_seq(), sk))
        if KIND_PORTRAIT in kinds:
            rig = self.capture_frames(site, now_ms)
            portrait = lumigraph.render_portrait(rig, site.target_camera())
            out.append(SiteFrameMessage(site.site_id, KIND_PORTRAIT, now_ms,
                                        site.next_seq(), portrait))
        return out

    # -- receiver ----------------------------------------------------------

    def deliver(self, dest: str, msg: SiteFrameMessage, now_ms: int):
        """Buffer an arriving message, enforcing per-stream order by seq."""
        site = self.sites[dest]
        key = msg.kind
        if site.max_seq.get(key, -1) >= msg.seq:
            self.trace.add(type="discard", t=now_ms, site=dest,
                           kind=KIND_NAMES[msg.kind], seq=msg.seq)
            return
        site.max_seq[key] = msg.seq
        if msg.kind == KIND_PORTRAIT:
            site.portraits.append(msg)
            site.portraits = site.portraits[-30:]
        elif msg.kind == KIND_SKELETON:
            site.skeletons.append(msg)
            site.skeletons = site.skeletons[-60:]
        elif msg.kind == KIND_VIEWPOINT:
            site.remote_viewpoint = msg.payload
        self.trace.add(type="deliver", t=now_ms, site=dest,
                       kind=KIND_NAMES[msg.kind], ts=msg.timestamp_ms, seq=msg.seq)

    def _ensure_adapted_mesh(self, site: SiteState, remote_sk: HandSkeleton):
        if site.adapted_mesh is not None:
            return
        tmpl = template_skeleton()
        scales = compute_bone_scales(tmpl, remote_sk)
        binds = update_bind_transforms(tmpl, scales)
        site.adapted_mesh = adapt_shape(site.template_mesh, scales, binds)

    def _maybe_adapt_appearance(self, site: SiteState, portrait: LayerImage,
                                mesh_layer: LayerImage, now_ms: int):
        if site.color_transform is not None:
            return
        mask = appearance.hand_region_mask(portrait.depth, mesh_layer.depth)
        if mask.sum() < max(self.scenario.appearance_min_pixels,
                            appearance.MIN_MASK_PIXELS):
            return
        try:
            ct = appearance.fit_color_transform(portrait.rgb, mesh_layer.rgb, mask)
        except appearance.AppearanceError:
            return
        site.color_transform = ct
        assert site.adapted_mesh is not None
        site.adapted_mesh = site.adapted_mesh.with_texture(
            appearance.apply_to_texture(site.adapted_mesh.texture, ct))
        self.trace.add(type="appearance_adapted", t=now_ms, site=site.name,
                       mask_pixels=int(mask.sum()),
                       gains=[round(float(g), 6) for g in ct.gain])

    def render_mesh_layer(self, site: SiteState, remote_local: HandSkeleton,
                          camera: Camera) -> LayerImage:
        mesh = site.adapted_mesh if site.adapted_mesh is not None else site.template_mesh
        posed = skin_vertices(mesh, remote_local)
        return render_meshes([TexturedMesh(posed, mesh.faces, mesh.uvs,
                                           mesh.texture)], camera)

    def receiver_step(self, site_name: str, now_ms: int) -> "ReceiverResult | None":
        """Fuse the freshest portrait with the closest-timestamp skeleton."""
        site = self.sites[site_name]
        bg_color = np.asarray(self.scenario.background, dtype=float)
        if not site.portraits:
            self.trace.add(type="frame", t=now_ms, site=site_name, stale=True,
                           hash=None if site.last_frame is None
                           else frame_hash(site.last_frame))
            return None
        portrait_msg = max(site.portraits, key=lambda m: m.timestamp_ms)
        portrait: LayerImage = portrait_msg.payload
        background = np.broadcast_to(bg_color, portrait.rgb.shape)

        idx = pick_closest([m.timestamp_ms for m in site.skeletons],
                           portrait_msg.timestamp_ms)
        if idx is None:
            final = fusion.compose_background(portrait, background)
            d_val, alpha_g, sk_ts = None, 0.0, None
        else:
            sk_msg = site.skeletons[idx]
            remote_sk: HandSkeleton = sk_msg.payload
            self._ensure_adapted_mesh(site, remote_sk)
            remote_local = site.map_remote_skeleton(remote_sk)
            mesh_layer = self.render_mesh_layer(site, remote_local, portrait.camera)
            self._maybe_adapt_appearance(site, portrait, mesh_layer, now_ms)
            dist = fusion.hand_distance(remote_local, params=self.scenario.fusion,
                                        unsigned=True)
            final, _, alpha_g = fusion.fuse_frame(portrait, mesh_layer, dist,
                                                  self.scenario.fusion, background)
            d_val, sk_ts = dist.d, sk_msg.timestamp_ms
        site.last_frame = final
        self.trace.add(type="frame", t=now_ms, site=site_name, stale=False,
                       portrait_ts=portrait_msg.timestamp_ms, skeleton_ts=sk_ts,
                       d=None if d_val is None else round(d_val, 9),
                       alpha_g=round(float(alpha_g), 9), hash=frame_hash(final))
        return ReceiverResult(final, d_val, float(alpha_g),
                              portrait_msg.timestamp_ms, sk_ts)

    def detect_step(self, site_name: str, now_ms: int) -> touch.TouchEvent | None:
        site = self.sites[site_name]
        if not site.skeletons:
            return None
        local_sk = site.config.hand.skeleton_at(now_ms)
        idx = pick_closest([m.timestamp_ms for m in site.skeletons], now_ms)
        remote_local = site.map_remote_skeleton(site.skeletons[idx].payload)
        event = site.detector.detect(local_sk, remote_local, now_ms)
        if event is not None:
            entry = touch.trigger_haptic(event, site.actuator)
            self.trace.add(type="touch", t=now_ms, site=site_name,
                           overlap_cm2=round(event.overlap_area_cm2, 6),
                           remote_ts=site.skeletons[idx].timestamp_ms)
            self.trace.add(type="haptic", t=now_ms, site=site_name,
                           scheduled_ms=entry[0], duration_ms=entry[1])
        return event


# Event ordering at equal timestamps: deliveries first, then capture ticks,
# then fuse/detect, so a tick never consumes data "from the future".
_PRIO_DELIVER = 0
_PRIO_SEND = 1
_PRIO_FUSE = 2
_PRIO_DETECT = 3


def run_scenario(scenario: Scenario) -> SessionTrace:
    """Execute both sites to scenario end; returns the deterministic trace."""
    session = Session(scenario)
    trace = session.trace
    heap: list[tuple[int, int, int, tuple]] = []
    counter = 0

    def push(t: int, prio: int, item: tuple):
        nonlocal counter
        heapq.heappush(heap, (t, prio, counter, item))
        counter += 1

    for name in ("A", "B"):
        for t in cadence_times(PORTRAIT_HZ, scenario.duration_ms):
            push(t, _PRIO_SEND, ("send_portrait", name))
            push(t, _PRIO_FUSE, ("fuse", name))
        for t in cadence_times(SKELETON_HZ, scenario.duration_ms):
            push(t, _PRIO_SEND, ("send_skeleton", name))
            push(t, _PRIO_DETECT, ("detect", name))

    other = {"A": "B", "B": "A"}
    while heap:
        t, _prio, _c, item = heapq.heappop(heap)
        tag = item[0]
        if tag == "deliver":
            _, dest, msg = item
            session.deliver(dest, msg, t)
        elif tag in ("send_portrait", "send_skeleton"):
            name = item[1]
            kinds = (KIND_PORTRAIT,) if tag == "send_portrait" else (KIND_SKELETON,)
            if tag == "send_skeleton" and t == 0:
                kinds = (KIND_VIEWPOINT, KIND_SKELETON)
            for msg in session.sender_step(name, t, kinds):
                trace.add(type="send", t=t, site=name, kind=KIND_NAMES[msg.kind],
                          seq=msg.seq)
                arrival = session.channels[(name, msg.kind)].arrival_time(t)
                if arrival is None:
                    trace.add(type="drop", t=t, site=name,
                              kind=KIND_NAMES[msg.kind], seq=msg.seq)
                else:
                    push(arrival, _PRIO_DELIVER, ("deliver", other[name], msg))
        elif tag == "fuse":
            session.receiver_step(item[1], t)
        elif tag == "detect":
            session.detect_step(item[1], t)
    return trace
