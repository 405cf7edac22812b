"""Binary message encoding for the inter-site streams and the serve endpoint.

Every frame is ``u32 LE payload length`` followed by the payload:

    u8 kind | u8 site_id | i64 timestamp_ms | u32 seq | kind-specific body

Kinds: 1 portrait_frame, 2 skeleton_frame, 3 viewpoint, 4 touch_event,
5 state_snapshot, 6 steering. Rasters travel zlib-compressed (color and
alpha quantized to u8, depth as float32). All integers little-endian.
"""
from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass

import numpy as np

from .calib import Viewpoint
from .geometry import Camera
from .imaging import LayerImage
from .skeleton import BONE_COUNT, JOINT_COUNT, HandSkeleton
from .touch import TouchEvent, Rect

PROTOCOL_VERSION = 1

KIND_PORTRAIT = 1
KIND_SKELETON = 2
KIND_VIEWPOINT = 3
KIND_TOUCH = 4
KIND_SNAPSHOT = 5
KIND_STEERING = 6

KIND_NAMES = {
    KIND_PORTRAIT: "portrait_frame",
    KIND_SKELETON: "skeleton_frame",
    KIND_VIEWPOINT: "viewpoint",
    KIND_TOUCH: "touch_event",
    KIND_SNAPSHOT: "state_snapshot",
    KIND_STEERING: "steering",
}


class WireError(ValueError):
    pass


@dataclass
class SiteFrameMessage:
    site_id: int          # 0 = site A, 1 = site B
    kind: int
    timestamp_ms: int
    seq: int
    payload: object


@dataclass
class SteeringInput:
    site_id: int
    x: float
    y: float
    distance: float
    timestamp_ms: int = 0


@dataclass
class SiteSnapshot:
    site_id: int
    frame_rgb: np.ndarray          # (H, W, 3) float in [0, 1]
    d: float
    alpha_g: float
    near_joint_count: int
    touch_event: TouchEvent | None
    haptic_active: bool


@dataclass
class StateSnapshot:
    now_ms: int
    sites: list[SiteSnapshot]


def _pack_blob(data: bytes) -> bytes:
    comp = zlib.compress(data, 6)
    return struct.pack("<I", len(comp)) + comp


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise WireError("truncated message")
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack("<" + fmt, self.take(struct.calcsize("<" + fmt)))

    def blob(self) -> bytes:
        (n,) = self.unpack("I")
        return zlib.decompress(self.take(n))


def _encode_camera(cam: Camera) -> bytes:
    ext = cam.cam_from_world[:3].reshape(-1)
    return struct.pack("<HH4f", cam.width, cam.height, cam.fx, cam.fy, cam.cx, cam.cy) \
        + struct.pack("<12f", *ext)


def _decode_camera(r: _Reader) -> Camera:
    w, h, fx, fy, cx, cy = r.unpack("HH4f")
    ext = np.eye(4)
    ext[:3] = np.array(r.unpack("12f")).reshape(3, 4)
    # Re-orthonormalize: float32 transport loosens the rigidity tolerance.
    u, _, vt = np.linalg.svd(ext[:3, :3])
    ext[:3, :3] = u @ vt
    return Camera(w, h, fx, fy, cx, cy, ext)


def _encode_rgb_u8(rgb: np.ndarray) -> bytes:
    q = (np.clip(rgb, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)
    return _pack_blob(q.tobytes())


def _encode_layer(layer: LayerImage) -> bytes:
    out = struct.pack("<HH", layer.width, layer.height)
    out += _encode_camera(layer.camera)
    out += _encode_rgb_u8(layer.rgb)
    out += _pack_blob((np.clip(layer.alpha, 0, 1) * 255.0 + 0.5).astype(np.uint8).tobytes())
    out += _pack_blob(layer.depth.astype("<f4").tobytes())
    return out


def _decode_layer(r: _Reader) -> LayerImage:
    w, h = r.unpack("HH")
    cam = _decode_camera(r)
    rgb = np.frombuffer(r.blob(), dtype=np.uint8).reshape(h, w, 3) / 255.0
    alpha = np.frombuffer(r.blob(), dtype=np.uint8).reshape(h, w) / 255.0
    depth = np.frombuffer(r.blob(), dtype="<f4").reshape(h, w).astype(float)
    return LayerImage(rgb, alpha, depth, cam)


def _encode_skeleton(sk: HandSkeleton) -> bytes:
    out = struct.pack("<B", JOINT_COUNT)
    out += sk.joints.astype("<f8").tobytes()
    out += struct.pack("<B", BONE_COUNT)
    out += sk.bone_transforms[:, :3, :].astype("<f8").tobytes()
    return out


def _decode_skeleton(r: _Reader, timestamp_ms: int) -> HandSkeleton:
    (nj,) = r.unpack("B")
    if nj != JOINT_COUNT:
        raise WireError(f"unexpected joint count {nj}")
    joints = np.frombuffer(r.take(nj * 3 * 8), dtype="<f8").reshape(nj, 3)
    (nb,) = r.unpack("B")
    if nb != BONE_COUNT:
        raise WireError(f"unexpected bone count {nb}")
    rows = np.frombuffer(r.take(nb * 12 * 8), dtype="<f8").reshape(nb, 3, 4)
    transforms = np.tile(np.eye(4), (nb, 1, 1))
    transforms[:, :3, :] = rows
    return HandSkeleton(joints.copy(), bone_transforms=transforms,
                        timestamp_ms=timestamp_ms)


def _encode_touch(ev: TouchEvent) -> bytes:
    return struct.pack("<q f 8d I", ev.timestamp_ms, ev.overlap_area_cm2,
                       ev.local_bbox.x0, ev.local_bbox.y0, ev.local_bbox.x1,
                       ev.local_bbox.y1, ev.remote_bbox.x0, ev.remote_bbox.y0,
                       ev.remote_bbox.x1, ev.remote_bbox.y1, ev.haptic_delay_ms)


def _decode_touch(r: _Reader) -> TouchEvent:
    vals = r.unpack("q f 8d I")
    return TouchEvent(vals[0], vals[1], Rect(*vals[2:6]), Rect(*vals[6:10]),
                      vals[10])


def encode_message(msg: SiteFrameMessage) -> bytes:
    header = struct.pack("<BBqI", msg.kind, msg.site_id, msg.timestamp_ms, msg.seq)
    if msg.kind == KIND_PORTRAIT:
        body = _encode_layer(msg.payload)
    elif msg.kind == KIND_SKELETON:
        body = _encode_skeleton(msg.payload)
    elif msg.kind == KIND_VIEWPOINT:
        body = struct.pack("<3d", *msg.payload.position)
    elif msg.kind == KIND_TOUCH:
        body = _encode_touch(msg.payload)
    elif msg.kind == KIND_SNAPSHOT:
        body = _encode_snapshot(msg.payload)
    elif msg.kind == KIND_STEERING:
        body = struct.pack("<B3d", msg.payload.site_id, msg.payload.x,
                           msg.payload.y, msg.payload.distance)
    else:
        raise WireError(f"unknown message kind {msg.kind}")
    payload = header + body
    return struct.pack("<I", len(payload)) + payload


def decode_message(frame: bytes) -> SiteFrameMessage:
    if len(frame) < 4:
        raise WireError("frame too short")
    (plen,) = struct.unpack("<I", frame[:4])
    if plen != len(frame) - 4:
        raise WireError("frame length mismatch")
    r = _Reader(frame[4:])
    kind, site_id, timestamp_ms, seq = r.unpack("BBqI")
    if kind == KIND_PORTRAIT:
        payload = _decode_layer(r)
    elif kind == KIND_SKELETON:
        payload = _decode_skeleton(r, timestamp_ms)
    elif kind == KIND_VIEWPOINT:
        payload = Viewpoint(np.array(r.unpack("3d")), timestamp_ms)
    elif kind == KIND_TOUCH:
        payload = _decode_touch(r)
    elif kind == KIND_SNAPSHOT:
        payload = _decode_snapshot(r)
    elif kind == KIND_STEERING:
        vals = r.unpack("B3d")
        payload = SteeringInput(vals[0], vals[1], vals[2], vals[3], timestamp_ms)
    else:
        raise WireError(f"unknown message kind {kind}")
    return SiteFrameMessage(site_id, kind, timestamp_ms, seq, payload)


def _encode_snapshot(snap: StateSnapshot) -> bytes:
    out = struct.pack("<qB", snap.now_ms, len(snap.sites))
    for s in snap.sites:
        h, w = s.frame_rgb.shape[:2]
        out += struct.pack("<BHH", s.site_id, w, h)
        out += _encode_rgb_u8(s.frame_rgb)
        out += struct.pack("<ffHB", s.d, s.alpha_g, s.near_joint_count,
                           1 if s.touch_event is not None else 0)
        if s.touch_event is not None:
            out += _encode_touch(s.touch_event)
        out += struct.pack("<B", 1 if s.haptic_active else 0)
    return out


def _decode_snapshot(r: _Reader) -> StateSnapshot:
    now_ms, nsites = r.unpack("qB")
    sites = []
    for _ in range(nsites):
        site_id, w, h = r.unpack("BHH")
        rgb = np.frombuffer(r.blob(), dtype=np.uint8).reshape(h, w, 3) / 255.0
        d, alpha_g, near, has_ev = r.unpack("ffHB")
        ev = _decode_touch(r) if has_ev else None
        (haptic,) = r.unpack("B")
        sites.append(SiteSnapshot(site_id, rgb, d, alpha_g, near, ev, bool(haptic)))
    return StateSnapshot(now_ms, sites)
