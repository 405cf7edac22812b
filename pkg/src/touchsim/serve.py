"""Live session endpoint: WebSocket transport for the operator cockpit.

The server owns one steerable two-site session. Clients handshake with a
JSON text line, then exchange the binary wire encoding: the server streams
state snapshots, clients send steering messages moving each site's hand.
Session state survives client disconnects.
"""
import asyncio
import json
import time
from dataclasses import dataclass, field

import numpy as np
import yaml

from .calib import ScreenGeometry
from .fusion import FusionParams
from .scenario import ChannelModel, HandTrajectory, Scenario, SiteConfig, default_rig
from .calib import Viewpoint
from .session import SITE_IDS, SITE_NAMES, Session
from .touch import TouchParams, near_screen_joints
from .wire import (KIND_PORTRAIT, KIND_SKELETON, KIND_SNAPSHOT, KIND_STEERING,
                   KIND_VIEWPOINT, PROTOCOL_VERSION, SiteFrameMessage,
                   SiteSnapshot, StateSnapshot, SteeringInput, WireError,
                   decode_message, encode_message)

#: How far outside the screen rectangle steering targets may reach (meters).
STEER_PADDING = 0.2


class SteerableHand(HandTrajectory):
    """Trajectory whose target is overwritten by steering messages."""

    def __init__(self, x=0.0, y=0.0, distance=0.5):
        super().__init__([(0.0, x, y, distance)])

    def steer(self, x: float, y: float, distance: float):
        self.waypoints = [(0.0, x, y, max(distance, 0.0))]


@dataclass
class ServeConfig:
    tick_hz: int = 15
    resolution: tuple[int, int] = (160, 120)
    screen: ScreenGeometry = field(default_factory=ScreenGeometry)
    fusion: FusionParams = field(default_factory=FusionParams)
    touch: TouchParams = field(default_factory=TouchParams)


def load_serve_config(path) -> ServeConfig:
    with open(path) as fh:
        data = yaml.safe_load(fh) or {}
    scr = data.get("screen") or {}
    fus = data.get("fusion") or {}
    tch = data.get("touch") or {}
    return ServeConfig(
        tick_hz=int(data.get("tick_hz", 15)),
        resolution=tuple(int(x) for x in data.get("resolution", (160, 120))),
        screen=ScreenGeometry(float(scr.get("width", 1.439)),
                              float(scr.get("height", 0.809))),
        fusion=FusionParams(float(fus.get("d_min", 0.2)),
                            float(fus.get("d_max", 0.4))),
        touch=TouchParams(float(tch.get("joint_screen_threshold", 0.02)),
                          float(tch.get("overlap_area_threshold", 50.0)),
                          int(tch.get("refractory_ms", 500))),
    )


class LiveSession:
    """Wall-clock session with steerable hands and immediate message exchange."""

    def __init__(self, config: ServeConfig | None = None):
        self.config = config or ServeConfig()
        self.hands = {"A": SteerableHand(), "B": SteerableHand()}
        scenario = Scenario(
            duration_ms=1,
            sites={name: SiteConfig(Viewpoint(np.array([0.0, 0.0, 0.7])),
                                    self.hands[name],
                                    default_rig(self.config.screen,
                                                *self.config.resolution))
                   for name in ("A", "B")},
            screen=self.config.screen,
            fusion=self.config.fusion,
            touch=self.config.touch,
            portrait_channel=ChannelModel(0.0),
            skeleton_channel=ChannelModel(0.0),
            render_size=self.config.resolution,
        )
        self.session = Session(scenario)
        self.started_monotonic = time.monotonic()
        self.tick_count = 0
        self.snapshot_seq = 0
        self.last_events = {"A": None, "B": None}

    def apply_steering(self, steer: SteeringInput) -> SteeringInput:
        """Clamp the target into padded screen bounds and apply it."""
        name = SITE_NAMES.get(steer.site_id)
        if name is None:
            raise WireError(f"unknown site id {steer.site_id}")
        scr = self.config.screen
        x = float(np.clip(steer.x, -scr.width / 2 - STEER_PADDING,
                          scr.width / 2 + STEER_PADDING))
        y = float(np.clip(steer.y, -scr.height / 2 - STEER_PADDING,
                          scr.height / 2 + STEER_PADDING))
        d = max(float(steer.distance), 0.0)
        self.hands[name].steer(x, y, d)
        return SteeringInput(steer.site_id, x, y, d, steer.timestamp_ms)

    def tick(self, now_ms: int | None = None) -> StateSnapshot:
        """Advance one step: exchange messages, fuse, detect, snapshot."""
        if now_ms is None:
            now_ms = int((time.monotonic() - self.started_monotonic) * 1000)
        other = {"A": "B", "B": "A"}
        kinds = (KIND_PORTRAIT, KIND_SKELETON)
        if self.tick_count == 0:
            kinds = (KIND_VIEWPOINT,) + kinds
        for name in ("A", "B"):
            for msg in self.session.sender_step(name, now_ms, kinds):
                self.session.deliver(other[name], msg, now_ms)
        sites = []
        for name in ("A", "B"):
            result = self.session.receiver_step(name, now_ms)
            event = self.session.detect_step(name, now_ms)
            if event is not None:
                self.last_events[name] = event
            state = self.session.sites[name]
            local_sk = self.hands[name].skeleton_at(now_ms)
            near = len(near_screen_joints(local_sk, self.config.screen,
                                          self.config.touch.joint_screen_threshold))
            frame = result.frame if result is not None else (
                state.last_frame if state.last_frame is not None
                else np.zeros((self.config.resolution[1], self.config.resolution[0], 3)))
            sites.append(SiteSnapshot(
                site_id=SITE_IDS[name],
                frame_rgb=frame,
                d=float(result.d) if result is not None and result.d is not None else -1.0,
                alpha_g=float(result.alpha_g) if result is not None else 0.0,
                near_joint_count=near,
                touch_event=self.last_events[name],
                haptic_active=state.actuator.active_at(now_ms)))
        self.tick_count += 1
        # Live mode runs indefinitely; keep the trace bounded.
        if len(self.session.trace.records) > 2000:
            del self.session.trace.records[:-1000]
        return StateSnapshot(now_ms, sites)

    def snapshot_message(self, snap: StateSnapshot) -> bytes:
        self.snapshot_seq += 1
        return encode_message(SiteFrameMessage(0, KIND_SNAPSHOT, snap.now_ms,
                                               self.snapshot_seq, snap))


def create_app(config: ServeConfig | None = None):
    """FastAPI app exposing the live session over ws://.../ws."""
    from fastapi import FastAPI, WebSocket, WebSocketDisconnect

    app = FastAPI(title="touchsim live session")
    live = LiveSession(config)
    clients: set = set()
    app.state.live = live

    async def _broadcast_loop():
        period = 1.0 / live.config.tick_hz
        loop = asyncio.get_event_loop()
        while True:
            start = loop.time()
            snap = await asyncio.to_thread(live.tick)
            data = live.snapshot_message(snap)
            dead = []
            for ws in list(clients):
                try:
                    await ws.send_bytes(data)
                except Exception:
                    dead.append(ws)
            for ws in dead:
                clients.discard(ws)
            await asyncio.sleep(max(0.0, period - (loop.time() - start)))

    @app.on_event("startup")
    async def _startup():
        app.state.ticker = asyncio.create_task(_broadcast_loop())

    @app.on_event("shutdown")
    async def _shutdown():
        app.state.ticker.cancel()

    @app.get("/")
    async def info():
        return {"service": "touchsim", "protocol": PROTOCOL_VERSION,
                "tick_hz": live.config.tick_hz}

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket):
        await ws.accept()
        try:
            hello = json.loads(await ws.receive_text())
            if hello.get("protocol") != PROTOCOL_VERSION:
                await ws.send_text(json.dumps(
                    {"type": "error", "reason": "version-mismatch",
                     "expected": PROTOCOL_VERSION}))
                await ws.close()
                return
            await ws.send_text(json.dumps(
                {"type": "welcome", "protocol": PROTOCOL_VERSION,
                 "tick_hz": live.config.tick_hz}))
        except Exception:
            await ws.close()
            return
        clients.add(ws)
        try:
            while True:
                data = await ws.receive_bytes()
                try:
                    msg = decode_message(data)
                    if msg.kind != KIND_STEERING:
                        raise WireError(f"unexpected kind {msg.kind}")
                    applied = live.apply_steering(msg.payload)
                    await ws.send_text(json.dumps(
                        {"type": "ack", "site": applied.site_id,
                         "x": applied.x, "y": applied.y, "d": applied.distance}))
                except WireError as exc:
                    await ws.send_text(json.dumps(
                        {"type": "error", "reason": str(exc)}))
        except WebSocketDisconnect:
            pass
        finally:
            clients.discard(ws)

    return app
