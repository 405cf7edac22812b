"""Mutual-touch detection on the screen plane and the simulated haptic actuator."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .calib import ScreenGeometry
from .geometry import SCREEN_PLANE, Plane
from .skeleton import HandSkeleton

#: Simulated delay between detection and the actuator pulse (milliseconds).
HAPTIC_DELAY_MS = 60
#: Vibration pulse length of the simulated motor (milliseconds).
HAPTIC_PULSE_MS = 200


class TouchError(ValueError):
    pass


@dataclass(frozen=True)
class TouchParams:
    joint_screen_threshold: float = 0.02   # meters
    overlap_area_threshold: float = 50.0   # cm^2
    refractory_ms: int = 500

    def __post_init__(self):
        if (self.joint_screen_threshold <= 0 or self.overlap_area_threshold <= 0
                or self.refractory_ms <= 0):
            raise TouchError("touch thresholds must be positive")


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle on the screen plane, meters."""

    x0: float
    y0: float
    x1: float
    y1: float

    def area_cm2(self) -> float:
        return (self.x1 - self.x0) * (self.y1 - self.y0) * 1e4

    def intersect(self, other: "Rect") -> "Rect | None":
        x0 = max(self.x0, other.x0)
        y0 = max(self.y0, other.y0)
        x1 = min(self.x1, other.x1)
        y1 = min(self.y1, other.y1)
        if x0 >= x1 or y0 >= y1:
            return None
        return Rect(x0, y0, x1, y1)


@dataclass(frozen=True)
class TouchEvent:
    timestamp_ms: int
    overlap_area_cm2: float
    local_bbox: Rect
    remote_bbox: Rect
    haptic_delay_ms: int = HAPTIC_DELAY_MS


def near_screen_joints(skeleton: HandSkeleton, screen: ScreenGeometry,
                       threshold: float, plane: Plane = SCREEN_PLANE) -> np.ndarray:
    """Indices of joints within `threshold` of the screen plane whose
    projection falls inside the screen rectangle."""
    dist = np.abs(plane.signed_distance(skeleton.joints))
    inside = screen.contains(skeleton.joints[:, :2])
    return np.nonzero((dist <= threshold) & inside)[0]


def projected_bbox(skeleton: HandSkeleton, joint_subset: np.ndarray) -> Rect | None:
    """Bounding rectangle of the orthogonal screen-plane projections."""
    if len(joint_subset) == 0:
        return None
    xy = skeleton.joints[joint_subset, :2]
    mins = xy.min(axis=0)
    maxs = xy.max(axis=0)
    return Rect(float(mins[0]), float(mins[1]), float(maxs[0]), float(maxs[1]))


def overlap_area_cm2(local_bbox: Rect | None, remote_bbox: Rect | None) -> float:
    if local_bbox is None or remote_bbox is None:
        return 0.0
    inter = local_bbox.intersect(remote_bbox)
    return inter.area_cm2() if inter else 0.0


@dataclass
class HapticActuator:
    """Append-only trace of scheduled vibration pulses."""

    pulses: list[tuple[int, int]] = field(default_factory=list)

    def schedule(self, at_ms: int, duration_ms: int = HAPTIC_PULSE_MS):
        self.pulses.append((at_ms, duration_ms))

    def active_at(self, now_ms: int) -> bool:
        return any(start <= now_ms < start + dur for start, dur in self.pulses)


def trigger_haptic(event: TouchEvent, actuator: HapticActuator) -> tuple[int, int]:
    """Schedule the vibration pulse for a detected touch; returns the log entry."""
    at = event.timestamp_ms + event.haptic_delay_ms
    actuator.schedule(at, HAPTIC_PULSE_MS)
    return (at, HAPTIC_PULSE_MS)


@dataclass
class TouchDetector:
    """Stateful detector owning the refractory window (single writer)."""

    screen: ScreenGeometry
    params: TouchParams = field(default_factory=TouchParams)
    last_event_ms: int | None = None

    def detect(self, local: HandSkeleton, remote: HandSkeleton,
               now_ms: int) -> TouchEvent | None:
        """Emit a TouchEvent iff both near-screen bboxes exist, their overlap
        reaches the area threshold, and the refractory window has elapsed.

        `remote` must already be expressed in the local site frame.
        """
        thr = self.params.joint_screen_threshold
        lb = projected_bbox(local, near_screen_joints(local, self.screen, thr))
        rb = projected_bbox(remote, near_screen_joints(remote, self.screen, thr))
        area = overlap_area_cm2(lb, rb)
        if lb is None or rb is None or area < self.params.overlap_area_threshold:
            return None
        if (self.last_event_ms is not None
                and now_ms - self.last_event_ms < self.params.refractory_ms):
            return None
        self.last_event_ms = now_ms
        return TouchEvent(now_ms, area, lb, rb)
