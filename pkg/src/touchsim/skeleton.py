"""Hand skeleton: fixed 21-joint topology, pose fitting, and bone scaling.

Joint layout: joint 0 is the wrist; each finger (thumb, index, middle,
ring, pinky) contributes 4 joints (mcp, pip, dip, tip) at indices
1 + 4*finger + k. Bone b connects parent(joint b+1) -> joint b+1, giving
20 bones rooted at the wrist.

Bone transforms are stored as rest-global -> posed-global rigid maps, so
they plug directly into linear blend skinning without an extra bind
inverse.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import GeometryError, check_rigid, rt

JOINT_COUNT = 21
BONE_COUNT = 20

FINGER_NAMES = ("thumb", "index", "middle", "ring", "pinky")


class SkeletonError(ValueError):
    """Structural or validation failure on skeleton data."""


def _build_bones() -> tuple[tuple[int, int], ...]:
    bones = []
    for f in range(5):
        base = 1 + 4 * f
        bones.append((0, base))
        for k in range(3):
            bones.append((base + k, base + k + 1))
    return tuple(bones)


#: Fixed bone topology shared by the template and every tracked skeleton.
BONE_TOPOLOGY: tuple[tuple[int, int], ...] = _build_bones()


def bone_children(bones=BONE_TOPOLOGY) -> list[list[int]]:
    """For each bone, the indices of bones whose parent joint is its child joint."""
    out: list[list[int]] = [[] for _ in bones]
    for b, (_, child) in enumerate(bones):
        for b2, (parent2, _) in enumerate(bones):
            if parent2 == child:
                out[b].append(b2)
    return out


def bone_parent(bones=BONE_TOPOLOGY) -> list[int]:
    """Parent bone index per bone (-1 for wrist-rooted bones)."""
    out = []
    for parent_joint, _ in bones:
        if parent_joint == 0:
            out.append(-1)
        else:
            out.append(parent_joint - 1)  # bone feeding joint j has index j-1
    return out


@dataclass
class HandSkeleton:
    """Tracked or template hand pose.

    joints: (21, 3) positions in the site frame.
    bone_transforms: (20, 4, 4) rigid maps from rest-global to posed-global.
    """

    joints: np.ndarray
    bones: tuple[tuple[int, int], ...] = BONE_TOPOLOGY
    bone_transforms: np.ndarray = field(
        default_factory=lambda: np.broadcast_to(np.eye(4), (BONE_COUNT, 4, 4)).copy())
    timestamp_ms: int = 0

    def __post_init__(self):
        self.joints = np.asarray(self.joints, dtype=float)
        self.bone_transforms = np.asarray(self.bone_transforms, dtype=float)
        self.validate()

    def validate(self):
        if self.joints.shape != (JOINT_COUNT, 3):
            raise SkeletonError(f"expected {JOINT_COUNT} joints, got {self.joints.shape}")
        if not np.all(np.isfinite(self.joints)):
            raise SkeletonError("non-finite joint coordinates")
        if tuple(self.bones) != BONE_TOPOLOGY:
            raise SkeletonError("bone topology does not match the fixed 21-joint layout")
        if self.bone_transforms.shape != (BONE_COUNT, 4, 4):
            raise SkeletonError("expected one 4x4 transform per bone")
        for b in range(BONE_COUNT):
            try:
                check_rigid(self.bone_transforms[b], f"bone {b} transform")
            except GeometryError as exc:
                raise SkeletonError(str(exc)) from exc

    def bone_lengths(self) -> np.ndarray:
        p = self.joints[[b[0] for b in self.bones]]
        c = self.joints[[b[1] for b in self.bones]]
        return np.linalg.norm(c - p, axis=1)

    def with_timestamp(self, timestamp_ms: int) -> "HandSkeleton":
        return HandSkeleton(self.joints.copy(), self.bones,
                            self.bone_transforms.copy(), timestamp_ms)


@dataclass
class BoneScales:
    """Per-bone uniform scale factors fitted from bone-length ratios."""

    scales: np.ndarray

    def __post_init__(self):
        self.scales = np.asarray(self.scales, dtype=float)
        if self.scales.shape != (BONE_COUNT,):
            raise SkeletonError("expected one scale per bone")
        if not np.all(np.isfinite(self.scales)) or np.any(self.scales <= 0):
            raise SkeletonError("bone scales must be strictly positive and finite")


# Template rest pose: palm near the z = 0 plane, fingers toward +y, thumb on
# the +x side. Rough medium-hand proportions in meters. Each finger carries a
# mild cumulative curl out of the palm plane so that no bone's joint
# neighbourhood is collinear (keeps per-bone pose fitting fully determined).
_FINGERS = {
    "thumb": ((0.030, 0.020, 0.0), (0.70, 0.71, 0.0), (0.040, 0.032, 0.026)),
    "index": ((0.026, 0.088, 0.0), (0.06, 1.0, 0.0), (0.044, 0.026, 0.021)),
    "middle": ((0.009, 0.092, 0.0), (0.0, 1.0, 0.0), (0.048, 0.030, 0.023)),
    "ring": ((-0.009, 0.088, 0.0), (-0.06, 1.0, 0.0), (0.043, 0.028, 0.021)),
    "pinky": ((-0.026, 0.080, 0.0), (-0.13, 1.0, 0.0), (0.033, 0.022, 0.019)),
}

_CURL_DEG = (6.0, 12.0, 18.0)


def template_joints() -> np.ndarray:
    joints = np.zeros((JOINT_COUNT, 3))
    for f, name in enumerate(FINGER_NAMES):
        mcp, direction, lens = _FINGERS[name]
        d = np.asarray(direction, dtype=float)
        d /= np.linalg.norm(d)
        pos = np.asarray(mcp, dtype=float)
        joints[1 + 4 * f] = pos
        for k, length in enumerate(lens):
            a = np.radians(_CURL_DEG[k])
            seg = np.array([d[0] * np.cos(a), d[1] * np.cos(a), -np.sin(a)])
            pos = pos + seg * length
            joints[2 + 4 * f + k] = pos
    return joints


def template_skeleton(timestamp_ms: int = 0) -> HandSkeleton:
    """The rest-pose template with identity bone transforms."""
    return HandSkeleton(template_joints(), timestamp_ms=timestamp_ms)


def _bone_frame(origin: np.ndarray, tip: np.ndarray) -> np.ndarray:
    """Rigid bone-local-to-global frame: origin at the parent joint, x along the bone."""
    x = tip - origin
    n = np.linalg.norm(x)
    if n < 1e-12:
        raise SkeletonError("degenerate bone: zero length")
    x = x / n
    ref = np.array([0.0, 0.0, 1.0])
    if abs(np.dot(x, ref)) > 0.99:
        ref = np.array([0.0, 1.0, 0.0])
    y = np.cross(ref, x)
    y /= np.linalg.norm(y)
    z = np.cross(x, y)
    return rt(np.stack([x, y, z], axis=1), origin)


def bind_transforms(skeleton: HandSkeleton) -> np.ndarray:
    """Per-bone rest-pose bind transforms B_j (bone-local -> global)."""
    out = np.empty((BONE_COUNT, 4, 4))
    for b, (p, c) in enumerate(skeleton.bones):
        out[b] = _bone_frame(skeleton.joints[p], skeleton.joints[c])
    return out


def compute_bone_scales(template: HandSkeleton, target: HandSkeleton) -> BoneScales:
    """Scales mapping each template bone length onto the target's."""
    lt = template.bone_lengths()
    lg = target.bone_lengths()
    if np.any(lt < 1e-9):
        raise SkeletonError("degenerate bone: zero-length template bone")
    return BoneScales(lg / lt)


def scale_skeleton(skeleton: HandSkeleton, scales: BoneScales) -> HandSkeleton:
    """Rebuild joint positions by accumulating scaled bone offsets from the wrist."""
    joints = skeleton.joints
    out = joints.copy()
    # BONE_TOPOLOGY lists parents before children within each finger chain.
    for b, (p, c) in enumerate(skeleton.bones):
        out[c] = out[p] + scales.scales[b] * (joints[c] - joints[p])
    return HandSkeleton(out, skeleton.bones, timestamp_ms=skeleton.timestamp_ms)


def update_bind_transforms(skeleton: HandSkeleton, scales: BoneScales) -> np.ndarray:
    """Bind transforms after bone-length scaling.

    Rotations are unchanged (scaling preserves bone directions); translations
    move to the scaled parent-joint positions accumulated down the tree.
    """
    return bind_transforms(scale_skeleton(skeleton, scales))


def _kabsch(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """Best rigid map src -> dst (least squares), tolerant of rank-deficient sets."""
    cs = src.mean(axis=0)
    cd = dst.mean(axis=0)
    H = (src - cs).T @ (dst - cd)
    U, _, Vt = np.linalg.svd(H)
    d = np.sign(np.linalg.det(Vt.T @ U.T))
    if d == 0:
        d = 1.0
    R = Vt.T @ np.diag([1.0, 1.0, d]) @ U.T
    return rt(R, cd - R @ cs)


# Per-bone point sets used to fit rigid transforms from raw joints: the
# bone's own joints plus immediate tree neighbours for rotational context.
def _fit_point_sets() -> list[list[int]]:
    sets = []
    children = bone_children()
    for b, (p, c) in enumerate(BONE_TOPOLOGY):
        pts = [p, c]
        for b2 in children[b]:
            pts.append(BONE_TOPOLOGY[b2][1])
        if p != 0:
            pts.append(BONE_TOPOLOGY[p - 1][0])  # grandparent joint
        sets.append(pts)
    return sets


_FIT_SETS = _fit_point_sets()


def pose_from_tracker(raw_joints, timestamp_ms: int = 0) -> HandSkeleton:
    """Fit per-bone rigid transforms mapping the template onto tracked joints.

    Each bone transform is the least-squares rigid map taking the bone's
    template neighbourhood onto the corresponding tracked positions, so a
    rigidly moved template is recovered exactly.
    """
    raw = np.asarray(raw_joints, dtype=float)
    if raw.shape != (JOINT_COUNT, 3):
        raise SkeletonError(f"expected {JOINT_COUNT} tracked joints, got {raw.shape}")
    if not np.all(np.isfinite(raw)):
        raise SkeletonError("non-finite tracked joint coordinates")
    tmpl = template_joints()
    transforms = np.empty((BONE_COUNT, 4, 4))
    for b, idx in enumerate(_FIT_SETS):
        transforms[b] = _kabsch(tmpl[idx], raw[idx])
    return HandSkeleton(raw, BONE_TOPOLOGY, transforms, timestamp_ms)
