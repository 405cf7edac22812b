"""Rigged hand mesh: linear blend skinning, shape adaptation, and fixture IO.

The template mesh is procedurally generated (tapered tubes around each bone
of the template skeleton) and shipped as a text fixture; see
``save_mesh``/``load_mesh`` for the file format.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .skeleton import (BONE_COUNT, BONE_TOPOLOGY, BoneScales, HandSkeleton,
                       SkeletonError, bind_transforms, bone_parent,
                       template_skeleton)

WEIGHT_TOL = 1e-6


class MeshError(ValueError):
    """Structural or validation failure on mesh data."""


@dataclass
class RiggedHandMesh:
    """Rest-pose hand mesh with per-vertex skinning weights.

    Weights are stored densely over K slots per vertex: ``weight_bones``
    (N, K) int indices and ``weight_vals`` (N, K) floats summing to 1 per row
    (unused slots carry weight 0).
    """

    rest_vertices: np.ndarray      # (N, 3)
    faces: np.ndarray              # (M, 3) int
    uvs: np.ndarray                # (N, 2) in [0, 1]^2
    texture: np.ndarray            # (th, tw, 3) linear RGB in [0, 1]
    weight_bones: np.ndarray       # (N, K) int
    weight_vals: np.ndarray        # (N, K)
    bind_transforms: np.ndarray    # (20, 4, 4) bone-local -> global at rest
    rest_joints: np.ndarray        # (21, 3) template skeleton joints

    def __post_init__(self):
        self.rest_vertices = np.asarray(self.rest_vertices, dtype=float)
        self.faces = np.asarray(self.faces, dtype=np.int32)
        self.uvs = np.asarray(self.uvs, dtype=float)
        self.texture = np.asarray(self.texture, dtype=float)
        self.weight_bones = np.asarray(self.weight_bones, dtype=np.int32)
        self.weight_vals = np.asarray(self.weight_vals, dtype=float)
        self.bind_transforms = np.asarray(self.bind_transforms, dtype=float)
        self.rest_joints = np.asarray(self.rest_joints, dtype=float)
        self.validate()

    def validate(self):
        n = len(self.rest_vertices)
        if self.rest_vertices.ndim != 2 or self.rest_vertices.shape[1] != 3:
            raise MeshError("rest_vertices must be (N, 3)")
        if not np.all(np.isfinite(self.rest_vertices)):
            raise MeshError("non-finite vertex positions")
        if self.faces.ndim != 2 or self.faces.shape[1] != 3:
            raise MeshError("faces must be (M, 3)")
        if self.faces.size and (self.faces.min() < 0 or self.faces.max() >= n):
            raise MeshError("face index out of range")
        if self.uvs.shape != (n, 2):
            raise MeshError("uvs must be (N, 2)")
        if np.any(self.uvs < -1e-9) or np.any(self.uvs > 1 + 1e-9):
            raise MeshError("uvs must lie in [0, 1]^2")
        if self.texture.ndim != 3 or self.texture.shape[2] != 3:
            raise MeshError("texture must be (H, W, 3)")
        if self.weight_bones.shape != self.weight_vals.shape or self.weight_bones.shape[0] != n:
            raise MeshError("weight arrays must be (N, K)")
        if np.any(self.weight_vals < -WEIGHT_TOL):
            raise MeshError("negative skinning weight")
        sums = self.weight_vals.sum(axis=1)
        if np.any(np.abs(sums - 1.0) > WEIGHT_TOL):
            raise MeshError("skinning weights must sum to 1 per vertex")
        if self.weight_bones.min() < 0 or self.weight_bones.max() >= BONE_COUNT:
            raise MeshError("weighted bone index out of range")
        if self.bind_transforms.shape != (BONE_COUNT, 4, 4):
            raise MeshError("expected one bind transform per bone")

    @property
    def vertex_count(self) -> int:
        return len(self.rest_vertices)

    def with_texture(self, texture: np.ndarray) -> "RiggedHandMesh":
        return RiggedHandMesh(self.rest_vertices, self.faces, self.uvs, texture,
                              self.weight_bones, self.weight_vals,
                              self.bind_transforms, self.rest_joints)


def _blend_transforms(mesh: RiggedHandMesh, per_bone: np.ndarray,
                      vertices: np.ndarray) -> np.ndarray:
    """Apply the weighted sum of per-bone 4x4 maps to each vertex."""
    hom = np.concatenate([vertices, np.ones((len(vertices), 1))], axis=1)
    out = np.zeros((len(vertices), 3))
    for k in range(mesh.weight_bones.shape[1]):
        T = per_bone[mesh.weight_bones[:, k]]           # (N, 4, 4)
        moved = np.einsum("nij,nj->ni", T[:, :3, :], hom)
        out += mesh.weight_vals[:, k:k + 1] * moved
    return out


def skin_vertices(mesh: RiggedHandMesh, pose: HandSkeleton) -> np.ndarray:
    """Linear blend skinning: V' = sum_j w_ji T_j V_i."""
    if tuple(pose.bones) != BONE_TOPOLOGY:
        raise SkeletonError("pose topology does not match mesh bone set")
    return _blend_transforms(mesh, pose.bone_transforms, mesh.rest_vertices)


def adapt_shape(mesh: RiggedHandMesh, scales: BoneScales,
                bind_updated: np.ndarray) -> RiggedHandMesh:
    """Rescale the rest mesh so its implied bone lengths match a target skeleton.

    Each vertex moves by sum_j w_ji B_j' S_j B_j^{-1} V_i, where B_j are the
    mesh's rest binds and B_j' the binds rebuilt from the scaled skeleton.
    Topology, uvs, and weights are untouched.
    """
    bind_updated = np.asarray(bind_updated, dtype=float)
    if bind_updated.shape != (BONE_COUNT, 4, 4):
        raise MeshError("expected one updated bind transform per bone")
    binds = mesh.bind_transforms
    if np.any(np.abs(np.linalg.det(binds[:, :3, :3]) - 1.0) > 1e-6):
        raise MeshError("mesh bind transforms are not rigid")
    per_bone = np.empty((BONE_COUNT, 4, 4))
    for b in range(BONE_COUNT):
        S = np.diag([scales.scales[b]] * 3 + [1.0])
        per_bone[b] = bind_updated[b] @ S @ np.linalg.inv(binds[b])
    new_vertices = _blend_transforms(mesh, per_bone, mesh.rest_vertices)
    new_joints = _blend_joint_positions(mesh, per_bone)
    return RiggedHandMesh(new_vertices, mesh.faces, mesh.uvs, mesh.texture,
                          mesh.weight_bones, mesh.weight_vals,
                          bind_updated, new_joints)


def _blend_joint_positions(mesh: RiggedHandMesh, per_bone: np.ndarray) -> np.ndarray:
    """Move the rest joints with their owning bone's transform."""
    joints = mesh.rest_joints.copy()
    parents = bone_parent()
    for b, (p, c) in enumerate(BONE_TOPOLOGY):
        hom = np.append(mesh.rest_joints[c], 1.0)
        joints[c] = (per_bone[b] @ hom)[:3]
        if parents[b] == -1:
            hom0 = np.append(mesh.rest_joints[p], 1.0)
            joints[p] = (per_bone[b] @ hom0)[:3]
    return joints


# ---------------------------------------------------------------------------
# Procedural template hand
# ---------------------------------------------------------------------------

_RING_SEGMENTS = 8
# Tube radius per within-finger bone position (mcp bones are palm-width).
_BONE_RADII = (0.013, 0.009, 0.008, 0.006)


def build_template_hand(texture_size: int = 64) -> RiggedHandMesh:
    """Low-poly tube-per-bone hand mesh rigged to the template skeleton."""
    skel = template_skeleton()
    joints = skel.joints
    binds = bind_transforms(skel)
    parents = bone_parent()

    verts: list[np.ndarray] = []
    uvs: list[tuple[float, float]] = []
    wb: list[list[int]] = []
    wv: list[list[float]] = []
    faces: list[tuple[int, int, int]] = []

    for b, (p, c) in enumerate(BONE_TOPOLOGY):
        radius = _BONE_RADII[(c - 1) % 4]
        origin, tip = joints[p], joints[c]
        frame = binds[b]
        axis_y, axis_z = frame[:3, 1], frame[:3, 2]
        ring_rows = []
        for ti, t in enumerate((0.0, 0.5, 1.0)):
            center = origin + t * (tip - origin)
            taper = 1.0 - 0.35 * t
            row = []
            for s in range(_RING_SEGMENTS):
                ang = 2 * np.pi * s / _RING_SEGMENTS
                pos = center + radius * taper * (np.cos(ang) * axis_y + np.sin(ang) * axis_z)
                row.append(len(verts))
                verts.append(pos)
                uvs.append(((b + min(t, 0.999)) / BONE_COUNT, s / _RING_SEGMENTS))
                if ti == 0 and parents[b] >= 0:
                    wb.append([b, parents[b]])
                    wv.append([0.5, 0.5])
                else:
                    wb.append([b, b])
                    wv.append([1.0, 0.0])
            ring_rows.append(row)
        for r0, r1 in zip(ring_rows, ring_rows[1:]):
            for s in range(_RING_SEGMENTS):
                s2 = (s + 1) % _RING_SEGMENTS
                faces.append((r0[s], r1[s], r1[s2]))
                faces.append((r0[s], r1[s2], r0[s2]))
        if c % 4 == 0:  # fingertip bone: close the end with a cap
            cap = len(verts)
            verts.append(tip + 0.002 * frame[:3, 0])
            uvs.append(((b + 0.999) / BONE_COUNT, 0.5))
            wb.append([b, b])
            wv.append([1.0, 0.0])
            last = ring_rows[-1]
            for s in range(_RING_SEGMENTS):
                faces.append((last[s], cap, last[(s + 1) % _RING_SEGMENTS]))

    rng = np.random.default_rng(7)
    tex = np.empty((texture_size, texture_size, 3))
    base = np.array([0.78, 0.58, 0.48])
    grad = np.linspace(-0.06, 0.06, texture_size)[:, None]
    tex[:] = base
    tex[..., 0] += grad
    tex[..., 1] += 0.5 * grad
    tex += rng.normal(0.0, 0.015, tex.shape)
    tex = np.clip(tex, 0.0, 1.0)

    return RiggedHandMesh(np.asarray(verts), np.asarray(faces), np.asarray(uvs),
                          tex, np.asarray(wb), np.asarray(wv), binds, joints)


# ---------------------------------------------------------------------------
# Fixture file IO
# ---------------------------------------------------------------------------
#
# Plain-text sections, whitespace separated, '#' comments allowed:
#   handmesh 1
#   joints 21          -> 21 lines "x y z"
#   bones 20           -> 20 lines "parent child"
#   binds 20           -> 20 lines of 12 floats (row-major 3x4 [R | t])
#   vertices N         -> N lines "x y z"
#   faces M            -> M lines "i j k"
#   uvs N              -> N lines "u v"
#   weights N          -> N lines "count bone:weight bone:weight ..."
#   texture H W        -> H*W lines "r g b" (row major)


def save_mesh(mesh: RiggedHandMesh, path) -> None:
    lines = ["handmesh 1"]
    lines.append(f"joints {len(mesh.rest_joints)}")
    lines += [" ".join(f"{x:.9g}" for x in j) for j in mesh.rest_joints]
    lines.append(f"bones {BONE_COUNT}")
    lines += [f"{p} {c}" for p, c in BONE_TOPOLOGY]
    lines.append(f"binds {BONE_COUNT}")
    lines += [" ".join(f"{x:.12g}" for x in B[:3].reshape(-1)) for B in mesh.bind_transforms]
    lines.append(f"vertices {mesh.vertex_count}")
    lines += [" ".join(f"{x:.9g}" for x in v) for v in mesh.rest_vertices]
    lines.append(f"faces {len(mesh.faces)}")
    lines += [" ".join(str(i) for i in f) for f in mesh.faces]
    lines.append(f"uvs {mesh.vertex_count}")
    lines += [" ".join(f"{x:.9g}" for x in uv) for uv in mesh.uvs]
    lines.append(f"weights {mesh.vertex_count}")
    for bones, vals in zip(mesh.weight_bones, mesh.weight_vals):
        pairs = [f"{b}:{w:.9g}" for b, w in zip(bones, vals) if w > 0]
        lines.append(" ".join([str(len(pairs))] + pairs))
    h, w = mesh.texture.shape[:2]
    lines.append(f"texture {h} {w}")
    lines += [" ".join(f"{x:.6g}" for x in px) for px in mesh.texture.reshape(-1, 3)]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


class _Tokens:
    def __init__(self, path):
        with open(path) as fh:
            words = []
            for line in fh:
                line = line.split("#", 1)[0]
                words.extend(line.split())
        self.words = words
        self.pos = 0

    def take(self, n: int) -> list[str]:
        if self.pos + n > len(self.words):
            raise MeshError("truncated mesh file")
        out = self.words[self.pos:self.pos + n]
        self.pos += n
        return out

    def expect(self, word: str):
        got = self.take(1)[0]
        if got != word:
            raise MeshError(f"expected section '{word}', got '{got}'")

    def count(self, word: str) -> int:
        self.expect(word)
        return int(self.take(1)[0])


def default_hand_mesh() -> RiggedHandMesh:
    """The shipped template hand fixture (falls back to regenerating it)."""
    from importlib import resources

    ref = resources.files("touchsim").joinpath("data/hand_template.mesh")
    if ref.is_file():
        with resources.as_file(ref) as path:
            return load_mesh(path)
    return build_template_hand()


def load_mesh(path) -> RiggedHandMesh:
    """Load and fully validate a hand mesh fixture file."""
    tk = _Tokens(path)
    tk.expect("handmesh")
    if tk.take(1)[0] != "1":
        raise MeshError("unsupported mesh format version")

    nj = tk.count("joints")
    joints = np.array(tk.take(nj * 3), dtype=float).reshape(nj, 3)
    nb = tk.count("bones")
    bones = tuple(tuple(int(x) for x in tk.take(2)) for _ in range(nb))
    if bones != BONE_TOPOLOGY:
        raise MeshError("bone tree does not match the fixed topology")
    tk.expect("binds")
    nbinds = int(tk.take(1)[0])
    binds = np.tile(np.eye(4), (nbinds, 1, 1))
    for b in range(nbinds):
        binds[b, :3] = np.array(tk.take(12), dtype=float).reshape(3, 4)
    nv = tk.count("vertices")
    verts = np.array(tk.take(nv * 3), dtype=float).reshape(nv, 3)
    nf = tk.count("faces")
    faces = np.array(tk.take(nf * 3), dtype=int).reshape(nf, 3)
    nuv = tk.count("uvs")
    if nuv != nv:
        raise MeshError("uv count does not match vertex count")
    uvs = np.array(tk.take(nv * 2), dtype=float).reshape(nv, 2)
    nw = tk.count("weights")
    if nw != nv:
        raise MeshError("weight row count does not match vertex count")
    rows = []
    for _ in range(nv):
        count = int(tk.take(1)[0])
        if count <= 0:
            raise MeshError("empty weight row")
        row = []
        for _ in range(count):
            b, w = tk.take(1)[0].split(":")
            row.append((int(b), float(w)))
        rows.append(row)
    k = max(len(r) for r in rows)
    wb = np.zeros((nv, k), dtype=int)
    wv = np.zeros((nv, k))
    for i, row in enumerate(rows):
        for j, (b, w) in enumerate(row):
            wb[i, j] = b
            wv[i, j] = w
    th, tw = (int(x) for x in (tk.count("texture"), int(tk.take(1)[0])))
    tex = np.array(tk.take(th * tw * 3), dtype=float).reshape(th, tw, 3)
    return RiggedHandMesh(verts, faces, uvs, tex, wb, wv, binds, joints)
