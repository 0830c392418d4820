"""Canonical skeleton, forward kinematics and orientation normalization.

Coordinate convention: Y up, Z toward the viewer, right-handed. A signer in
canonical pose faces +Z, so their left side is on +X and the
shoulder-left -> shoulder-right vector points along -X.

Joint angles are local rotations stored as intrinsic X-Y-Z Euler triples in
radians, i.e. ``R = Rx(a) @ Ry(b) @ Rz(c)``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError, DimensionError, FormatError, GeometryError

SKELETON_FORMAT = "signstitch-skeleton"

#: Anchors every skeleton must define.
REQUIRED_ANCHORS = (
    "hips_left",
    "hips_right",
    "shoulder_left",
    "shoulder_right",
    "dominant_wrist",
    "head_root",
)
#: Extra head anchors used to fit faces onto the body (optional).
FACE_ANCHORS = ("head_root", "head_left", "head_right")

_EPS = 1e-12


@dataclass(frozen=True)
class Joint:
    name: str
    parent: int | None
    bone_length: float
    rest_direction: tuple[float, float, float]


@dataclass(frozen=True)
class CanonicalSkeleton:
    """Joint hierarchy in topological order plus named anchor joints.

    The root carries no bone; its ``bone_length`` must be 0. Every other
    joint sits ``bone_length * rest_direction`` away from its parent in the
    parent's frame.
    """

    joints: tuple[Joint, ...]
    anchors: dict[str, int]
    version: str = "1"

    def __post_init__(self):
        object.__setattr__(self, "joints", tuple(self.joints))
        object.__setattr__(self, "anchors", dict(self.anchors))
        if not self.joints:
            raise FormatError("skeleton has no joints")
        roots = [i for i, j in enumerate(self.joints) if j.parent is None]
        if roots != [0]:
            raise FormatError(f"skeleton needs exactly one root at index 0, got roots {roots}")
        names = [j.name for j in self.joints]
        if len(set(names)) != len(names):
            raise FormatError("joint names must be unique")
        for i, j in enumerate(self.joints[1:], start=1):
            if not 0 <= j.parent < i:
                raise FormatError(f"joint {j.name!r}: parent {j.parent} is not before index {i}")
            if not j.bone_length > 0:
                raise FormatError(f"joint {j.name!r}: bone length must be > 0")
            if abs(np.linalg.norm(j.rest_direction) - 1.0) > 1e-6:
                raise FormatError(f"joint {j.name!r}: rest direction is not a unit vector")
        if self.joints[0].bone_length != 0:
            raise FormatError("root joint must have bone_length 0")
        for name in REQUIRED_ANCHORS:
            if name not in self.anchors:
                raise FormatError(f"missing anchor {name!r}")
        for name, idx in self.anchors.items():
            if not 0 <= idx < len(self.joints):
                raise FormatError(f"anchor {name!r} -> {idx} is not a valid joint index")

    @property
    def n_joints(self) -> int:
        return len(self.joints)

    @property
    def names(self) -> list[str]:
        return [j.name for j in self.joints]

    @property
    def parents(self) -> np.ndarray:
        return np.array([-1 if j.parent is None else j.parent for j in self.joints])

    @property
    def offsets(self) -> np.ndarray:
        """(J, 3) rest offsets of each joint from its parent."""
        return np.array([j.bone_length * np.asarray(j.rest_direction, float) for j in self.joints])

    @property
    def edges(self) -> list[tuple[int, int]]:
        return [(j.parent, i) for i, j in enumerate(self.joints) if j.parent is not None]

    @property
    def has_face_anchors(self) -> bool:
        return all(a in self.anchors for a in FACE_ANCHORS)

    def anchor(self, name: str) -> int:
        return self.anchors[name]

    def to_dict(self) -> dict:
        return {
            "format": SKELETON_FORMAT,
            "version": self.version,
            "joints": [
                {
                    "name": j.name,
                    "parent": None if j.parent is None else self.joints[j.parent].name,
                    "bone_length": j.bone_length,
                    "rest_direction": list(j.rest_direction),
                }
                for j in self.joints
            ],
            "anchors": {k: self.joints[v].name for k, v in self.anchors.items()},
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "CanonicalSkeleton":
        if "version" not in doc:
            raise FormatError("skeleton file lacks the mandatory 'version' field")
        try:
            raw = doc["joints"]
            index = {j["name"]: i for i, j in enumerate(raw)}
            joints = []
            for j in raw:
                parent = j.get("parent")
                if parent is not None:
                    if parent not in index:
                        raise FormatError(f"joint {j['name']!r}: unknown parent {parent!r}")
                    parent = index[parent]
                joints.append(
                    Joint(
                        name=j["name"],
                        parent=parent,
                        bone_length=float(j.get("bone_length", 0.0)),
                        rest_direction=tuple(float(v) for v in j.get("rest_direction", (0.0, 1.0, 0.0))),
                    )
                )
            anchors = {}
            for key, name in doc["anchors"].items():
                if name not in index:
                    raise FormatError(f"anchor {key!r} names unknown joint {name!r}")
                anchors[key] = index[name]
        except KeyError as exc:
            raise FormatError(f"skeleton file missing field {exc}") from None
        return cls(tuple(joints), anchors, str(doc["version"]))


def load_skeleton(path: str | Path) -> CanonicalSkeleton:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    return CanonicalSkeleton.from_dict(doc)


def save_skeleton(skeleton: CanonicalSkeleton, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(skeleton.to_dict(), fh, indent=2)
        fh.write("\n")


@dataclass
class JointAngleSequence:
    """Per-frame local joint rotations, shape (U, J, 3), radians."""

    frames: np.ndarray
    fps: float

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=float)
        if self.frames.ndim == 2 and self.frames.shape[1] % 3 == 0:
            self.frames = self.frames.reshape(len(self.frames), -1, 3)
        if self.frames.ndim != 3 or self.frames.shape[2] != 3:
            raise DimensionError(f"joint angles must have shape (U, J, 3), got {self.frames.shape}")
        if not np.all(np.isfinite(self.frames)):
            raise DataError("joint angles contain non-finite values")
        if not self.fps > 0:
            raise DimensionError("fps must be > 0")

    def __len__(self):
        return len(self.frames)

    @property
    def n_joints(self) -> int:
        return self.frames.shape[1]


@dataclass
class PoseSequence:
    """Euclidean joint positions, shape (U, J, 3)."""

    frames: np.ndarray
    fps: float
    joint_names: list[str] | None = field(default=None, compare=False)

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=float)
        if self.frames.ndim != 3 or self.frames.shape[2] != 3:
            raise DimensionError(f"poses must have shape (U, J, 3), got {self.frames.shape}")
        if not np.all(np.isfinite(self.frames)):
            raise DataError("poses contain non-finite values")
        if not self.fps > 0:
            raise DimensionError("fps must be > 0")
        if self.joint_names is not None and len(self.joint_names) != self.frames.shape[1]:
            raise DimensionError("joint_names length does not match joint count")

    def __len__(self):
        return len(self.frames)

    @property
    def n_joints(self) -> int:
        return self.frames.shape[1]

    def with_frames(self, frames: np.ndarray) -> "PoseSequence":
        return PoseSequence(frames, self.fps, self.joint_names)


def euler_xyz_to_matrix(angles: np.ndarray) -> np.ndarray:
    """Intrinsic X-Y-Z Euler angles (..., 3) to rotation matrices (..., 3, 3)."""
    angles = np.asarray(angles, dtype=float)
    a, b, c = angles[..., 0], angles[..., 1], angles[..., 2]
    ca, sa = np.cos(a), np.sin(a)
    cb, sb = np.cos(b), np.sin(b)
    cc, sc = np.cos(c), np.sin(c)
    one, zero = np.ones_like(a), np.zeros_like(a)
    rx = np.stack([one, zero, zero, zero, ca, -sa, zero, sa, ca], -1).reshape(a.shape + (3, 3))
    ry = np.stack([cb, zero, sb, zero, one, zero, -sb, zero, cb], -1).reshape(a.shape + (3, 3))
    rz = np.stack([cc, -sc, zero, sc, cc, zero, zero, zero, one], -1).reshape(a.shape + (3, 3))
    return rx @ ry @ rz


def forward_kinematics(skeleton: CanonicalSkeleton, angles: JointAngleSequence) -> PoseSequence:
    """Place every joint from local rotations; the root sits at the origin."""
    if angles.n_joints != skeleton.n_joints:
        raise DimensionError(
            f"angle frames have {angles.n_joints} joints, skeleton has {skeleton.n_joints}"
        )
    local = euler_xyz_to_matrix(angles.frames)  # (U, J, 3, 3)
    offsets = skeleton.offsets
    n_frames, n_joints = angles.frames.shape[:2]
    rot = np.empty_like(local)
    pos = np.zeros((n_frames, n_joints, 3))
    rot[:, 0] = local[:, 0]
    for j in range(1, n_joints):
        p = skeleton.joints[j].parent
        pos[:, j] = pos[:, p] + rot[:, p] @ offsets[j]
        rot[:, j] = rot[:, p] @ local[:, j]
    return PoseSequence(pos, angles.fps, skeleton.names)


def _rotation_y(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def _rotation_z(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def _rotation_x(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def canonical_frame_transform(frame: np.ndarray, skeleton: CanonicalSkeleton, index: int = 0):
    """Rotation ``R`` and origin ``o`` such that ``(frame - o) @ R.T`` is canonical.

    Yaw about +Y and roll about +Z put the shoulder-left -> shoulder-right
    vector on -X; a final pitch about X stands the torso upright so the
    shoulders midpoint lies on +Y. The pitch leaves the shoulder line
    untouched and makes the result independent of any rigid pre-transform.
    """
    hl, hr = frame[skeleton.anchor("hips_left")], frame[skeleton.anchor("hips_right")]
    sl, sr = frame[skeleton.anchor("shoulder_left")], frame[skeleton.anchor("shoulder_right")]
    origin = 0.5 * (hl + hr)
    v = sr - sl
    scale = max(np.linalg.norm(v), np.abs(frame - origin).max(), 1.0)
    if np.linalg.norm(v) <= 1e-9 * scale:
        raise GeometryError(f"frame {index}: shoulders are coincident", frame=index)

    # Yaw: send the horizontal (x, z) part of v to -X.
    if np.hypot(v[0], v[2]) > _EPS * scale:
        yaw = np.arctan2(-v[2], -v[0])
        r = _rotation_y(yaw)
    else:
        r = np.eye(3)
    v = r @ v
    # Roll: v now lies in the x-y plane; send it to -X.
    r = _rotation_z(np.arctan2(v[1], -v[0])) @ r
    # Pitch: shoulders midpoint onto +Y (rotation about X keeps v on -X).
    m = r @ (0.5 * (sl + sr) - origin)
    if np.hypot(m[1], m[2]) > _EPS * scale:
        r = _rotation_x(np.arctan2(-m[2], m[1])) @ r
    return r, origin


def normalize_orientation(poses: PoseSequence, skeleton: CanonicalSkeleton) -> PoseSequence:
    """Per frame: hips midpoint to the origin and shoulders onto the X axis."""
    needed = max(skeleton.anchors[a] for a in REQUIRED_ANCHORS)
    if poses.n_joints <= needed:
        raise DimensionError("pose frames do not contain the skeleton's anchor joints")
    out = np.empty_like(poses.frames)
    for u, frame in enumerate(poses.frames):
        r, origin = canonical_frame_transform(frame, skeleton, u)
        out[u] = (frame - origin) @ r.T
    return poses.with_frames(out)


def bone_lengths(poses: PoseSequence, skeleton: CanonicalSkeleton) -> np.ndarray:
    """Measured (U, J-1) parent-child distances."""
    parents = skeleton.parents[1:]
    f = poses.frames[:, : skeleton.n_joints]
    return np.linalg.norm(f[:, 1:] - f[:, parents], axis=-1)


def upper_body_skeleton() -> CanonicalSkeleton:
    """A 20-joint upper-body skeleton with head anchors; right hand dominant."""
    up, down = (0.0, 1.0, 0.0), (0.0, -1.0, 0.0)
    left, right = (1.0, 0.0, 0.0), (-1.0, 0.0, 0.0)
    spec = [
        ("pelvis", None, 0.0, up),
        ("hip_l", "pelvis", 0.10, left),
        ("hip_r", "pelvis", 0.10, right),
        ("spine", "pelvis", 0.25, up),
        ("chest", "spine", 0.25, up),
        ("neck", "chest", 0.10, up),
        ("head", "neck", 0.12, up),
        ("ear_l", "head", 0.08, (0.8, 0.6, 0.0)),
        ("ear_r", "head", 0.08, (-0.8, 0.6, 0.0)),
        ("shoulder_l", "chest", 0.18, left),
        ("elbow_l", "shoulder_l", 0.28, down),
        ("wrist_l", "elbow_l", 0.25, down),
        ("shoulder_r", "chest", 0.18, right),
        ("elbow_r", "shoulder_r", 0.28, down),
        ("wrist_r", "elbow_r", 0.25, down),
        ("thumb_r", "wrist_r", 0.05, right),
        ("index_r", "wrist_r", 0.08, down),
        ("pinky_r", "wrist_r", 0.07, down),
        ("thumb_l", "wrist_l", 0.05, left),
        ("index_l", "wrist_l", 0.08, down),
    ]
    idx = {name: i for i, (name, *_rest) in enumerate(spec)}
    joints = tuple(
        Joint(name, None if parent is None else idx[parent], length, direction)
        for name, parent, length, direction in spec
    )
    anchors = {
        "hips_left": idx["hip_l"],
        "hips_right": idx["hip_r"],
        "shoulder_left": idx["shoulder_l"],
        "shoulder_right": idx["shoulder_r"],
        "dominant_wrist": idx["wrist_r"],
        "head_root": idx["head"],
        "head_left": idx["ear_l"],
        "head_right": idx["ear_r"],
    }
    return CanonicalSkeleton(joints, anchors, version="upper-body-20/1")
