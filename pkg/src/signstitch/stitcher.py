"""Stitching pipeline: gloss script + dictionaries -> pose sequence.

Each gloss is looked up, posed by forward kinematics, brought into the
canonical orientation, cropped of rest-pose dwell, resampled to its duration
and given a face. Velocity-bounded transitions join consecutive signs, the
whole sequence is resampled to the summed durations, and a Butterworth
low-pass at the script's cutoff comes last.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from .dictionary import (
    EmbeddingTable,
    FaceDictionary,
    SignDictionary,
    Substituter,
    lookup,
    lookup_face,
)
from .dsp import MIN_FILTER_LENGTH, FilterSpec, butterworth_lowpass, resample_array, resample_linear
from .errors import DimensionError, FormatError, GeometryError, SignStitchError
from .skeleton import CanonicalSkeleton, PoseSequence, forward_kinematics, normalize_orientation


@dataclass(frozen=True)
class GlossScript:
    """One sequence's translation outputs: glosses, durations, face tokens, cutoff."""

    glosses: tuple[str, ...]
    durations_frames: tuple[int, ...]
    face_tokens: tuple[int, ...]
    cutoff_hz: float
    fps: float
    id: str = "seq"

    def __post_init__(self):
        object.__setattr__(self, "glosses", tuple(self.glosses))
        object.__setattr__(self, "durations_frames", tuple(int(d) for d in self.durations_frames))
        object.__setattr__(self, "face_tokens", tuple(int(t) for t in self.face_tokens))
        g = len(self.glosses)
        if g < 1:
            raise FormatError(f"script {self.id!r}: no glosses")
        if len(self.durations_frames) != g or len(self.face_tokens) != g:
            raise FormatError(f"script {self.id!r}: glosses, durations and face tokens differ in length")
        if any(d < 2 for d in self.durations_frames):
            raise FormatError(f"script {self.id!r}: every duration must be >= 2 frames")
        if not self.fps > 0 or not 0 < self.cutoff_hz < self.fps / 2:
            raise FormatError(f"script {self.id!r}: cutoff must lie in (0, fps/2)")

    @property
    def total_frames(self) -> int:
        return sum(self.durations_frames)

    @classmethod
    def from_dict(cls, d: dict) -> "GlossScript":
        try:
            return cls(
                glosses=d["glosses"],
                durations_frames=d["durations_frames"],
                face_tokens=d["face_tokens"],
                cutoff_hz=float(d["cutoff_hz"]),
                fps=float(d["fps"]),
                id=str(d.get("id", "seq")),
            )
        except KeyError as exc:
            raise FormatError(f"script record missing field {exc}") from None

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "glosses": list(self.glosses),
            "durations_frames": list(self.durations_frames),
            "face_tokens": list(self.face_tokens),
            "cutoff_hz": self.cutoff_hz,
            "fps": self.fps,
        }


@dataclass(frozen=True)
class CropParams:
    alpha_crop: float = 0.05

    def __post_init__(self):
        if not 0 < self.alpha_crop < 0.5:
            raise ValueError(f"alpha_crop must lie in (0, 0.5), got {self.alpha_crop}")


@dataclass
class CropResult:
    poses: PoseSequence
    start: int
    end: int  # inclusive
    still: bool = False


def _threshold_index(steps: np.ndarray, alpha: float) -> int:
    total = steps.sum()
    cum = np.cumsum(steps)
    return int(np.argmax(cum >= alpha * total))


def crop_sign(poses: PoseSequence, skeleton: CanonicalSkeleton, params: CropParams = CropParams()) -> CropResult:
    """Trim rest-pose dwell at both ends using the dominant wrist's travelled path.

    The sign starts at the frame from which the cumulative wrist travel first
    reaches ``alpha_crop`` of its total; the end is found the same way on the
    reversed sequence.
    """
    if len(poses) < 3:
        return CropResult(poses, 0, len(poses) - 1, still=False)
    wrist = poses.frames[:, skeleton.anchor("dominant_wrist")]
    steps = np.linalg.norm(np.diff(wrist, axis=0), axis=1)
    if not steps.sum() > 0:
        return CropResult(poses, 0, len(poses) - 1, still=True)
    start = _threshold_index(steps, params.alpha_crop)
    end = len(poses) - 1 - _threshold_index(steps[::-1], params.alpha_crop)
    if end - start < 1:
        end = min(start + 1, len(poses) - 1)
        start = end - 1
    return CropResult(poses.with_frames(poses.frames[start : end + 1].copy()), start, end)


def rigid_fit(src: np.ndarray, dst: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Least-squares rotation ``R`` and translation ``t`` with ``src @ R.T + t ~ dst``."""
    cs, cd = src.mean(axis=0), dst.mean(axis=0)
    a, b = src - cs, dst - cd
    for pts, label in ((a, "face"), (b, "body")):
        sv = np.linalg.svd(pts, compute_uv=False)
        if sv[0] == 0 or sv[1] <= 1e-9 * sv[0]:
            raise GeometryError(f"{label} anchors are collinear or coincident")
    u, _, vt = np.linalg.svd(a.T @ b)
    d = np.sign(np.linalg.det(vt.T @ u.T))
    r = vt.T @ np.diag([1.0, 1.0, d]) @ u.T
    return r, cd - cs @ r.T


@dataclass
class AttachResult:
    poses: PoseSequence
    max_residual: float


def attach_face(
    body: PoseSequence, face: np.ndarray, skeleton: CanonicalSkeleton, face_anchors=(0, 1, 2)
) -> AttachResult:
    """Resample the face to the body's length and rigidly fit it onto the head anchors."""
    if not skeleton.has_face_anchors:
        raise FormatError("skeleton lacks head_left/head_right anchors needed to attach faces")
    face = np.asarray(face, dtype=float)
    if len(face) != len(body):
        face = resample_array(face, len(body))
    body_idx = [skeleton.anchor(a) for a in ("head_root", "head_left", "head_right")]
    fa = list(face_anchors)
    out_face = np.empty_like(face)
    worst = 0.0
    for u in range(len(body)):
        try:
            r, t = rigid_fit(face[u, fa], body.frames[u, body_idx])
        except GeometryError as exc:
            raise GeometryError(f"frame {u}: {exc}", frame=u) from None
        out_face[u] = face[u] @ r.T + t
        resid = np.sqrt(np.mean(np.sum((out_face[u, fa] - body.frames[u, body_idx]) ** 2, axis=1)))
        worst = max(worst, float(resid))
    names = None
    if body.joint_names is not None:
        names = list(body.joint_names) + [f"face_{i}" for i in range(face.shape[1])]
    frames = np.concatenate([body.frames, out_face], axis=1)
    return AttachResult(PoseSequence(frames, body.fps, names), worst)


@dataclass
class PlanEntry:
    """Transition decision at one sign boundary."""

    frames: int
    v1: float
    v2: float
    delta: float
    clamped: bool

    def to_dict(self) -> dict:
        return asdict(self)


def transition_speed(entry: PlanEntry, fps: float) -> float:
    return fps * entry.delta / entry.frames


def mean_speed(track: np.ndarray, fps: float) -> float:
    """Mean per-second speed along a (K+1, 3) point track."""
    if len(track) < 2:
        return 0.0
    return float(np.mean(np.linalg.norm(np.diff(track, axis=0), axis=1)) * fps)


def _std3(v1: float, s: float, v2: float) -> float:
    return float(np.std([v1, s, v2]))


def choose_stitch_frames(
    v1: float, v2: float, delta: float, fps: float, max_frames: int | None = None
) -> tuple[int, bool]:
    """Frame count ``u`` whose speed ``fps*delta/u`` lies strictly between v1 and v2.

    Among feasible ``u`` the one minimizing ``std(v1, fps*delta/u, v2)`` wins
    (ties to the smaller ``u``). Without a feasible ``u`` the speed closest to
    ``[min, max]`` is taken and the plan is flagged as clamped; ``max_frames``
    (default one second) bounds that fallback when both velocities are zero.
    """
    lo, hi = min(v1, v2), max(v1, v2)
    dist = fps * delta
    if dist <= 0:
        return 1, True

    def inside(u):
        return lo < dist / u < hi

    if lo < hi:
        u_min = max(1, math.floor(dist / hi) - 1)
        while dist / u_min >= hi:
            u_min += 1
        if dist / u_min > lo:
            if lo > 0:
                u_max = math.ceil(dist / lo) + 1
                while dist / u_max <= lo:
                    u_max -= 1
            else:
                u_max = math.inf
            u_star = dist / (0.5 * (v1 + v2))
            cands = {u_min, math.floor(u_star), math.ceil(u_star)}
            if u_max != math.inf:
                cands.add(u_max)
            cands = sorted(min(max(c, u_min), u_max) for c in cands)
            cands = [c for c in cands if inside(c)]
            best = min(cands, key=lambda c: (_std3(v1, dist / c, v2), c))
            return int(best), False

    cap = max(1, max_frames if max_frames is not None else math.ceil(fps))

    def gap(u):
        s = dist / u
        return max(lo - s, s - hi, 0.0)

    cands = {1, cap}
    for bound in (lo, hi):
        if bound > 0:
            cands.update({math.floor(dist / bound), math.ceil(dist / bound)})
    cands = sorted(c for c in cands if c >= 1)
    best = min(cands, key=lambda c: (gap(c), c))
    return int(best), True


def plan_transition(
    sign_a: PoseSequence,
    sign_b: PoseSequence,
    skeleton: CanonicalSkeleton,
    fps: float,
    window: int = 3,
    max_frames: int | None = None,
) -> PlanEntry:
    w = skeleton.anchor("dominant_wrist")
    a, b = sign_a.frames[:, w], sign_b.frames[:, w]
    ka, kb = min(window, len(a) - 1), min(window, len(b) - 1)
    v1 = mean_speed(a[len(a) - 1 - ka :], fps)
    v2 = mean_speed(b[: kb + 1], fps)
    delta = float(np.linalg.norm(b[0] - a[-1]))
    u, clamped = choose_stitch_frames(v1, v2, delta, fps, max_frames)
    return PlanEntry(u, v1, v2, delta, clamped)


def synthesize_transition(sign_a: PoseSequence, sign_b: PoseSequence, entry: PlanEntry) -> PoseSequence:
    """``entry.frames`` straight-line frames strictly between the boundary poses."""
    if sign_a.n_joints != sign_b.n_joints:
        raise DimensionError("boundary poses have different joint counts")
    a, b = sign_a.frames[-1], sign_b.frames[0]
    f = (np.arange(1, entry.frames + 1) / (entry.frames + 1))[:, None, None]
    return PoseSequence((1.0 - f) * a + f * b, sign_a.fps, sign_a.joint_names)


def assemble(
    signs: list[PoseSequence], transitions: list[PoseSequence], total_frames: int, fps: float
) -> PoseSequence:
    """Interleave signs and transitions, then resample to ``total_frames``."""
    if len(transitions) != len(signs) - 1:
        raise ValueError("need exactly one transition per boundary")
    layout = signs[0].n_joints
    parts = []
    for i, s in enumerate(signs):
        if s.n_joints != layout:
            raise DimensionError(f"sign {i} has {s.n_joints} joints, expected {layout}")
        parts.append(s.frames)
        if i < len(transitions):
            if transitions[i].n_joints != layout:
                raise DimensionError(f"transition {i} has {transitions[i].n_joints} joints, expected {layout}")
            parts.append(transitions[i].frames)
    joined = np.concatenate(parts, axis=0)
    out = joined if len(joined) == total_frames else resample_array(joined, total_frames)
    return PoseSequence(out, fps, signs[0].joint_names)


@dataclass(frozen=True)
class StitchParams:
    alpha_crop: float = 0.05
    velocity_window: int = 3
    similarity_floor: float = 0.0
    max_transition_frames: int | None = None
    apply_filter: bool = True

    def __post_init__(self):
        CropParams(self.alpha_crop)
        if self.velocity_window < 1:
            raise ValueError("velocity_window must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)


class PipelineError(SignStitchError):
    """A pipeline step failed for a specific gloss."""

    def __init__(self, index: int, gloss: str, cause: Exception):
        super().__init__(f"gloss #{index} {gloss!r}: {cause}")
        self.index = index
        self.gloss = gloss
        self.cause = cause


@dataclass
class PipelineResult:
    poses: PoseSequence
    plan: list[PlanEntry]
    report: dict
    unfiltered: PoseSequence
    prepared: list[PoseSequence] = field(default_factory=list, repr=False)

    @property
    def clamped_boundaries(self) -> list[int]:
        return [i for i, e in enumerate(self.plan) if e.clamped]


def prepare_sign(
    angles,
    skeleton: CanonicalSkeleton,
    duration: int,
    fps: float,
    params: StitchParams,
    face: np.ndarray | None = None,
    face_anchors=(0, 1, 2),
):
    """Pose, orient, crop, resample and face one gloss.

    Returns (poses, crop, face residual or None).
    """
    poses = normalize_orientation(forward_kinematics(skeleton, angles), skeleton)
    crop = crop_sign(poses, skeleton, CropParams(params.alpha_crop))
    body = resample_linear(crop.poses, duration)
    body = PoseSequence(body.frames, fps, body.joint_names)
    residual = None
    if face is not None:
        attached = attach_face(body, face, skeleton, face_anchors)
        body, residual = attached.poses, attached.max_residual
    return body, crop, residual


def run_pipeline(
    script: GlossScript,
    signs: SignDictionary,
    faces: FaceDictionary | None,
    embeddings: EmbeddingTable | None,
    skeleton: CanonicalSkeleton,
    params: StitchParams = StitchParams(),
) -> PipelineResult:
    if signs.skeleton_version != skeleton.version:
        raise FormatError(
            f"sign dictionary built for skeleton {signs.skeleton_version!r}, got {skeleton.version!r}"
        )
    substituter = Substituter.build(signs, embeddings) if embeddings is not None else None
    fps = script.fps
    prepared, per_gloss = [], []
    for i, (gloss, dur, token) in enumerate(zip(script.glosses, script.durations_frames, script.face_tokens)):
        try:
            angles, res = lookup(signs, embeddings, gloss, params.similarity_floor, substituter=substituter)
            face = lookup_face(faces, token) if faces is not None else None
            body, crop, residual = prepare_sign(
                angles, skeleton, dur, fps, params, face, faces.anchors if faces is not None else (0, 1, 2)
            )
        except (SignStitchError, IndexError, ValueError) as exc:
            raise PipelineError(i, gloss, exc) from exc
        prepared.append(body)
        per_gloss.append(
            {
                "index": i,
                "gloss": gloss,
                "resolution": res.to_dict(),
                "dictionary_frames": len(angles),
                "crop": {"start": crop.start, "end": crop.end, "still": crop.still},
                "frames": dur,
                "face_token": token if faces is not None else None,
                "face_residual": residual,
            }
        )

    plan, transitions = [], []
    for a, b in zip(prepared[:-1], prepared[1:]):
        entry = plan_transition(a, b, skeleton, fps, params.velocity_window, params.max_transition_frames)
        plan.append(entry)
        transitions.append(synthesize_transition(a, b, entry))
    for entry in plan:
        if not entry.clamped:
            s = transition_speed(entry, fps)
            assert min(entry.v1, entry.v2) < s < max(entry.v1, entry.v2), entry

    assembled = assemble(prepared, transitions, script.total_frames, fps)
    filtered = assembled
    filter_applied = False
    if params.apply_filter:
        if len(assembled) >= MIN_FILTER_LENGTH:
            filtered = butterworth_lowpass(assembled, FilterSpec(script.cutoff_hz, fps))
            filter_applied = True
        else:
            warnings.warn(f"{script.id}: {len(assembled)} frames, filter skipped", stacklevel=2)

    report = {
        "id": script.id,
        "glosses": per_gloss,
        "substitutions": [g["index"] for g in per_gloss if g["resolution"]["kind"] == "substituted"],
        "boundaries": [e.to_dict() for e in plan],
        "clamped_boundaries": [i for i, e in enumerate(plan) if e.clamped],
        "filter": {"cutoff_hz": script.cutoff_hz, "applied": filter_applied},
        "frames": len(filtered),
    }
    return PipelineResult(filtered, plan, report, assembled, prepared)
