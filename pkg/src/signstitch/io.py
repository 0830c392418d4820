"""Script and pose file formats.

Script file: JSON Lines, one record per sequence::

    {"id": "s1", "glosses": ["HAUS", ...], "durations_frames": [12, ...],
     "face_tokens": [0, ...], "cutoff_hz": 6.0, "fps": 25}

Pose file: one JSON document per sequence::

    {"format": "signstitch-poses", "id": "s1", "fps": 25,
     "joint_names": [...], "frames": [[[x, y, z], ...], ...],
     "tool_version": "...", "params": {...}}

A provenance sidecar ``<id>.provenance.json`` sits next to each pose file.
"""
from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .dictionary import read_jsonl
from .errors import FormatError
from .skeleton import PoseSequence
from .stitcher import GlossScript

POSES_FORMAT = "signstitch-poses"


def load_scripts(path: str | Path) -> list[GlossScript]:
    scripts = [GlossScript.from_dict(rec) for rec in read_jsonl(path)]
    ids = [s.id for s in scripts]
    dupes = sorted({i for i in ids if ids.count(i) > 1})
    if dupes:
        raise FormatError(f"{path}: duplicate script ids {dupes}")
    return scripts


def save_scripts(scripts: list[GlossScript], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for s in scripts:
            fh.write(json.dumps(s.to_dict()) + "\n")


def dumps(doc) -> str:
    return json.dumps(doc, indent=None, separators=(",", ":"), sort_keys=True, allow_nan=False) + "\n"


def write_atomic(path: str | Path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def pose_document(poses: PoseSequence, seq_id: str, extra: dict | None = None) -> dict:
    names = poses.joint_names or [f"j{i}" for i in range(poses.n_joints)]
    doc = {
        "format": POSES_FORMAT,
        "id": seq_id,
        "fps": poses.fps,
        "joint_names": list(names),
        "frames": poses.frames.tolist(),
    }
    if extra:
        doc.update(extra)
    return doc


def save_poses(poses: PoseSequence, path: str | Path, seq_id: str, extra: dict | None = None) -> None:
    write_atomic(path, dumps(pose_document(poses, seq_id, extra)))


def load_poses(path: str | Path) -> tuple[str, PoseSequence]:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    try:
        frames = np.asarray(doc["frames"], dtype=float)
        if frames.ndim != 3:
            raise FormatError(f"{path}: frames must be a list of [J x 3] lists")
        return str(doc["id"]), PoseSequence(frames, float(doc["fps"]), doc.get("joint_names"))
    except KeyError as exc:
        raise FormatError(f"{path}: missing field {exc}") from None
