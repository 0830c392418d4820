"""Deterministic toy dictionaries for demos and tests.

Signs dwell in a resting pose, raise the dominant arm with a smooth ramp,
oscillate, and settle into another resting pose. Each sign also carries a random
global body rotation so orientation normalization has something to undo.
"""
from __future__ import annotations

import zlib

import numpy as np

from .dictionary import EmbeddingTable, FaceDictionary, SignDictionary
from .skeleton import CanonicalSkeleton, JointAngleSequence


def _rng(key: str, seed: int) -> np.random.Generator:
    return np.random.default_rng([zlib.crc32(key.encode("utf-8")), seed])


def _ramp(n: int) -> np.ndarray:
    return 0.5 - 0.5 * np.cos(np.linspace(0.0, np.pi, n))


def toy_sign(skeleton: CanonicalSkeleton, key: str, fps: float = 25.0, seed: int = 0) -> JointAngleSequence:
    rng = _rng(key, seed)
    dwell_in, dwell_out = rng.integers(3, 8, size=2)
    ramp_in, hold, ramp_out = rng.integers(6, 12), rng.integers(10, 25), rng.integers(6, 12)
    n = int(dwell_in + ramp_in + hold + ramp_out + dwell_out)
    # dwell levels differ per sign so consecutive signs leave a gap to bridge
    lo_in, lo_out = rng.uniform(0.0, 0.6, size=2)
    env = np.full(n, lo_out)
    a = dwell_in
    env[:a] = lo_in
    env[a : a + ramp_in] = lo_in + (1.0 - lo_in) * _ramp(ramp_in)
    env[a + ramp_in : a + ramp_in + hold] = 1.0
    env[a + ramp_in + hold : a + ramp_in + hold + ramp_out] = lo_out + (1.0 - lo_out) * _ramp(ramp_out)[::-1]

    angles = np.zeros((n, skeleton.n_joints, 3))
    angles[:, 0] = rng.uniform(-0.4, 0.4, 3)
    wrist = skeleton.anchor("dominant_wrist")
    elbow = skeleton.joints[wrist].parent
    shoulder = skeleton.joints[elbow].parent
    t = np.arange(n) / fps
    target_sh = rng.uniform([-1.2, -0.3, -0.6], [-0.3, 0.3, 0.6])
    target_el = rng.uniform([-1.8, -0.2, -0.2], [-0.6, 0.2, 0.2])
    freq, amp = rng.uniform(1.0, 3.0), rng.uniform(0.05, 0.3)
    wiggle = amp * np.sin(2 * np.pi * freq * t + rng.uniform(0, 2 * np.pi))
    angles[:, shoulder] = env[:, None] * target_sh
    angles[:, elbow] = env[:, None] * target_el
    angles[:, elbow, 0] += env * wiggle
    angles[:, wrist] = env[:, None] * rng.uniform(-0.5, 0.5, 3)
    return JointAngleSequence(angles, fps)


def toy_sign_dictionary(
    skeleton: CanonicalSkeleton, keys, fps: float = 25.0, seed: int = 0, source: str = "isolated"
) -> SignDictionary:
    entries = {k: toy_sign(skeleton, k, fps, seed) for k in keys}
    return SignDictionary(entries, source, skeleton.version)


def toy_face_dictionary(n_tokens: int = 4, n_frames: int = 10, n_points: int = 9, seed: int = 0) -> FaceDictionary:
    """Faces in a head-local frame; points 0, 1, 2 are head root, left and right."""
    rng = np.random.default_rng(seed)
    base = np.zeros((n_points, 3))
    # matches upper_body_skeleton's ear offsets from the head joint
    base[1] = (0.064, 0.048, 0.0)
    base[2] = (-0.064, 0.048, 0.0)
    base[3:] = rng.uniform([-0.05, -0.06, 0.05], [0.05, 0.06, 0.09], (n_points - 3, 3))
    entries = np.empty((n_tokens, n_frames, n_points, 3))
    phase = np.linspace(0.0, 1.0, n_frames)
    for k in range(n_tokens):
        motion = rng.normal(scale=0.01, size=(n_points, 3))
        motion[:3] = 0.0
        entries[k] = base + np.sin(np.pi * phase)[:, None, None] * motion
    return FaceDictionary(entries, (0, 1, 2))


def toy_embeddings(words, dim: int = 16, seed: int = 0) -> EmbeddingTable:
    rng = np.random.default_rng(seed)
    return EmbeddingTable({w: rng.normal(size=dim) for w in words})
