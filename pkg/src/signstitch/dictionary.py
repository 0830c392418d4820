"""Sign (DS) and face (DF) dictionaries, gloss normalization and substitution."""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .errors import DimensionError, FormatError, InvalidGlossError, UnresolvableGlossError
from .skeleton import JointAngleSequence

SIGNS_FORMAT = "signstitch-signs"
FACES_FORMAT = "signstitch-faces"
SOURCES = ("isolated", "continuous")

# One or more trailing variant markers such as "1", "2B" or "1A".
_VARIANT_SUFFIX = re.compile(r"(?:\d+[A-Z]?)+$")
_WS = re.compile(r"\s+")


def normalize_gloss(raw: str, exceptions: Mapping[str, str] | None = None) -> str:
    """Uppercase, collapse whitespace and strip trailing variant suffixes.

    ``exceptions`` maps a normalized form onto a lemma, which is itself
    normalized (without the table) before being returned.

    >>> normalize_gloss(" haus1a ")
    'HAUS'
    """
    if raw is None or not raw.strip():
        raise InvalidGlossError("gloss is empty")
    s = _WS.sub(" ", raw).strip().upper()
    while True:
        t = _VARIANT_SUFFIX.sub("", s).rstrip()
        if t == s:
            break
        s = t
    if not s:
        raise InvalidGlossError(f"gloss {raw!r} is empty after normalization")
    if exceptions and s in exceptions:
        return normalize_gloss(exceptions[s])
    return s


@dataclass
class SignDictionary:
    entries: dict[str, JointAngleSequence]
    source: str = "isolated"
    skeleton_version: str = "1"

    def __post_init__(self):
        for key, seq in self.entries.items():
            if not key or key != key.upper() or key != key.strip():
                raise FormatError(f"dictionary key {key!r} must be non-empty and uppercase")
            if len(seq) < 2:
                raise FormatError(f"entry {key!r} has {len(seq)} frame(s); at least 2 required")
        if self.source not in SOURCES:
            raise FormatError(f"source must be one of {SOURCES}, got {self.source!r}")

    def __len__(self):
        return len(self.entries)

    def __contains__(self, key):
        return key in self.entries

    def keys(self) -> list[str]:
        return sorted(self.entries)


@dataclass
class FaceDictionary:
    """Decoded face expressions, shape (N_f, U_f, J_face, 3)."""

    entries: np.ndarray
    anchors: tuple[int, int, int] = (0, 1, 2)

    def __post_init__(self):
        e = np.array(self.entries, dtype=float)
        if e.ndim != 4 or e.shape[3] != 3:
            raise DimensionError(f"face entries must have shape (N_f, U_f, J_face, 3), got {e.shape}")
        if e.shape[0] < 1 or e.shape[1] < 2:
            raise FormatError("face dictionary needs >= 1 entry of >= 2 frames")
        self.anchors = tuple(int(a) for a in self.anchors)
        if len(self.anchors) != 3 or not all(0 <= a < e.shape[2] for a in self.anchors):
            raise FormatError(f"face anchors {self.anchors} out of range for {e.shape[2]} points")
        e.flags.writeable = False
        self.entries = e

    def __len__(self):
        return self.entries.shape[0]

    @property
    def n_frames(self) -> int:
        return self.entries.shape[1]

    @property
    def n_points(self) -> int:
        return self.entries.shape[2]


def lookup_face(faces: FaceDictionary, token: int) -> np.ndarray:
    if not 0 <= token < len(faces):
        raise IndexError(f"face token {token} out of range 0..{len(faces) - 1}")
    return faces.entries[token]


class EmbeddingTable:
    """Token -> vector store with case-tolerant lookup."""

    def __init__(self, vectors: Mapping[str, Iterable[float]]):
        self.vectors: dict[str, np.ndarray] = {}
        self.dim = None
        for token, vec in vectors.items():
            v = np.asarray(vec, dtype=float)
            if self.dim is None:
                self.dim = v.size
            if v.ndim != 1 or v.size != self.dim:
                raise FormatError(f"embedding for {token!r} has dimension {v.size}, expected {self.dim}")
            if not np.all(np.isfinite(v)) or not np.linalg.norm(v) > 0:
                raise FormatError(f"embedding for {token!r} is zero or non-finite")
            self.vectors[token] = v
        self.dim = self.dim or 0

    def __len__(self):
        return len(self.vectors)

    def __contains__(self, token):
        return self.get(token) is not None

    def get(self, token: str) -> np.ndarray | None:
        for t in (token, token.lower(), token.upper(), token.capitalize()):
            if t in self.vectors:
                return self.vectors[t]
        return None

    def embed(self, text: str) -> np.ndarray | None:
        """Single token, or the mean of in-vocabulary words of a multi-word gloss."""
        v = self.get(text)
        if v is not None:
            return v
        found = [w for w in (self.get(t) for t in text.split()) if w is not None]
        if not found:
            return None
        return np.mean(found, axis=0)


def load_embeddings(path: str | Path) -> EmbeddingTable:
    """Read the plain-text ``count dim`` header + ``token v1 .. vdim`` format."""
    vectors = {}
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise FormatError("embedding file header must be 'count dim'")
        count, dim = int(header[0]), int(header[1])
        for lineno, line in enumerate(fh, start=2):
            parts = line.rstrip("\n").split()
            if not parts:
                continue
            if len(parts) != dim + 1:
                raise FormatError(f"line {lineno}: expected token + {dim} floats")
            vectors[parts[0]] = [float(p) for p in parts[1:]]
    if len(vectors) != count:
        raise FormatError(f"header declares {count} vectors, file holds {len(vectors)}")
    return EmbeddingTable(vectors)


def save_embeddings(table: EmbeddingTable, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{len(table)} {table.dim}\n")
        for token, v in table.vectors.items():
            fh.write(token + " " + " ".join(repr(float(x)) for x in v) + "\n")


@dataclass(frozen=True)
class Resolution:
    """How a gloss was resolved: ``exact``, ``normalized`` or ``substituted``."""

    kind: str
    query: str
    key: str
    similarity: float | None = None

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "query": self.query, "key": self.key}
        if self.similarity is not None:
            d["similarity"] = self.similarity
        return d


@dataclass
class Substituter:
    """Cosine nearest-neighbour search over the dictionary keys.

    Keys with no embedding are skipped. Exact similarity ties go to the
    lexicographically smallest key.
    """

    keys: list[str]
    matrix: np.ndarray = field(repr=False)

    @classmethod
    def build(cls, signs: SignDictionary, embeddings: EmbeddingTable) -> "Substituter":
        keys, rows = [], []
        for key in signs.keys():
            v = embeddings.embed(key)
            if v is not None:
                keys.append(key)
                rows.append(v / np.linalg.norm(v))
        matrix = np.array(rows) if rows else np.zeros((0, embeddings.dim))
        return cls(keys, matrix)

    def nearest(self, query: np.ndarray) -> tuple[str, float] | None:
        if not self.keys:
            return None
        sims = self.matrix @ (query / np.linalg.norm(query))
        best = sims.max()
        # keys are sorted, so the first maximum is the smallest key
        j = int(np.flatnonzero(sims == best)[0])
        return self.keys[j], float(best)


def lookup(
    signs: SignDictionary,
    embeddings: EmbeddingTable | None,
    gloss: str,
    similarity_floor: float = 0.0,
    exceptions: Mapping[str, str] | None = None,
    substituter: Substituter | None = None,
) -> tuple[JointAngleSequence, Resolution]:
    """Resolve ``gloss``: exact key, then normalized key, then embedding substitute."""
    if not len(signs):
        raise UnresolvableGlossError("sign dictionary is empty")
    if gloss in signs.entries:
        return signs.entries[gloss], Resolution("exact", gloss, gloss)
    norm = normalize_gloss(gloss, exceptions)
    if norm in signs.entries:
        return signs.entries[norm], Resolution("normalized", gloss, norm)
    if embeddings is None:
        raise UnresolvableGlossError(f"gloss {gloss!r} not in dictionary and no embeddings loaded")
    query = embeddings.embed(norm)
    if query is None:
        raise UnresolvableGlossError(f"gloss {gloss!r} not in dictionary and has no embedding")
    if substituter is None:
        substituter = Substituter.build(signs, embeddings)
    hit = substituter.nearest(query)
    if hit is None:
        raise UnresolvableGlossError(f"no dictionary key has an embedding to substitute {gloss!r}")
    key, sim = hit
    if sim < similarity_floor:
        raise UnresolvableGlossError(
            f"closest substitute for {gloss!r} is {key!r} at cosine {sim:.3f} < floor {similarity_floor}"
        )
    return signs.entries[key], Resolution("substituted", gloss, key, sim)


def _flat_frames(seq: JointAngleSequence) -> list[list[float]]:
    return seq.frames.reshape(len(seq), -1).tolist()


def save_sign_dictionary(signs: SignDictionary, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        header = {
            "format": SIGNS_FORMAT,
            "skeleton_version": signs.skeleton_version,
            "source": signs.source,
            "count": len(signs),
        }
        fh.write(json.dumps(header) + "\n")
        for key in signs.keys():
            seq = signs.entries[key]
            fh.write(json.dumps({"gloss": key, "fps": seq.fps, "frames": _flat_frames(seq)}) + "\n")


def read_jsonl(path: str | Path) -> list[dict]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from None
    return records


def load_sign_dictionary(path: str | Path) -> SignDictionary:
    records = read_jsonl(path)
    if not records or records[0].get("format") != SIGNS_FORMAT:
        raise FormatError(f"{path}: first record must be a {SIGNS_FORMAT!r} header")
    header, body = records[0], records[1:]
    entries = {}
    for rec in body:
        key = rec["gloss"]
        if key in entries:
            raise FormatError(f"{path}: duplicate gloss {key!r}")
        entries[key] = JointAngleSequence(np.asarray(rec["frames"], dtype=float), float(rec["fps"]))
    return SignDictionary(entries, header.get("source", "isolated"), str(header["skeleton_version"]))


def save_face_dictionary(faces: FaceDictionary, path: str | Path) -> None:
    n, u, j, _ = faces.entries.shape
    with open(path, "w", encoding="utf-8") as fh:
        header = {"format": FACES_FORMAT, "U_f": u, "J_face": j, "count": n, "anchors": list(faces.anchors)}
        fh.write(json.dumps(header) + "\n")
        for token in range(n):
            fh.write(json.dumps({"token": token, "data": faces.entries[token].ravel().tolist()}) + "\n")


def load_face_dictionary(path: str | Path) -> FaceDictionary:
    records = read_jsonl(path)
    if not records or records[0].get("format") != FACES_FORMAT:
        raise FormatError(f"{path}: first record must be a {FACES_FORMAT!r} header")
    header, body = records[0], records[1:]
    u, j = int(header["U_f"]), int(header["J_face"])
    by_token = {}
    for rec in body:
        data = np.asarray(rec["data"], dtype=float)
        if data.size != u * j * 3:
            raise FormatError(f"token {rec['token']}: expected {u * j * 3} values, got {data.size}")
        by_token[int(rec["token"])] = data.reshape(u, j, 3)
    if sorted(by_token) != list(range(len(by_token))):
        raise FormatError("face token ids must be dense 0..N_f-1")
    return FaceDictionary(np.stack([by_token[t] for t in range(len(by_token))]), tuple(header["anchors"]))
