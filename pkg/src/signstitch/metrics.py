"""Dynamic-time-warping mean joint error (DTW-MJE)."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError, DimensionError
from .skeleton import PoseSequence


@dataclass
class DtwResult:
    cost: float
    path: list[tuple[int, int]]
    total: float

    @property
    def path_length(self) -> int:
        return len(self.path)


def frame_costs(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """(Ua, Ub) mean-over-joints Euclidean distance between every frame pair."""
    diff = a[:, None, :, :] - b[None, :, :, :]
    return np.linalg.norm(diff, axis=-1).mean(axis=-1)


def dtw_path(cost: np.ndarray) -> tuple[float, list[tuple[int, int]]]:
    """Minimum-total-cost monotone path from (0, 0) to (n-1, m-1).

    Steps are (1, 0), (0, 1) and (1, 1). Equal totals are broken toward the
    shorter path, then toward the diagonal step.
    """
    n, m = cost.shape
    acc = np.full((n + 1, m + 1), np.inf)
    length = np.zeros((n + 1, m + 1), dtype=np.int64)
    acc[0, 0] = 0.0
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            cands = (
                (acc[i - 1, j - 1], length[i - 1, j - 1]),
                (acc[i - 1, j], length[i - 1, j]),
                (acc[i, j - 1], length[i, j - 1]),
            )
            best, best_len = min(cands)
            acc[i, j] = cost[i - 1, j - 1] + best
            length[i, j] = best_len + 1

    path = [(n - 1, m - 1)]
    i, j = n, m
    while (i, j) != (1, 1):
        moves = ((i - 1, j - 1), (i - 1, j), (i, j - 1))
        i, j = min(moves, key=lambda ij: (acc[ij], length[ij]))
        path.append((i - 1, j - 1))
    path.reverse()
    return float(acc[n, m]), path


def dtw_mje(a: PoseSequence, b: PoseSequence) -> DtwResult:
    """Total cost of the optimal warping path divided by its length."""
    if len(a) == 0 or len(b) == 0:
        raise ArgumentError("DTW needs non-empty sequences")
    if a.n_joints != b.n_joints:
        raise DimensionError(f"joint layouts differ: {a.n_joints} vs {b.n_joints}")
    total, path = dtw_path(frame_costs(a.frames, b.frames))
    return DtwResult(total / len(path), path, total)
