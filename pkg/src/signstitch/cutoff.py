"""Ground-truth cutoff estimation by spectral comparison.

A stitched sequence is low-passed at every candidate cutoff; each result is
compared to the original sequence's magnitude spectrum through an
intersection (spectrum shared with the original) and a set difference
(spectrum present in the filtered candidate but absent from the original).
Smoothing splines are fitted to both curves and the cutoff maximizing
``intersection - difference`` is returned.

With ``literal_difference=True`` the set difference is taken the other way
round (original minus candidate). Both terms then favour larger cutoffs, so
the choice is simply the point where the objective stops improving.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import make_smoothing_spline

from .dsp import FilterSpec, butterworth_lowpass
from .errors import DimensionError, MonotonicityError, SplineError
from .skeleton import PoseSequence

GRID_MIN_HZ = 1.0
GRID_MAX_HZ = 25.0
EVAL_STEP_HZ = 0.01
#: Filter settling, in cycles of the lowest candidate cutoff, tolerated as
#: finite-length leakage when checking that I(c) and Dset(c) never decrease.
SETTLE_CYCLES = 0.25


@dataclass
class SpectralComparison:
    grid: np.ndarray
    intersection: np.ndarray
    difference: np.ndarray
    chosen_cutoff: float
    eval_grid: np.ndarray | None = None
    objective: np.ndarray | None = None

    def to_dict(self) -> dict:
        return {
            "chosen_cutoff": self.chosen_cutoff,
            "grid": self.grid.tolist(),
            "I": self.intersection.tolist(),
            "Dset": self.difference.tolist(),
        }


def _check_pair(p: PoseSequence, q: PoseSequence) -> None:
    if p.frames.shape != q.frames.shape:
        raise DimensionError(f"sequence shapes differ: {p.frames.shape} vs {q.frames.shape}")
    if abs(p.fps - q.fps) > 1e-9 * p.fps:
        raise DimensionError(f"frame rates differ: {p.fps} vs {q.fps}")


def hann_periodic(n: int) -> np.ndarray:
    """Periodic Hann taper; an exact-bin sinusoid leaks only into its two neighbours."""
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def channel_spectra(poses: PoseSequence, remove_mean: bool = True, taper: bool = True) -> np.ndarray:
    """(bins, channels) rFFT magnitudes of every coordinate channel.

    Channels are mean-removed (DC bin dropped) and Hann-tapered by default.
    """
    x = poses.frames.reshape(len(poses), -1)
    if remove_mean:
        x = x - x.mean(axis=0)
    if taper:
        x = x * hann_periodic(len(x))[:, None]
    mags = np.abs(np.fft.rfft(x, axis=0))
    return mags[1:] if remove_mean else mags


def spectral_intersection(p: PoseSequence, q: PoseSequence, remove_mean: bool = True) -> float:
    """Sum over channels and bins of ``min(|FT(p)|, |FT(q)|)``."""
    _check_pair(p, q)
    return float(np.minimum(channel_spectra(p, remove_mean), channel_spectra(q, remove_mean)).sum())


def spectral_difference(
    p: PoseSequence, q: PoseSequence, remove_mean: bool = True, literal: bool = False
) -> float:
    """Sum of ``max(0, |FT(q)| - |FT(p)|)``: spectrum in ``q`` missing from ``p``.

    ``literal=True`` swaps the direction to ``max(0, |FT(p)| - |FT(q)|)``.
    """
    _check_pair(p, q)
    a, b = channel_spectra(p, remove_mean), channel_spectra(q, remove_mean)
    if literal:
        a, b = b, a
    return float(np.maximum(0.0, b - a).sum())


def cutoff_grid(fps: float, step_hz: float = 0.5) -> np.ndarray:
    """Candidate cutoffs from 1 Hz to 25 Hz, shrunk below Nyquist when needed."""
    if not step_hz > 0:
        raise ValueError("grid step must be > 0")
    top = GRID_MAX_HZ
    nyquist = fps / 2.0
    if top >= nyquist:
        top = 0.99 * nyquist
        warnings.warn(f"fps {fps}: cutoff grid top lowered to {top:.3f} Hz (below Nyquist)", stacklevel=2)
    n = int(np.floor((top - GRID_MIN_HZ) / step_hz + 1e-9))
    grid = GRID_MIN_HZ + step_hz * np.arange(n + 1)
    if top - grid[-1] > 1e-9:
        grid = np.append(grid, top)
    return grid


def monotone_tolerance(ref_mass: float, n_frames: int, fps: float, lowest_cutoff: float) -> float:
    """Largest decrease accepted between neighbouring grid points.

    The step-initialized filter needs a fraction of a cycle of its cutoff to
    settle; over that stretch the finite-length spectrum is not a pure
    attenuation of the input, so the allowance is that stretch's share of the
    original's total spectral magnitude.
    """
    duration = n_frames / fps
    return ref_mass * min(1.0, SETTLE_CYCLES / (lowest_cutoff * duration))


def _check_monotone(values: np.ndarray, label: str, tol: float) -> None:
    drops = values[:-1] - values[1:]
    if np.any(drops > tol):
        k = int(np.argmax(drops))
        raise MonotonicityError(f"{label} decreases by {drops[k]:.3g} between grid points {k} and {k + 1}")


def estimate_cutoff(
    original: PoseSequence,
    stitched: PoseSequence,
    grid_step_hz: float = 0.5,
    literal_difference: bool = False,
    check_monotone: bool = True,
    tie_rtol: float = 1e-3,
) -> SpectralComparison:
    """Pick the cutoff that best trades retained original spectrum against spurious energy.

    ``tie_rtol`` treats objective values within that fraction of the objective's
    range from the maximum as ties, resolved toward the smallest cutoff.
    """
    _check_pair(original, stitched)
    grid = cutoff_grid(original.fps, grid_step_hz)
    if len(grid) < 4:
        raise SplineError(f"cutoff grid has {len(grid)} points; at least 4 needed for a cubic spline")

    ref = channel_spectra(original)
    inter = np.empty(len(grid))
    diff = np.empty(len(grid))
    for k, c in enumerate(grid):
        q = channel_spectra(butterworth_lowpass(stitched, FilterSpec(float(c), stitched.fps)))
        inter[k] = np.minimum(ref, q).sum()
        diff[k] = np.maximum(0.0, (ref - q) if literal_difference else (q - ref)).sum()

    if check_monotone:
        tol = monotone_tolerance(float(ref.sum()), len(original), original.fps, float(grid[0]))
        _check_monotone(inter, "intersection I(c)", tol)
        if not literal_difference:
            _check_monotone(diff, "set difference Dset(c)", tol)

    i_hat = make_smoothing_spline(grid, inter)
    d_hat = make_smoothing_spline(grid, diff)
    n_eval = int(round((grid[-1] - grid[0]) / EVAL_STEP_HZ)) + 1
    fine = np.linspace(grid[0], grid[-1], n_eval)
    objective = i_hat(fine) - d_hat(fine)
    span = float(objective.max() - objective.min())
    best = objective.max()
    chosen = round(float(fine[np.flatnonzero(objective >= best - tie_rtol * span)[0]]), 6)
    return SpectralComparison(grid, inter, diff, chosen, fine, objective)
