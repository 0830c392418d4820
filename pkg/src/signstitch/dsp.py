"""Resampling, Butterworth low-pass filtering and magnitude spectra."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError, DataError, FilterSpecError
from .skeleton import PoseSequence

#: Sequences shorter than this are passed through the filter untouched.
MIN_FILTER_LENGTH = 8
#: Minimum length accepted by :func:`magnitude_spectrum`.
MIN_SPECTRUM_LENGTH = 8


class ShortSequenceWarning(UserWarning):
    """Raised (as a warning) when a sequence is too short to filter."""


@dataclass(frozen=True)
class ScalarSeries:
    samples: np.ndarray
    sample_rate: float

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float).ravel()
        if samples.size < 1:
            raise ArgumentError("series must hold at least one sample")
        if not np.all(np.isfinite(samples)):
            raise DataError("series contains non-finite samples")
        if not self.sample_rate > 0:
            raise ArgumentError("sample_rate must be > 0")
        object.__setattr__(self, "samples", samples)


@dataclass(frozen=True)
class FilterSpec:
    """Low-pass design target; ``cutoff_hz`` is the -3 dB point."""

    cutoff_hz: float
    sample_rate: float
    order: int = 4

    def __post_init__(self):
        if not self.sample_rate > 0:
            raise FilterSpecError("sample_rate must be > 0")
        if not 0 < self.cutoff_hz < self.sample_rate / 2:
            raise FilterSpecError(
                f"cutoff {self.cutoff_hz} Hz must lie in (0, {self.sample_rate / 2}) Hz (Nyquist)"
            )
        if self.order != 4:
            raise FilterSpecError("only 4th-order filters are supported")


def resample_indices(n_in: int, n_out: int) -> np.ndarray:
    """Fractional source positions for ``n_out`` uniform samples over [0, n_in-1]."""
    return np.linspace(0.0, n_in - 1, n_out)


def resample_array(x: np.ndarray, target_len: int) -> np.ndarray:
    """Linear interpolation of ``x`` along axis 0 to ``target_len`` samples."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    if n < 2:
        raise ArgumentError("need at least 2 samples to resample")
    if target_len < 2:
        raise ArgumentError(f"target_len must be >= 2, got {target_len}")
    t = resample_indices(n, target_len)
    i0 = np.minimum(np.floor(t).astype(int), n - 2)
    frac = (t - i0).reshape((-1,) + (1,) * (x.ndim - 1))
    # (1-f)*a + f*b keeps both endpoints bit-exact.
    return (1.0 - frac) * x[i0] + frac * x[i0 + 1]


def resample_linear(poses: PoseSequence, target_len: int) -> PoseSequence:
    if target_len == len(poses):
        return poses.with_frames(poses.frames.copy())
    return poses.with_frames(resample_array(poses.frames, target_len))


def butterworth_sos(spec: FilterSpec) -> np.ndarray:
    """Second-order sections ``[b0, b1, b2, 1, a1, a2]`` of the digital low-pass.

    The analog prototype cutoff is prewarped, ``tan(pi * fc / fs)``, so that the
    bilinear-transformed response passes exactly -3 dB at ``cutoff_hz``.
    """
    k = math.tan(math.pi * spec.cutoff_hz / spec.sample_rate)
    k2 = k * k
    sections = []
    for m in range(1, spec.order // 2 + 1):
        # Each analog pole pair contributes s^2 + 2*zeta*s + 1 (normalized).
        zeta = math.sin((2 * m - 1) * math.pi / (2 * spec.order))
        d = 1.0 + 2.0 * zeta * k + k2
        g = k2 / d
        sections.append([g, 2.0 * g, g, 1.0, 2.0 * (k2 - 1.0) / d, (1.0 - 2.0 * zeta * k + k2) / d])
    return np.array(sections)


def sos_response(sos: np.ndarray, freqs_hz: np.ndarray, sample_rate: float) -> np.ndarray:
    """Complex frequency response of cascaded sections at ``freqs_hz``."""
    z = np.exp(-1j * 2.0 * np.pi * np.asarray(freqs_hz, dtype=float) / sample_rate)
    h = np.ones_like(z)
    for b0, b1, b2, _a0, a1, a2 in sos:
        h *= (b0 + b1 * z + b2 * z * z) / (1.0 + a1 * z + a2 * z * z)
    return h


def sosfilt_step_init(sos: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Causal cascade filtering along axis 0, transposed direct form II.

    Each section's state starts in the steady state for a constant input equal
    to the first sample, so a constant signal passes through unchanged.
    """
    y = np.array(x, dtype=float, copy=True)
    x0 = y[0]
    for b0, b1, b2, _a0, a1, a2 in sos:
        z2 = (b2 - a2) * x0
        z1 = (b1 - a1) * x0 + z2
        out = np.empty_like(y)
        for n in range(len(y)):
            xn = y[n]
            yn = b0 * xn + z1
            z1 = b1 * xn - a1 * yn + z2
            z2 = b2 * xn - a2 * yn
            out[n] = yn
        y = out
    return y


def butterworth_lowpass(poses: PoseSequence, spec: FilterSpec) -> PoseSequence:
    """Filter every coordinate channel over time; length and fps unchanged."""
    if not np.all(np.isfinite(poses.frames)):
        raise DataError("cannot filter non-finite poses")
    if abs(spec.sample_rate - poses.fps) > 1e-9 * poses.fps:
        raise FilterSpecError(f"filter designed for {spec.sample_rate} Hz, poses are {poses.fps} fps")
    if len(poses) < MIN_FILTER_LENGTH:
        warnings.warn(
            f"sequence of {len(poses)} frames is shorter than {MIN_FILTER_LENGTH}; not filtered",
            ShortSequenceWarning,
            stacklevel=2,
        )
        return poses.with_frames(poses.frames.copy())
    flat = poses.frames.reshape(len(poses), -1)
    out = sosfilt_step_init(butterworth_sos(spec), flat)
    return poses.with_frames(out.reshape(poses.frames.shape))


def filter_series(series: ScalarSeries, cutoff_hz: float) -> ScalarSeries:
    spec = FilterSpec(cutoff_hz, series.sample_rate)
    if len(series.samples) < MIN_FILTER_LENGTH:
        warnings.warn("series too short to filter", ShortSequenceWarning, stacklevel=2)
        return series
    return ScalarSeries(sosfilt_step_init(butterworth_sos(spec), series.samples), series.sample_rate)


def magnitude_spectrum(series: ScalarSeries) -> tuple[np.ndarray, np.ndarray]:
    """Real-FFT bin frequencies ``k * fs / U`` and magnitudes for k = 0..U//2."""
    n = len(series.samples)
    if n < MIN_SPECTRUM_LENGTH:
        raise ArgumentError(f"need at least {MIN_SPECTRUM_LENGTH} samples, got {n}")
    mags = np.abs(np.fft.rfft(series.samples))
    freqs = np.arange(len(mags)) * series.sample_rate / n
    return freqs, mags


def rfft_energy(mags: np.ndarray, n: int) -> float:
    """Time-domain energy implied by one-sided magnitudes (Parseval)."""
    w = np.full(len(mags), 2.0)
    w[0] = 1.0
    if n % 2 == 0:
        w[-1] = 1.0
    return float(np.sum(w * mags**2) / n)
