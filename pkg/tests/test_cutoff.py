import warnings

import numpy as np
import pytest

from signstitch.cutoff import (
    _check_monotone,
    channel_spectra,
    cutoff_grid,
    estimate_cutoff,
    spectral_difference,
    spectral_intersection,
)
from signstitch.errors import DimensionError, MonotonicityError, SplineError
from signstitch.skeleton import PoseSequence


def pose_from_channels(x, fps):
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    pad = (-x.shape[1]) % 3
    x = np.concatenate([x, np.zeros((len(x), pad))], axis=1)
    return PoseSequence(x.reshape(len(x), -1, 3), fps)


def bin_sine(k, n, amp=1.0):
    return amp * np.sin(2 * np.pi * k * np.arange(n) / n)


def raw(p, q, fn, **kw):
    return fn(p, q, **kw)


def test_intersection_with_self_and_zero():
    rng = np.random.default_rng(0)
    p = PoseSequence(rng.normal(size=(64, 2, 3)), 25.0)
    assert spectral_intersection(p, p) == pytest.approx(channel_spectra(p).sum())
    assert spectral_intersection(p, p.with_frames(np.zeros_like(p.frames))) == 0.0


def test_intersection_of_orthogonal_bins_vanishes():
    n = 128
    # untapered spectra keep exact-bin sinusoids in a single bin
    a = PoseSequence(np.repeat(bin_sine(5, n)[:, None, None], 3, axis=2), 32.0)
    b = PoseSequence(np.repeat(bin_sine(20, n)[:, None, None], 3, axis=2), 32.0)
    inter = np.minimum(channel_spectra(a, taper=False), channel_spectra(b, taper=False)).sum()
    assert inter < 1e-9 * channel_spectra(a, taper=False).sum()
    # with the default taper the main lobes are still far apart
    assert spectral_intersection(a, b) < 1e-9 * channel_spectra(a).sum()


def test_difference_examples():
    n = 128
    rng = np.random.default_rng(1)
    p = PoseSequence(rng.normal(size=(n, 1, 3)), 32.0)
    assert spectral_difference(p, p) == 0.0
    assert spectral_difference(p, p.with_frames(np.zeros_like(p.frames))) == 0.0

    base = np.zeros((n, 1, 3))
    base[:, 0, 0] = bin_sine(3, n)
    extra = base.copy()
    m = 0.7
    extra[:, 0, 1] = bin_sine(17, n, m)
    d = np.maximum(0.0, channel_spectra(pose_from_channels(extra.reshape(n, 3), 32.0), taper=False)
                   - channel_spectra(pose_from_channels(base.reshape(n, 3), 32.0), taper=False)).sum()
    assert d == pytest.approx(m * n / 2, rel=1e-9)


def test_difference_direction_flag():
    rng = np.random.default_rng(2)
    p = PoseSequence(rng.normal(size=(64, 1, 3)), 25.0)
    q = p.with_frames(0.5 * p.frames)
    assert spectral_difference(p, q) == 0.0
    assert spectral_difference(p, q, literal=True) == pytest.approx(0.5 * channel_spectra(p).sum())


def test_shape_mismatch():
    a = PoseSequence(np.zeros((10, 1, 3)), 25.0)
    with pytest.raises(DimensionError):
        spectral_intersection(a, PoseSequence(np.zeros((11, 1, 3)), 25.0))
    with pytest.raises(DimensionError):
        spectral_difference(a, PoseSequence(np.zeros((10, 1, 3)), 30.0))


def test_grid_shape_and_shrink():
    g = cutoff_grid(100.0)
    assert g[0] == 1.0 and g[-1] == 25.0 and np.all(np.diff(g) > 0) and len(g) == 49
    with pytest.warns(UserWarning, match="Nyquist"):
        g = cutoff_grid(30.0)
    assert g[-1] == pytest.approx(14.85) and g[-1] < 15.0


def test_too_few_grid_points():
    p = PoseSequence(np.random.default_rng(3).normal(size=(100, 1, 3)), 100.0)
    with pytest.raises(SplineError):
        estimate_cutoff(p, p, grid_step_hz=12.5)


def test_monotone_check_helper():
    _check_monotone(np.array([1.0, 2.0, 1.95]), "x", tol=0.1)
    with pytest.raises(MonotonicityError):
        _check_monotone(np.array([1.0, 2.0, 1.5]), "x", tol=0.1)


def band_limited(f_max, fps, secs, seed, channels=6):
    rng = np.random.default_rng(seed)
    t = np.arange(int(fps * secs)) / fps
    x = np.zeros((len(t), channels))
    for ch in range(channels):
        for _ in range(4):
            f = rng.uniform(0.3, f_max)
            x[:, ch] += rng.uniform(0.2, 1.0) * np.sin(2 * np.pi * f * t + rng.uniform(0, 2 * np.pi))
    return x


def test_identical_band_limited_input_never_below_band_edge():
    # a causal filter still trims content below its cutoff, so the optimum sits
    # somewhat above the band edge rather than on it
    p = pose_from_channels(band_limited(6.0, 100.0, 10.0, 4), 100.0)
    res = estimate_cutoff(p, p)
    assert 6.0 <= res.chosen_cutoff <= 25.0
    # only the filter's phase lag separates the spectra
    assert np.all(res.difference < 1e-2 * res.intersection.max())


def test_full_band_identical_input_picks_grid_top():
    p = PoseSequence(np.random.default_rng(5).normal(size=(1000, 2, 3)), 100.0)
    res = estimate_cutoff(p, p)
    assert res.chosen_cutoff >= res.grid[-1] - 0.5


def test_sinusoid_with_boundary_spikes():
    fps, n = 50.0, 500
    rng = np.random.default_rng(6)
    x = np.sin(2 * np.pi * 3.0 * np.arange(n) / fps)[:, None] * rng.uniform(0.5, 1.0, 6)[None]
    y = x.copy()
    for b in np.linspace(0, n, 8)[1:-1].astype(int):
        y[b] += 0.1 * rng.normal(size=6)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = estimate_cutoff(pose_from_channels(x, fps), pose_from_channels(y, fps))
    assert 3.0 <= res.chosen_cutoff <= 6.0
    assert res.grid[0] <= res.chosen_cutoff <= res.grid[-1]
    doc = res.to_dict()
    assert set(doc) == {"chosen_cutoff", "grid", "I", "Dset"} and len(doc["I"]) == len(doc["grid"])


def test_literal_direction_objective_never_decreases():
    fps, n = 100.0, 1000
    rng = np.random.default_rng(7)
    x = band_limited(5.0, fps, n / fps, 7)
    y = x + 0.05 * rng.normal(size=x.shape)
    res = estimate_cutoff(pose_from_channels(x, fps), pose_from_channels(y, fps), literal_difference=True)
    objective = res.intersection - res.difference
    assert np.all(np.diff(objective) >= -1e-3 * np.ptp(objective))
    # the choice lands where the objective saturates, past the signal band
    assert res.chosen_cutoff >= 5.0
