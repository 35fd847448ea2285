"""Autocorrelation post-processing: damped Fourier spectra, shot-noise
sampling models, and the shots-vs-accuracy scan."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import HBAR_EV_FS
from .soft import AutocorrSeries


class SignalError(ValueError):
    pass


@dataclass
class SpectrumSeries:
    """Discrete spectrum over an energy window; intensities sum to 1 when normalized."""

    energies: np.ndarray
    intensities: np.ndarray
    spacing: float

    def __post_init__(self) -> None:
        if self.energies.shape != self.intensities.shape:
            raise SignalError("energies and intensities must align")


def _as_series(autocorr) -> AutocorrSeries:
    if isinstance(autocorr, AutocorrSeries):
        return autocorr
    times, values = autocorr
    return AutocorrSeries(np.asarray(times, dtype=float), np.asarray(values, dtype=np.complex128))


def spectrum(
    autocorr,
    tau_fs: float = 30.0,
    damp_d: bool = False,
    window: str = "positive",
    normalize: bool = True,
    hbar: float = HBAR_EV_FS,
) -> SpectrumSeries:
    """Energy-weighted Fourier transform of a damped autocorrelation.

    The series A(t_j), j = 0..M-1 on a uniform grid is extended to negative
    times through A(-t) = conj(A(t)) (length L = 2M-1), damped by
    exp(-|t|/tau) and optionally by the half-cosine window cos(pi t / 2T),
    then transformed with S(E_k) = dt * sum_j c_j exp(i E_k t_j / hbar).
    Intensities are E * S(E) with negative values clamped to zero.
    """
    series = _as_series(autocorr)
    t = series.times
    a = series.values
    m = len(t)
    if m < 2:
        raise SignalError("need at least two autocorrelation samples")
    dt = float(t[1] - t[0])
    if not np.allclose(np.diff(t), dt, rtol=0.0, atol=1e-9 * max(dt, 1.0)):
        raise SignalError("autocorrelation samples must be uniformly spaced")
    if tau_fs <= 0.0:
        raise SignalError(f"damping time must be positive, got {tau_fs}")
    weight = np.exp(-np.abs(t) / tau_fs)
    if damp_d:
        total = float(t[-1])
        weight = weight * np.cos(0.5 * math.pi * t / total)
    damped = a * weight
    L = 2 * m - 1
    c = np.zeros(L, dtype=np.complex128)
    c[:m] = damped
    c[m:] = np.conj(damped[1:][::-1])
    s = L * dt * np.fft.ifft(c)
    energies = 2.0 * math.pi * hbar * np.fft.fftfreq(L, d=dt)
    intensities = np.clip(energies * s.real, 0.0, None)
    order = np.argsort(energies)
    energies = energies[order]
    intensities = intensities[order]
    if window == "positive":
        keep = energies > 0.0
        energies, intensities = energies[keep], intensities[keep]
    elif window != "full":
        raise SignalError(f"unknown window {window!r}")
    if normalize:
        total = intensities.sum()
        if total <= 0.0:
            raise SignalError("spectrum has no positive weight to normalize")
        intensities = intensities / total
    return SpectrumSeries(energies, intensities, 2.0 * math.pi * hbar / (L * dt))


def sample_autocorr(series, shots: int, seed=None) -> AutocorrSeries:
    """Interferometer shot noise on each quadrature of each sample.

    Re A(t) is read from P(0) = (1 + Re A)/2 and Im A(t) from
    P(1) = (1 + Im A)/2, with `shots` repetitions per quadrature.
    """
    src = _as_series(series)
    if shots < 1:
        raise SignalError(f"shots must be positive, got {shots}")
    rng = np.random.default_rng(seed)
    p_re = np.clip(0.5 * (1.0 + src.values.real), 0.0, 1.0)
    p_im = np.clip(0.5 * (1.0 + src.values.imag), 0.0, 1.0)
    re = 2.0 * rng.binomial(shots, p_re) / shots - 1.0
    im = 2.0 * rng.binomial(shots, p_im) / shots - 1.0
    return AutocorrSeries(src.times.copy(), re + 1j * im)


def sample_spectrum_direct(spec: SpectrumSeries, shots: int, seed=None) -> SpectrumSeries:
    """Empirical bin distribution from multinomial draws on the exact one."""
    if shots < 1:
        raise SignalError(f"shots must be positive, got {shots}")
    p = spec.intensities
    total = p.sum()
    if total <= 0.0:
        raise SignalError("cannot sample from an empty spectrum")
    rng = np.random.default_rng(seed)
    counts = rng.multinomial(shots, p / total)
    return SpectrumSeries(spec.energies.copy(), counts / shots, spec.spacing)


def tvd(p, q) -> float:
    """Total variation distance between two distributions on the same bins."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise SignalError(f"distributions differ in shape: {p.shape} vs {q.shape}")
    return 0.5 * float(np.abs(p - q).sum())


DEFAULT_THRESHOLDS = (0.04, 0.03, 0.02, 0.01)


def default_shot_grid() -> np.ndarray:
    """Log-spaced shot counts, 20 per decade from 1e3 to 1e6."""
    return np.unique(np.round(np.logspace(3.0, 6.0, 61)).astype(int))


def _tvd_curve_autocorr(exact_ac, exact_spec, shot_grid, rng, tau_fs, damp_d) -> np.ndarray:
    out = np.empty(len(shot_grid))
    for i, shots in enumerate(shot_grid):
        noisy = sample_autocorr(exact_ac, int(shots), rng)
        spec = spectrum(noisy, tau_fs=tau_fs, damp_d=damp_d)
        out[i] = tvd(spec.intensities, exact_spec.intensities)
    return out


def _tvd_curve_direct(exact_spec, shot_grid, rng) -> np.ndarray:
    out = np.empty(len(shot_grid))
    for i, shots in enumerate(shot_grid):
        sampled = sample_spectrum_direct(exact_spec, int(shots), rng)
        out[i] = tvd(sampled.intensities, exact_spec.intensities)
    return out


def _first_sustained(shot_grid, curve, threshold: float, sustain: int) -> float:
    """Smallest shot count where the curve stays below threshold for
    `sustain` consecutive grid points (nan when never sustained)."""
    below = curve < threshold
    run = 0
    for i in range(len(shot_grid)):
        run = run + 1 if below[i] else 0
        if run >= sustain:
            return float(shot_grid[i - sustain + 1])
    return float("nan")


def shots_scan(
    autocorr,
    method: str = "autocorr",
    thresholds=DEFAULT_THRESHOLDS,
    seeds=range(10),
    shot_grid=None,
    sustain: int = 5,
    tau_fs: float = 30.0,
    damp_d: bool = False,
) -> dict:
    """Median shot budget to reach each TVD threshold against the exact spectrum.

    method="autocorr" resamples the time series and rebuilds the spectrum;
    method="direct" draws bins from the exact spectrum itself. Per seed the
    crossing must hold for `sustain` consecutive grid points; the reported
    budget is the median over seeds.
    """
    if method not in ("autocorr", "direct"):
        raise SignalError(f"unknown method {method!r}")
    seeds = list(seeds)
    if not seeds:
        raise SignalError("need at least one seed")
    grid = default_shot_grid() if shot_grid is None else np.asarray(shot_grid, dtype=int)
    exact_ac = _as_series(autocorr)
    exact_spec = spectrum(exact_ac, tau_fs=tau_fs, damp_d=damp_d)
    per_seed = {thr: [] for thr in thresholds}
    curves = []
    for seed in seeds:
        rng = np.random.default_rng(seed)
        if method == "autocorr":
            curve = _tvd_curve_autocorr(exact_ac, exact_spec, grid, rng, tau_fs, damp_d)
        else:
            curve = _tvd_curve_direct(exact_spec, grid, rng)
        curves.append(curve)
        for thr in thresholds:
            per_seed[thr].append(_first_sustained(grid, curve, thr, sustain))
    medians = {}
    for thr in thresholds:
        vals = np.asarray(per_seed[thr])
        medians[thr] = float(np.nan) if np.isnan(vals).any() else float(np.median(vals))
    return {
        "method": method,
        "shot_grid": grid,
        "curves": np.asarray(curves),
        "per_seed": {thr: np.asarray(v) for thr, v in per_seed.items()},
        "medians": medians,
    }
