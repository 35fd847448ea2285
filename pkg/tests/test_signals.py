import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vibroniq.model import HBAR_EV_FS
from vibroniq.signals import (
    DEFAULT_THRESHOLDS,
    SignalError,
    SpectrumSeries,
    _first_sustained,
    default_shot_grid,
    sample_autocorr,
    sample_spectrum_direct,
    shots_scan,
    spectrum,
    tvd,
)
from vibroniq.soft import AutocorrSeries


def damped_cosine_series(n=129, dt=2.0625, e0=0.5, tau=80.0):
    """Synthetic single-line autocorrelation: A(t) = e^{-iE0 t/hbar} e^{-t/tau}."""
    t = np.arange(n) * dt
    values = np.exp(-1j * e0 * t / HBAR_EV_FS) * np.exp(-t / tau)
    return AutocorrSeries(times=t, values=values)


def test_spectrum_is_a_distribution():
    spec = spectrum(damped_cosine_series())
    assert np.all(spec.intensities >= 0.0)
    assert spec.intensities.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(np.diff(spec.energies) > 0)
    assert np.allclose(np.diff(spec.energies), spec.spacing)
    # positive-window default
    assert spec.energies.min() > 0.0


def test_spectrum_peaks_at_the_line():
    e0 = 0.5
    spec = spectrum(damped_cosine_series(e0=e0))
    top = spec.energies[np.argmax(spec.intensities)]
    assert abs(top - e0) < 2 * spec.spacing


def test_spectrum_windows_and_normalization():
    series = damped_cosine_series()
    full = spectrum(series, window="full", normalize=False)
    assert full.energies.min() < 0.0
    pos = spectrum(series, window="positive", normalize=False)
    assert pos.energies.min() > 0.0
    assert pos.intensities.sum() <= full.intensities.sum() + 1e-12
    with pytest.raises(SignalError):
        spectrum(series, window="sideways")
    damped = spectrum(series, damp_d=True)
    assert damped.intensities.sum() == pytest.approx(1.0, abs=1e-12)


def test_spectrum_rejects_bad_series():
    t = np.array([0.0, 1.0, 3.0])
    values = np.ones(3, dtype=complex)
    with pytest.raises(SignalError):
        spectrum(AutocorrSeries(times=t, values=values))
    with pytest.raises(SignalError):
        spectrum(AutocorrSeries(times=np.array([0.0]), values=np.array([1.0 + 0j])))


def test_spectrum_series_validation():
    with pytest.raises(SignalError):
        SpectrumSeries(np.arange(3.0), np.arange(4.0), 1.0)


def test_tvd_basics():
    p = np.array([0.5, 0.5, 0.0])
    q = np.array([0.0, 0.0, 1.0])
    assert tvd(p, p) == 0.0
    assert tvd(p, q) == pytest.approx(1.0)
    assert tvd(p, q) == tvd(q, p)


@settings(max_examples=50, deadline=None)
@given(st.integers(min_value=1, max_value=40), st.integers(min_value=0, max_value=2**31 - 1))
def test_tvd_properties(size, seed):
    rng = np.random.default_rng(seed)
    p = rng.uniform(0, 1, size)
    q = rng.uniform(0, 1, size)
    p /= p.sum()
    q /= q.sum()
    d = tvd(p, q)
    assert 0.0 <= d <= 1.0
    assert d == pytest.approx(tvd(q, p))
    r = rng.uniform(0, 1, size)
    r /= r.sum()
    assert tvd(p, q) <= tvd(p, r) + tvd(r, q) + 1e-12


def test_sample_autocorr_is_consistent():
    series = damped_cosine_series(n=17)
    exact = series.values
    sampled = sample_autocorr(series, shots=400_000, seed=3)
    assert np.allclose(sampled.times, series.times)
    assert np.max(np.abs(sampled.values - exact)) < 0.02
    # quadratures are bounded by the binomial support
    assert np.all(np.abs(sampled.values.real) <= 1.0)
    assert np.all(np.abs(sampled.values.imag) <= 1.0)
    # Re A(0) = 1 is a certain outcome; the imag quadrature stays noisy
    assert sampled.values[0].real == pytest.approx(1.0, abs=1e-12)
    assert abs(sampled.values[0].imag) < 0.02


def test_sample_autocorr_reproducible():
    series = damped_cosine_series(n=17)
    a = sample_autocorr(series, shots=1000, seed=5)
    b = sample_autocorr(series, shots=1000, seed=5)
    assert np.array_equal(a.values, b.values)


def test_sample_spectrum_direct():
    spec = spectrum(damped_cosine_series())
    est = sample_spectrum_direct(spec, shots=50_000, seed=2)
    assert est.intensities.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(est.intensities >= 0)
    assert tvd(est.intensities, spec.intensities) < 0.05


def test_default_shot_grid():
    grid = default_shot_grid()
    assert len(grid) == 61
    assert grid[0] == 1000
    assert grid[-1] == 1_000_000
    assert np.all(np.diff(grid) > 0)


def test_first_sustained():
    grid = np.array([10, 20, 30, 40, 50, 60])
    curve = np.array([0.9, 0.4, 0.05, 0.04, 0.03, 0.02])
    assert _first_sustained(grid, curve, threshold=0.1, sustain=3) == 30
    assert _first_sustained(grid, curve, threshold=0.1, sustain=4) == 30
    # a late rebound pushes the sustained crossing later
    bumpy = np.array([0.05, 0.5, 0.05, 0.04, 0.03, 0.02])
    assert _first_sustained(grid, bumpy, threshold=0.1, sustain=2) == 30
    assert np.isnan(_first_sustained(grid, curve, threshold=0.001, sustain=2))
    # sustain window longer than the tail that stays below
    short = np.array([0.9, 0.9, 0.9, 0.9, 0.9, 0.05])
    assert np.isnan(_first_sustained(grid, short, threshold=0.1, sustain=2))


def test_shots_scan_structure():
    series = damped_cosine_series()
    grid = np.array([500, 1000, 2000, 4000, 8000, 16000, 32000])
    out = shots_scan(series, method="direct", thresholds=(0.2, 0.1), seeds=range(3),
                     shot_grid=grid, sustain=2)
    assert out["method"] == "direct"
    assert np.array_equal(out["shot_grid"], grid)
    assert len(out["curves"]) == 3
    assert set(out["per_seed"]) == {0.2, 0.1}
    assert all(len(v) == 3 for v in out["per_seed"].values())
    assert set(out["medians"]) == {0.2, 0.1}
    # a tighter threshold can never be cheaper on the same draws
    assert out["medians"][0.1] >= out["medians"][0.2]


def test_shots_scan_autocorr_method_runs():
    series = damped_cosine_series(n=33)
    grid = np.array([1000, 2000, 4000, 8000])
    out = shots_scan(series, method="autocorr", thresholds=(0.2,), seeds=range(2),
                     shot_grid=grid, sustain=2)
    assert np.isfinite(out["medians"][0.2])


def test_shots_scan_nan_when_never_reached():
    series = damped_cosine_series()
    grid = np.array([1000, 2000])
    out = shots_scan(series, method="direct", thresholds=(1e-6,), seeds=range(2),
                     shot_grid=grid, sustain=2)
    assert np.isnan(out["medians"][1e-6])


def test_shots_scan_validation():
    series = damped_cosine_series()
    with pytest.raises(SignalError):
        shots_scan(series, method="indirect")
    with pytest.raises(SignalError):
        shots_scan(series, seeds=())


def test_default_thresholds_pinned():
    assert DEFAULT_THRESHOLDS == (0.04, 0.03, 0.02, 0.01)
