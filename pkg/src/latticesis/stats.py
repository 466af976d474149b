"""Equilibrium analysis of infected-fraction time series.

The integrated autocorrelation time uses Sokal's self-consistent window:
``tau(W) = 1 + 2 * sum_{t=1..W} rho(t)`` and ``W`` is the smallest lag with
``W >= c * tau(W)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "AutocorrelationError",
    "TimeSeries",
    "EquilibriumEstimate",
    "autocovariance",
    "integrated_autocorrelation_time",
    "tau_with_window",
    "estimate_equilibrium",
]

MIN_LENGTH = 100
SOKAL_C = 7.0
BURN_IN_TAUS = 20


class AutocorrelationError(ValueError):
    """The autocorrelation time cannot be estimated from this series."""


@dataclass(frozen=True)
class TimeSeries:
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 1 or values.size == 0:
            raise ValueError("a time series must be a non-empty 1-d array")
        object.__setattr__(self, "values", values)

    @property
    def length(self) -> int:
        return int(self.values.size)

    def __len__(self) -> int:
        return self.length

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)


@dataclass(frozen=True)
class EquilibriumEstimate:
    tau: float
    burn_in: int
    mean: float
    std_error: float
    n_effective: float
    extinct: bool


def _values(series) -> np.ndarray:
    if isinstance(series, TimeSeries):
        return series.values
    return TimeSeries(series).values


def autocovariance(series, max_lag: int) -> np.ndarray:
    """``c(t) = 1/(n-t) * sum_i (x_i - m)(x_{i+t} - m)`` for ``t = 0..max_lag``.

    A constant series gives all zeros.
    """
    x = _values(series)
    n = x.size
    if not 0 <= max_lag < n:
        raise ValueError(f"max_lag must lie in [0, {n}), got {max_lag}")
    dx = x - math.fsum(x) / n
    size = 1 << int(2 * n - 1).bit_length()
    spec = np.fft.rfft(dx, size)
    acf = np.fft.irfft(spec * np.conj(spec), size)[: max_lag + 1]
    acf /= np.arange(n, n - max_lag - 1, -1, dtype=np.float64)
    if np.all(x == x[0]):
        acf[:] = 0.0
    return acf


def _cumulative_tau(x: np.ndarray) -> np.ndarray:
    """``tau(W)`` for ``W = 0..n//2``."""
    n = x.size
    cov = autocovariance(x, n // 2)
    if cov[0] <= 0.0:
        raise AutocorrelationError("constant series: autocorrelation time is undefined")
    rho = cov / cov[0]
    tau = np.empty_like(rho)
    tau[0] = 1.0
    tau[1:] = 1.0 + 2.0 * np.cumsum(rho[1:])
    return tau


def integrated_autocorrelation_time(series, c: float = SOKAL_C) -> tuple[float, int]:
    """Return ``(tau, window)``.

    Raises
    ------
    AutocorrelationError
        If the series is shorter than 100 points, constant, or no window up to
        half its length is self-consistent (series too short relative to its
        correlation time).
    """
    x = _values(series)
    if x.size < MIN_LENGTH:
        raise AutocorrelationError(f"need at least {MIN_LENGTH} points, got {x.size}")
    tau = _cumulative_tau(x)
    lags = np.arange(tau.size)
    ok = np.flatnonzero((lags >= 1) & (lags >= c * tau))
    if ok.size == 0:
        raise AutocorrelationError(
            "series too short relative to its correlation time: no window "
            f"W <= {x.size // 2} satisfies W >= {c:g} * tau(W)")
    window = int(ok[0])
    return max(float(tau[window]), 0.5), window


def tau_with_window(series, window: int) -> float:
    """Integrated autocorrelation time truncated at a fixed ``window``."""
    x = _values(series)
    cov = autocovariance(x, window)
    if cov[0] <= 0.0:
        raise AutocorrelationError("constant series: autocorrelation time is undefined")
    return max(1.0 + 2.0 * float(np.sum(cov[1:] / cov[0])), 0.5)


def _constant_tail_start(x: np.ndarray) -> int:
    changes = np.flatnonzero(x[1:] != x[:-1])
    return 0 if changes.size == 0 else int(changes[-1]) + 1


def estimate_equilibrium(series, c: float = SOKAL_C) -> EquilibriumEstimate:
    """Burn-in, equilibrium mean and its standard error.

    A series ending in 0 is absorbed: ``mean = 0`` and ``burn_in`` is the
    first tick of the all-zero tail.  Otherwise ``burn_in`` is
    ``min(20 * tau_pilot, n // 4)`` with ``tau_pilot`` from the second half,
    and tau is recomputed on what remains.  If the second half is constant,
    ``burn_in`` is the start of the constant tail, and the estimate reports
    ``tau = 0.5`` and zero error.
    """
    x = _values(series)
    n = x.size
    if n < MIN_LENGTH:
        raise AutocorrelationError(f"need at least {MIN_LENGTH} points, got {n}")

    if x[-1] == 0.0:
        start = _constant_tail_start(x)
        return EquilibriumEstimate(0.5, start, 0.0, 0.0, float(n - start) / 0.5, True)

    second = x[n // 2:]
    if np.all(second == second[0]):
        # settled into a fixed state: drop everything before it
        burn_in = _constant_tail_start(x)
    else:
        tau_pilot, _ = integrated_autocorrelation_time(second, c)
        burn_in = min(int(math.ceil(BURN_IN_TAUS * tau_pilot)), n // 4)

    kept = x[burn_in:]
    m = kept.size
    mean = math.fsum(kept) / m
    if np.all(kept == kept[0]):
        return EquilibriumEstimate(0.5, burn_in, float(kept[0]), 0.0, m / 0.5, False)
    tau, _ = integrated_autocorrelation_time(kept, c)
    var0 = float(autocovariance(kept, 0)[0])
    # tau already counts both sides of the lag sum, so var(mean) = c(0) tau / m
    std_error = math.sqrt(var0 * tau / m)
    return EquilibriumEstimate(tau, burn_in, mean, std_error, m / tau, False)
