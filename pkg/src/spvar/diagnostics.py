"""Descriptive checks for seasonality and residual whiteness.

All autocovariances use the biased divisor T (or cycle count N for the
periodic version), which keeps the periodogram identity exact: summing the
raw periodogram over the full frequency circle times 2*pi/T recovers the
lag-0 sample autocovariance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .model import wrap_season


def seasonal_demean(data: np.ndarray, num_seasons: int) -> tuple[np.ndarray, np.ndarray]:
    """Remove per-season means column by column; returns (demeaned, means (S, m))."""
    data = np.asarray(data, dtype=float)
    if data.ndim == 1:
        data = data[:, None]
    T, m = data.shape
    S = num_seasons
    if T % S != 0:
        raise DataError(f"sample length {T} is not a multiple of S = {S}")
    by_season = data.reshape(T // S, S, m)
    means = by_season.mean(axis=0)
    return (by_season - means).reshape(T, m), means


def sample_acf(x: np.ndarray, max_lag: int) -> np.ndarray:
    """Autocorrelations 0..max_lag with the divisor-T autocovariance."""
    x = np.asarray(x, dtype=float).reshape(-1)
    T = x.shape[0]
    if not 0 <= max_lag < T:
        raise DataError(f"max_lag must be in 0..{T - 1}")
    xc = x - x.mean()
    gamma0 = float(xc @ xc) / T
    if gamma0 <= 0.0:
        raise DataError("constant series has no autocorrelations")
    out = np.empty(max_lag + 1)
    for h in range(max_lag + 1):
        out[h] = float(xc[: T - h] @ xc[h:]) / T / gamma0
    return out


def periodic_acf(x: np.ndarray, num_seasons: int, max_lag: int) -> np.ndarray:
    """Season-specific autocorrelations, shape (S, max_lag + 1).

    gamma_s(h) averages (x_t - mean_s)(x_{t-h} - mean_{season(t-h)}) over the
    cycles where t sits in season s and t - h is inside the sample, divided
    by the cycle count N; correlations scale by the two seasons' gamma(0).
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    T = x.shape[0]
    S = num_seasons
    if T % S != 0:
        raise DataError(f"sample length {T} is not a multiple of S = {S}")
    N = T // S
    if max_lag < 0:
        raise DataError("max_lag must be >= 0")
    xc, _ = seasonal_demean(x, S)
    xc = xc[:, 0]
    gamma = np.zeros((S, max_lag + 1))
    for s in range(1, S + 1):
        t_ix = np.arange(s, T + 1, S)
        for h in range(max_lag + 1):
            src = t_ix - h
            ok = src >= 1
            gamma[s - 1, h] = float(xc[t_ix[ok] - 1] @ xc[src[ok] - 1]) / N
    if np.any(gamma[:, 0] <= 0.0):
        raise DataError("a season is constant; periodic autocorrelations undefined")
    rho = np.empty_like(gamma)
    for s in range(1, S + 1):
        for h in range(max_lag + 1):
            other = wrap_season(s - h, S)
            rho[s - 1, h] = gamma[s - 1, h] / np.sqrt(gamma[s - 1, 0] * gamma[other - 1, 0])
    return rho


def periodogram(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Raw periodogram over the full frequency circle lambda_j = 2 pi j / T."""
    x = np.asarray(x, dtype=float).reshape(-1)
    T = x.shape[0]
    xc = x - x.mean()
    spec = np.abs(np.fft.fft(xc)) ** 2 / (2.0 * np.pi * T)
    freqs = 2.0 * np.pi * np.arange(T) / T
    return freqs, spec


def spectral_density(
    x: np.ndarray, half_width: int = 0
) -> tuple[np.ndarray, np.ndarray]:
    """Daniell-smoothed periodogram on 0..pi.

    half_width w averages each ordinate with its w neighbors on either side,
    wrapping around the full circle; w = 0 returns the raw periodogram.
    """
    if half_width < 0:
        raise DataError("half_width must be >= 0")
    freqs, raw = periodogram(x)
    T = raw.shape[0]
    if half_width == 0:
        sm = raw
    else:
        sm = np.zeros_like(raw)
        for k in range(-half_width, half_width + 1):
            sm += np.roll(raw, -k)
        sm /= 2 * half_width + 1
    keep = T // 2 + 1
    return freqs[:keep], sm[:keep]


@dataclass(frozen=True)
class WhitenessRow:
    series: str
    lag: int
    acf_level: float
    acf_square: float
    flag_level: bool
    flag_square: bool


def whiteness_summary(
    data: np.ndarray, max_lag: int, names: tuple[str, ...] = ()
) -> tuple[float, list[WhitenessRow]]:
    """Level and squared autocorrelations with 2/sqrt(T) exceedance flags.

    Intended for structural shocks: flagged levels point at leftover linear
    dynamics, flagged squares at conditional heteroskedasticity.
    """
    data = np.asarray(data, dtype=float)
    if data.ndim == 1:
        data = data[:, None]
    T, m = data.shape
    if not names:
        names = tuple(f"w{i + 1}" for i in range(m))
    threshold = 2.0 / np.sqrt(T)
    rows = []
    for i in range(m):
        levels = sample_acf(data[:, i], max_lag)
        squares = sample_acf(data[:, i] ** 2, max_lag)
        for h in range(1, max_lag + 1):
            rows.append(WhitenessRow(
                series=names[i],
                lag=h,
                acf_level=float(levels[h]),
                acf_square=float(squares[h]),
                flag_level=bool(abs(levels[h]) > threshold),
                flag_square=bool(abs(squares[h]) > threshold),
            ))
    return threshold, rows
