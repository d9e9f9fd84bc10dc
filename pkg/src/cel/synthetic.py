"""Synthetic surveillance-like series for tests and offline demos.

Lengths match the three public datasets (450 daily Mpox points, 840 weekly
ILI points, 234 monthly Measles points) so segmentation reproduces their
context spans. The shapes are rough imitations, not substitutes for the data.
"""

from __future__ import annotations

import datetime as dt

import numpy as np

from .data import TimeSeries


def _labels(start: dt.date, n: int, frequency: str) -> tuple[str, ...]:
    if frequency == "daily":
        return tuple((start + dt.timedelta(days=k)).isoformat() for k in range(n))
    if frequency == "weekly":
        return tuple((start + dt.timedelta(weeks=k)).isoformat() for k in range(n))
    out = []
    year, month = start.year, start.month
    for _ in range(n):
        out.append(f"{year:04d}-{month:02d}")
        month += 1
        if month > 12:
            year, month = year + 1, 1
    return tuple(out)


# (weeks after 2002-11-11, peak ILI fraction, width in weeks) per season, loosely
# following public US wILI peaks 2002-03 .. 2018-19, incl. both 2009 pandemic waves.
_ILI_SEASONS = (
    (14, 0.030, 3.5), (58, 0.076, 2.8), (117, 0.050, 3.5), (172, 0.033, 4.2),
    (222, 0.035, 4.2), (275, 0.059, 3.5), (327, 0.035, 3.5), (337, 0.028, 2.8),
    (363, 0.077, 3.2), (431, 0.046, 3.5), (487, 0.024, 4.2), (527, 0.061, 3.2),
    (579, 0.046, 3.5), (631, 0.060, 3.2), (696, 0.036, 4.2), (744, 0.051, 3.5),
    (795, 0.075, 3.2), (848, 0.051, 3.5),
)


def influenza_like(seed: int = 0, n_weeks: int = 840) -> TimeSeries:
    """Weekly ILI fraction: slowly rising ~1% baseline, one epidemic bump per season, 4% noise."""
    rng = np.random.default_rng(seed)
    t = np.arange(n_weeks, dtype=float)
    baseline = 0.009 + 0.0003 * t / 52.18 + 0.002 * np.cos(2 * np.pi * (t - 14) / 52.18)
    values = baseline.copy()
    for peak, height, width in _ILI_SEASONS:
        values += (height - 0.011) * np.exp(-0.5 * ((t - peak - rng.normal(0, 1)) / width) ** 2)
    values *= np.exp(rng.normal(0, 0.04, n_weeks))
    return TimeSeries(_labels(dt.date(2002, 11, 11), n_weeks, "weekly"), values, "weekly")


def mpox_like(seed: int = 0, n_days: int = 450) -> TimeSeries:
    """Smoothed daily case counts: one large wave followed by a low, noisy tail."""
    rng = np.random.default_rng(seed)
    t = np.arange(n_days, dtype=float)
    values = 3.0 + 5.0 * np.exp(-0.5 * ((t - 120) / 35) ** 2) + 1.5 * np.sin(2 * np.pi * t / 60)
    noise = np.convolve(rng.normal(0, 1.0, n_days + 6), np.ones(7) / 7, mode="valid")
    values = np.clip(values + noise, 0.0, None)
    return TimeSeries(_labels(dt.date(2022, 5, 8), n_days, "daily"), values, "daily")


def measles_like(seed: int = 0, n_months: int = 234) -> TimeSeries:
    """Monthly incidence with annual spring peaks and irregular outbreak years."""
    rng = np.random.default_rng(seed)
    t = np.arange(n_months, dtype=float)
    amplitude = np.repeat(rng.lognormal(-2.5, 0.8, n_months // 12 + 1), 12)[:n_months]
    values = 0.02 + amplitude * (1 + np.cos(2 * np.pi * (t - 3) / 12)) / 2
    values *= np.exp(rng.normal(0, 0.1, n_months))
    return TimeSeries(_labels(dt.date(1999, 8, 1), n_months, "monthly"), values, "monthly")


def shifted_two_context(seed: int = 0, n_per_context: int = 120) -> TimeSeries:
    """Two halves with different level, period and amplitude, for forgetting demos."""
    rng = np.random.default_rng(seed)
    t = np.arange(n_per_context, dtype=float)
    first = 0.2 + 0.1 * np.sin(2 * np.pi * t / 12)
    second = 0.7 - 0.15 * np.sin(2 * np.pi * t / 7)
    values = np.concatenate([first, second]) + rng.normal(0, 0.01, 2 * n_per_context)
    return TimeSeries(_labels(dt.date(2020, 1, 6), values.size, "weekly"), values, "weekly")


def write_csv(series: TimeSeries, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("date,value\n")
        for label, value in zip(series.timestamps, series.values):
            fh.write(f"{label},{float(value)!r}\n")
