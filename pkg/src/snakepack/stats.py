"""Statistical utilities for the law-equality gates."""

from __future__ import annotations

import math

import numpy as np

__all__ = ["ks_statistic", "mc_mean"]

# Asymptotic 5% point of the Kolmogorov distribution.
_KS_COEFF_5PCT = 1.3581


def ks_statistic(sample_a, sample_b=None, cdf=None):
    """Kolmogorov-Smirnov distance and its asymptotic 5% critical value.

    Two-sample form with two arrays, or one-sample against a callable CDF.
    Returns (distance, critical_value_at_5pct).
    """
    a = np.sort(np.asarray(sample_a, dtype=float))
    if a.size == 0:
        raise ValueError("sample must be nonempty")
    if (sample_b is None) == (cdf is None):
        raise ValueError("pass exactly one of sample_b or cdf")
    if cdf is not None:
        n = a.size
        f = np.asarray(cdf(a), dtype=float)
        d_plus = np.max(np.arange(1, n + 1) / n - f)
        d_minus = np.max(f - np.arange(0, n) / n)
        return float(max(d_plus, d_minus)), _KS_COEFF_5PCT / math.sqrt(n)
    b = np.sort(np.asarray(sample_b, dtype=float))
    if b.size == 0:
        raise ValueError("sample must be nonempty")
    allv = np.concatenate([a, b])
    cdf_a = np.searchsorted(a, allv, side="right") / a.size
    cdf_b = np.searchsorted(b, allv, side="right") / b.size
    dist = float(np.max(np.abs(cdf_a - cdf_b)))
    crit = _KS_COEFF_5PCT * math.sqrt((a.size + b.size) / (a.size * b.size))
    return dist, crit


def mc_mean(values):
    """Sample mean and its standard error."""
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        raise ValueError("need at least two values")
    return float(v.mean()), float(v.std(ddof=1) / math.sqrt(v.size))
