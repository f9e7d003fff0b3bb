"""Gauge functions used to weigh ball radii in fractal density estimates.

The two built-in gauges are
    g(r) = r^4 / (log log 1/r)^3      and      k(r) = r^2 / log log 1/r,
both defined only on (0, 1/e) where log log 1/r is positive.  Power gauges
r^alpha are defined on (0, inf).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "Gauge",
    "GaugeDomainError",
    "gauge_g",
    "gauge_k",
    "power_gauge",
    "user_gauge",
    "gauge_value",
    "parse_gauge",
]

R_MAX_LOGLOG = 1.0 / math.e


class GaugeDomainError(ValueError):
    """Radius outside the gauge's validity domain."""


@dataclass(frozen=True)
class Gauge:
    """A named scalar gauge r -> value with validity domain (0, r_max)."""

    name: str
    fn: Callable[[np.ndarray], np.ndarray]
    r_max: float

    def __call__(self, r):
        arr = np.asarray(r, dtype=float)
        if np.any(arr <= 0.0) or np.any(arr >= self.r_max):
            raise GaugeDomainError(
                f"gauge '{self.name}' defined on (0, {self.r_max}); got {r}"
            )
        out = self.fn(arr)
        return float(out) if arr.ndim == 0 else out


def _loglog_inv(r):
    return np.log(np.log(1.0 / r))


def gauge_g() -> Gauge:
    """r^4 / (log log 1/r)^3 on (0, 1/e)."""
    return Gauge("g", lambda r: r ** 4 / _loglog_inv(r) ** 3, R_MAX_LOGLOG)


def gauge_k() -> Gauge:
    """r^2 / log log 1/r on (0, 1/e)."""
    return Gauge("k", lambda r: r ** 2 / _loglog_inv(r), R_MAX_LOGLOG)


def power_gauge(alpha: float) -> Gauge:
    """r^alpha on (0, inf)."""
    if alpha <= 0.0:
        raise ValueError("alpha must be positive")
    return Gauge(f"power:{alpha:g}", lambda r: r ** alpha, math.inf)


def user_gauge(name, fn, r_max=math.inf) -> Gauge:
    """Wrap a user-supplied radius function as a gauge."""
    return Gauge(name, lambda r: np.asarray(fn(r), dtype=float), r_max)


def gauge_value(gauge: Gauge, r) -> float:
    """Evaluate a gauge at one radius (domain-checked)."""
    return gauge(r)


def parse_gauge(spec: str) -> Gauge:
    """Parse 'g', 'k' or 'power:<alpha>' into a gauge."""
    if spec == "g":
        return gauge_g()
    if spec == "k":
        return gauge_k()
    if spec.startswith("power:"):
        return power_gauge(float(spec.split(":", 1)[1]))
    raise ValueError(f"unknown gauge '{spec}' (expected g, k or power:<alpha>)")
