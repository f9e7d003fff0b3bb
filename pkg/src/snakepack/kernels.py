"""Exact-law and discretised samplers for the one-dimensional source processes.

Provides Brownian paths, normalised and truncated Ito excursions, interval
exit times with per-step bridge-crossing corrections, Bessel(3) paths via the
Pitman transform, positive stable subordinator draws, and the lower-tail
asymptotic of the stable(1/4) subordinator.

All samplers are pure functions of (parameters, seed, stream); see
:mod:`snakepack.rng`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .rng import make_rng

__all__ = [
    "Path",
    "Excursion",
    "TruncatedItoSample",
    "StableSample",
    "ito_mass",
    "ITO_DENSITY_CONST",
    "sample_brownian_path",
    "sample_normalized_excursion",
    "sample_ito_duration",
    "sample_ito_durations",
    "sample_ito_excursion",
    "first_exit_time",
    "first_exit_times",
    "sample_bessel3",
    "bessel3_values_at",
    "bessel_ball_occupations",
    "sample_stable",
    "stable_draws",
    "shorokhod_tail",
    "SHOROKHOD_C11",
    "SHOROKHOD_C12",
]

# Density of the excursion duration sigma under the Ito measure normalised by
# N(sup H > a) = 1/(2a):  N(sigma in dt) = ITO_DENSITY_CONST * t^(-3/2) dt.
# With this constant, N(sigma > s) = (2 pi s)^(-1/2) and
# N(1 - exp(-lam*sigma)) = sqrt(lam/2); both are confirmed by quadrature in
# the test suite before being relied on.
ITO_DENSITY_CONST = 1.0 / (2.0 * math.sqrt(2.0 * math.pi))

SHOROKHOD_C11 = (6.0 * math.pi) ** (-0.5) * 2.0 ** (7.0 / 6.0)
SHOROKHOD_C12 = 27.0 / 2.0


@dataclass(frozen=True)
class Path:
    """A discretised R^dim path sampled on a uniform grid of step ``dt``."""

    dim: int
    dt: float
    values: np.ndarray  # shape (n+1, dim)
    t0: float = 0.0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        object.__setattr__(self, "values", v)
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")
        if v.shape[0] < 1 or v.shape[1] != self.dim:
            raise ValueError("values must be a nonempty (n+1, dim) array")

    @property
    def horizon(self) -> float:
        return self.dt * (self.values.shape[0] - 1)

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.values.shape[0])


@dataclass(frozen=True)
class Excursion:
    """A nonnegative lifetime path H with H_0 = H_n = 0 on a uniform grid."""

    dt: float
    values: np.ndarray  # shape (n+1,)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", v)
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")
        if v.ndim != 1 or v.size < 2:
            raise ValueError("excursion needs at least two grid points")
        if v[0] != 0.0 or v[-1] != 0.0:
            raise ValueError("excursion must start and end at 0")
        if np.any(v < 0.0):
            raise ValueError("excursion values must be nonnegative")

    @property
    def duration(self) -> float:
        return self.dt * (self.values.size - 1)

    @property
    def n_steps(self) -> int:
        return self.values.size - 1


@dataclass(frozen=True)
class TruncatedItoSample:
    """One excursion drawn from the Ito measure restricted to sigma >= s_min.

    ``mass`` is the total Ito mass of the truncation event,
    (2 pi s_min)^(-1/2).  ``sigma_cap``, when finite, records that durations
    were clipped at the cap (the drawn law is then sigma_raw ^ cap).
    """

    excursion: Excursion
    truncation: float
    mass: float
    sigma_cap: float = field(default=math.inf)


@dataclass(frozen=True)
class StableSample:
    """A draw from the positive stable law with E exp(-lam X) = exp(-scale lam^alpha)."""

    alpha: float
    scale: float
    value: float


def ito_mass(s_min: float) -> float:
    """Total Ito mass of {sigma >= s_min}: (2 pi s_min)^(-1/2)."""
    if s_min <= 0.0:
        raise ValueError("s_min must be positive")
    return (2.0 * math.pi * s_min) ** (-0.5)


# ---------------------------------------------------------------------------
# Brownian paths and excursions
# ---------------------------------------------------------------------------


def sample_brownian_path(dim, horizon, dt, seed, stream=0, start=None) -> Path:
    """A d-dimensional Brownian path on [0, horizon] with step ``dt``.

    Increments are centred Gaussians with per-coordinate variance dt.  Starts
    at the origin unless ``start`` is given.
    """
    if dim < 1:
        raise ValueError("dim must be >= 1")
    if horizon <= 0.0 or dt <= 0.0:
        raise ValueError("horizon and dt must be positive")
    if dt > horizon:
        raise ValueError("dt must not exceed horizon")
    rng = make_rng(seed, stream)
    n = max(1, int(round(horizon / dt)))
    steps = rng.standard_normal((n, dim)) * math.sqrt(dt)
    values = np.empty((n + 1, dim))
    values[0] = 0.0 if start is None else np.asarray(start, dtype=float)
    np.cumsum(steps, axis=0, out=values[1:])
    values[1:] += values[0]
    return Path(dim=dim, dt=dt, values=values)


def _normalized_excursion_values(n_steps: int, rng: np.random.Generator) -> np.ndarray:
    """Vervaat transform of a discretised Brownian bridge, duration 1."""
    dt = 1.0 / n_steps
    steps = rng.standard_normal(n_steps) * math.sqrt(dt)
    walk = np.empty(n_steps + 1)
    walk[0] = 0.0
    np.cumsum(steps, out=walk[1:])
    bridge = walk - np.arange(n_steps + 1) * (walk[-1] / n_steps)
    m = int(np.argmin(bridge[:-1]))
    # re-root the cyclic bridge at its minimum
    rolled = np.concatenate((bridge[m:-1], bridge[:m], bridge[m : m + 1]))
    exc = rolled - bridge[m]
    exc[0] = 0.0
    exc[-1] = 0.0
    np.maximum(exc, 0.0, out=exc)  # guard float dust at the re-rooting point
    return exc


def sample_normalized_excursion(n_steps, seed, stream=0) -> Excursion:
    """A Brownian excursion of duration exactly 1 on an n_steps grid.

    Construction: Vervaat re-rooting of a discretised Brownian bridge at its
    argmin.  The law converges to the normalised Brownian excursion as
    n_steps grows.
    """
    if n_steps < 2:
        raise ValueError("n_steps must be >= 2")
    rng = make_rng(seed, stream)
    return Excursion(dt=1.0 / n_steps, values=_normalized_excursion_values(n_steps, rng))


def sample_ito_durations(s_min, n, rng) -> np.ndarray:
    """n durations from the normalised t^(-3/2) density on [s_min, inf)."""
    if s_min <= 0.0:
        raise ValueError("s_min must be positive")
    u = rng.random(n)
    return s_min / (u * u)


def sample_ito_duration(s_min, seed, stream=0) -> float:
    """One duration draw; the conditional tail is P(sigma > t) = (t/s_min)^(-1/2)."""
    return float(sample_ito_durations(s_min, 1, make_rng(seed, stream))[0])


def _scaled_excursion(sigma: float, dt: float, rng: np.random.Generator) -> Excursion:
    """Excursion of duration sigma: Brownian rescaling of a normalised one."""
    n = max(2, int(round(sigma / dt)))
    values = _normalized_excursion_values(n, rng) * math.sqrt(sigma)
    return Excursion(dt=sigma / n, values=values)


def sample_ito_excursion(s_min, dt, seed, stream=0, sigma_cap=math.inf) -> TruncatedItoSample:
    """One excursion from the Ito measure restricted to {sigma >= s_min}.

    The duration is drawn by inverse CDF of the normalised t^(-3/2) density,
    then the shape is a Brownian rescaling of a normalised excursion.  The
    grid keeps roughly sigma/dt points so the relative resolution never drops
    below that of the shortest admissible excursion (hence dt <= s_min/100).
    Durations beyond ``sigma_cap`` are clipped; the default cap keeps tail
    draws from exhausting memory and carries (s_min/sigma_cap)^(1/2) of the
    conditional law.
    """
    if s_min <= 0.0:
        raise ValueError("s_min must be positive")
    if dt > s_min / 100.0:
        raise ValueError("dt must be <= s_min/100")
    rng = make_rng(seed, stream)
    sigma = float(sample_ito_durations(s_min, 1, rng)[0])
    sigma = min(sigma, sigma_cap)
    exc = _scaled_excursion(sigma, dt, rng)
    return TruncatedItoSample(
        excursion=exc, truncation=s_min, mass=ito_mass(s_min), sigma_cap=sigma_cap
    )


# ---------------------------------------------------------------------------
# Interval exit times
# ---------------------------------------------------------------------------


def first_exit_times(r, dt, n, seed, stream=0, max_time=None) -> np.ndarray:
    """n exit times of linear Brownian motion from [-r, r], started at 0.

    Each step applies the exact Brownian-bridge boundary-crossing probability
    exp(-2(r-x0)(r-x1)/dt) (and its mirror) so that undetected in-step
    crossings do not bias the law by O(sqrt(dt)); detected bridge crossings
    are attributed to mid-step, direct crossings by linear interpolation.
    """
    if r <= 0.0 or dt <= 0.0:
        raise ValueError("r and dt must be positive")
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = make_rng(seed, stream)
    if max_time is None:
        max_time = 80.0 * r * r
    max_steps = int(math.ceil(max_time / dt))
    sqdt = math.sqrt(dt)

    out = np.full(n, np.nan)
    x = np.zeros(n)
    alive = np.arange(n)
    for k in range(max_steps):
        m = alive.size
        if m == 0:
            break
        x0 = x[alive]
        x1 = x0 + rng.standard_normal(m) * sqdt
        t0 = k * dt

        direct = np.abs(x1) >= r
        # bridge crossing probability for paths still inside
        pu = np.exp(-2.0 * (r - x0) * (r - x1) / dt)
        pd = np.exp(-2.0 * (r + x0) * (r + x1) / dt)
        crossed = (~direct) & (rng.random(m) < np.minimum(pu + pd, 1.0))

        if np.any(direct):
            idx = alive[direct]
            a0 = np.abs(x0[direct])
            a1 = np.abs(x1[direct])
            frac = np.clip((r - a0) / np.maximum(a1 - a0, 1e-300), 0.0, 1.0)
            out[idx] = t0 + frac * dt
        if np.any(crossed):
            out[alive[crossed]] = t0 + 0.5 * dt

        keep = ~(direct | crossed)
        x[alive[keep]] = x1[keep]
        alive = alive[keep]
    if alive.size:
        out[alive] = max_time  # residual mass is exp(-pi^2 maxtime / 8 r^2)
    return out


def first_exit_time(r, dt, seed, stream=0) -> float:
    """One exit-time draw of Brownian motion from [-r, r]."""
    return float(first_exit_times(r, dt, 1, seed, stream)[0])


# ---------------------------------------------------------------------------
# Bessel(3) via the Pitman transform
# ---------------------------------------------------------------------------


def _bridge_minima(x0, x1, dtv, u):
    """Exact in-step minima of Brownian bridges with endpoints (x0, x1)."""
    d = x1 - x0
    return 0.5 * (x0 + x1 - np.sqrt(d * d - 2.0 * dtv * np.log(u)))


def sample_bessel3(horizon, dt, seed, stream=0) -> Path:
    """The path t -> B_t - 2 inf_{s<=t} B_s of a linear Brownian motion B.

    By the Pitman transform this is a three-dimensional Bessel process.  The
    running infimum includes exactly-sampled in-step bridge minima, so grid
    marginals carry no discretisation bias.
    """
    if horizon <= 0.0 or dt <= 0.0:
        raise ValueError("horizon and dt must be positive")
    rng = make_rng(seed, stream)
    n = max(1, int(round(horizon / dt)))
    b = np.empty(n + 1)
    b[0] = 0.0
    np.cumsum(rng.standard_normal(n) * math.sqrt(dt), out=b[1:])
    mins = _bridge_minima(b[:-1], b[1:], dt, rng.random(n))
    inf_run = np.empty(n + 1)
    inf_run[0] = 0.0
    np.minimum.accumulate(mins, out=inf_run[1:])
    np.minimum(inf_run, 0.0, out=inf_run)
    return Path(dim=1, dt=dt, values=(b - 2.0 * inf_run)[:, None])


def bessel3_values_at(t, dt, n, seed, stream=0) -> np.ndarray:
    """n independent Bessel(3) marginals at time t (batched Pitman transform)."""
    if t <= 0.0 or dt <= 0.0:
        raise ValueError("t and dt must be positive")
    rng = make_rng(seed, stream)
    steps = max(1, int(round(t / dt)))
    b = np.zeros(n)
    inf_run = np.zeros(n)
    for _ in range(steps):
        b1 = b + rng.standard_normal(n) * math.sqrt(dt)
        m = _bridge_minima(b, b1, dt, rng.random(n))
        np.minimum(inf_run, m, out=inf_run)
        b = b1
    return b - 2.0 * inf_run


def bessel_ball_occupations(
    r_grid,
    dt,
    n,
    seed,
    stream=0,
    escape_multiple=20.0,
    trapezoid=True,
) -> np.ndarray:
    """Occupation times of {rho <= r} for n Bessel(3) paths, per r in r_grid.

    rho = B - 2 inf B is stepped with fine step ``dt`` while rho <= 3 max(r)
    and with a coarse step 0.25 max(r)^2 above (from which a dip back below
    max(r) within one step has probability < exp(-32)); stepping stops once
    rho exceeds ``escape_multiple * max(r)``, beyond which a return below
    max(r) has probability 1/escape_multiple.  Occupation is accumulated by
    trapezoid counting of the indicator on the fine grid.
    """
    r_grid = np.atleast_1d(np.asarray(r_grid, dtype=float))
    if np.any(r_grid <= 0.0):
        raise ValueError("radii must be positive")
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    rng = make_rng(seed, stream)
    rmax = float(np.max(r_grid))
    fine_edge = 3.0 * rmax
    stop_edge = escape_multiple * rmax
    dt_coarse = 0.25 * rmax * rmax

    occ = np.zeros((n, r_grid.size))
    b = np.zeros(n)
    inf_run = np.zeros(n)
    rho = np.zeros(n)
    alive = np.arange(n)
    # generous cap: escape beyond stop_edge happens in O(stop_edge^2) time
    max_iters = int(40.0 * stop_edge * stop_edge / dt_coarse + 8.0 * fine_edge ** 2 / dt)
    for _ in range(max_iters):
        m = alive.size
        if m == 0:
            break
        fine = rho[alive] <= fine_edge
        dtv = np.where(fine, dt, dt_coarse)
        x0 = b[alive]
        x1 = x0 + rng.standard_normal(m) * np.sqrt(dtv)
        mins = _bridge_minima(x0, x1, dtv, rng.random(m))
        i1 = np.minimum(inf_run[alive], mins)
        rho1 = x1 - 2.0 * i1
        rho0 = rho[alive]
        if trapezoid:
            w = 0.5 * dtv
            inside0 = (rho0[:, None] <= r_grid[None, :]).astype(np.float64)
            inside1 = (rho1[:, None] <= r_grid[None, :]).astype(np.float64)
            occ[alive] += w[:, None] * (inside0 + inside1)
        else:
            occ[alive] += dtv[:, None] * (rho0[:, None] <= r_grid[None, :])
        b[alive] = x1
        inf_run[alive] = i1
        rho[alive] = rho1
        alive = alive[rho1 <= stop_edge]
    return occ


# ---------------------------------------------------------------------------
# Positive stable subordinators
# ---------------------------------------------------------------------------


def stable_draws(alpha, scale, n, seed, stream=0) -> np.ndarray:
    """n draws of the positive stable law, E exp(-lam X) = exp(-scale lam^alpha).

    Exact transformation method (Chambers-Mallows-Stuck / Kanter): with U
    uniform on (0, pi) and E standard exponential,
    sin(aU) sin(U)^(-1/a) (sin((1-a)U)/E)^((1-a)/a) has unit scale.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    if scale <= 0.0:
        raise ValueError("scale must be positive")
    rng = make_rng(seed, stream)
    u = rng.random(n) * math.pi
    e = rng.exponential(1.0, n)
    x = (
        np.sin(alpha * u)
        * np.sin(u) ** (-1.0 / alpha)
        * (np.sin((1.0 - alpha) * u) / e) ** ((1.0 - alpha) / alpha)
    )
    return scale ** (1.0 / alpha) * x


def sample_stable(alpha, scale, seed, stream=0) -> StableSample:
    """One exact positive stable draw with Laplace transform exp(-scale lam^alpha)."""
    value = float(stable_draws(alpha, scale, 1, seed, stream)[0])
    return StableSample(alpha=alpha, scale=scale, value=value)


def shorokhod_tail(x):
    """Lower-tail asymptotic of the stable(1/4) subordinator at unit time.

    Evaluates C11 x^(1/6) exp(-(x/C12)^(-1/3)) with C11 = (6 pi)^(-1/2) 2^(7/6)
    and C12 = 27/2; this approximates P(S_1 <= x) as x -> 0+ for the speed-128
    subordinator (E exp(-lam S_1) = exp(-(128 lam)^(1/4))).
    """
    arr = np.asarray(x, dtype=float)
    if np.any(arr <= 0.0):
        raise ValueError("x must be positive")
    val = SHOROKHOD_C11 * arr ** (1.0 / 6.0) * np.exp(-((arr / SHOROKHOD_C12) ** (-1.0 / 3.0)))
    return float(val) if np.isscalar(x) or arr.ndim == 0 else val
