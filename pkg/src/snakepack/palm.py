"""Palm-decorated backbone clouds, Poisson superposition, escape statistics.

The size-biased view of the snake occupation measure around a typical atom is
a Brownian backbone decorated by a Poisson field of excursion snakes with
intensity 4 dt N_{xi(t)}; restricted to durations >= s_min the decoration
rate is 4 (2 pi s_min)^(-1/2) per unit backbone time.  Superposing snakes
with a Poisson count per initial atom realises the total occupation measure
of the quadratic-branching superprocess (branching rate fixed to 1; general
rates enter as a scalar multiplier of the occupation only).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .kernels import (
    ITO_DENSITY_CONST,
    Path,
    ito_mass,
    sample_ito_durations,
    stable_draws,
    _scaled_excursion,
)
from .occupation import OccupationMeasure, union_clouds
from .rng import make_rng
from .snake import (
    _run_count,
    _run_store,
    occupation_cloud,
    stratified_mean_se,
    truncated_snake_ball_stats,
    SnakeRealization,
)
from .tree import build_contour_index

__all__ = [
    "PalmCloud",
    "SbmOccupation",
    "UpperBoundStatistic",
    "MildEquationReport",
    "sample_palm_cloud",
    "sample_sbm_occupation",
    "escape_time",
    "upperbound_statistic",
    "palm_sum_laplace_exponent",
    "check_mild_equation",
    "green_radial_weight",
    "green_ball_potential",
    "estimate_u_radial",
    "occupation_first_moment",
]


@dataclass(frozen=True)
class PalmCloud:
    """Backbone path with Poisson snake decorations and their merged cloud."""

    backbone: Path
    decoration_times: np.ndarray
    decorations: list
    a: float
    s_min: float
    sigma_cap: float
    cloud: OccupationMeasure

    @property
    def n_decorations(self) -> int:
        return self.decoration_times.size


@dataclass(frozen=True)
class SbmOccupation:
    """Superposed snake occupation started from a finite atomic measure."""

    initial: list
    excursions: list
    cloud: OccupationMeasure
    beta: float = 1.0


def _decorated_snakes(roots, s_min, dt, dim, seed, stream_base, sigma_cap, rng_sigma, keep):
    """Truncated snakes rooted at given points; returns (snakes, clouds)."""
    sigmas = np.minimum(sample_ito_durations(s_min, len(roots), rng_sigma), sigma_cap)
    snakes, clouds = [], []
    for j, (root, sigma) in enumerate(zip(roots, sigmas)):
        sub = make_rng(seed, stream_base + j)
        exc = _scaled_excursion(float(sigma), dt, sub)
        head = _run_store(exc.values, dim, np.asarray(root, dtype=float), sub)
        snake = SnakeRealization(
            index=build_contour_index(exc), dim=dim, head=head,
            origin=np.asarray(root, dtype=float),
        )
        clouds.append(occupation_cloud(snake))
        if keep:
            snakes.append(snake)
    return snakes, clouds


def sample_palm_cloud(
    a, s_min, dt, dim, seed, stream=0, sigma_cap=math.inf, keep_decorations=True
) -> PalmCloud:
    """Backbone Brownian motion on [0, a] with Poisson snake decorations.

    Decoration birth times form a Poisson process of rate
    4 (2 pi s_min)^(-1/2); each decoration is a truncated excursion snake
    rooted at the backbone position at its birth time.  The cloud is the
    union of the decoration occupation clouds.  ``sigma_cap`` clips
    decoration durations (carrying (s_min/cap)^(1/2) of each decoration's
    conditional law) so that tail draws cannot exhaust the grid.
    """
    if a <= 0.0 or s_min <= 0.0 or dt <= 0.0:
        raise ValueError("a, s_min and dt must be positive")
    if dt > s_min / 100.0:
        raise ValueError("dt must be <= s_min/100")
    rng = make_rng(seed, stream)
    n_bb = max(1, int(round(a / dt)))
    bb = np.empty((n_bb + 1, dim))
    bb[0] = 0.0
    np.cumsum(rng.standard_normal((n_bb, dim)) * math.sqrt(dt), axis=0, out=bb[1:])
    backbone = Path(dim=dim, dt=dt, values=bb)

    rate = 4.0 * ito_mass(s_min)
    n_dec = rng.poisson(rate * a)
    t_j = np.sort(rng.random(n_dec) * a)
    roots = bb[np.minimum(np.round(t_j / dt).astype(int), n_bb)]
    snakes, clouds = _decorated_snakes(
        roots, s_min, dt, dim, seed, (stream + 1) * (1 << 22), sigma_cap, rng,
        keep_decorations,
    )
    cloud = union_clouds(dim, clouds)
    decorations = list(zip(t_j, snakes)) if keep_decorations else []
    return PalmCloud(
        backbone=backbone,
        decoration_times=t_j,
        decorations=decorations,
        a=a,
        s_min=s_min,
        sigma_cap=float(sigma_cap),
        cloud=cloud,
    )


def sample_sbm_occupation(
    initial, s_min, dt, seed, stream=0, sigma_cap=math.inf, keep_excursions=True
) -> SbmOccupation:
    """Total occupation cloud of the superprocess started from atomic mass.

    For each initial atom (x, m) a Poisson(m (2 pi s_min)^(-1/2)) number of
    truncated snakes is rooted at x; the occupation cloud is their union.
    """
    initial = [(np.asarray(x, dtype=float), float(m)) for x, m in initial]
    if any(m <= 0.0 for _, m in initial):
        raise ValueError("initial masses must be positive")
    if not initial:
        return SbmOccupation(initial=[], excursions=[], cloud=union_clouds(1, []))
    dim = initial[0][0].size
    rng = make_rng(seed, stream)
    roots = []
    for x, m in initial:
        count = rng.poisson(m * ito_mass(s_min))
        roots.extend([x] * count)
    snakes, clouds = _decorated_snakes(
        roots, s_min, dt, dim, seed, (stream + 1) * (1 << 22), sigma_cap, rng,
        keep_excursions,
    )
    return SbmOccupation(
        initial=initial, excursions=snakes, cloud=union_clouds(dim, clouds)
    )


def escape_time(R, seed, stream=0) -> float:
    """Exact draw of the last exit time of a Bessel(3) radius from level R.

    The escape process is a stable(1/2) subordinator in R with Laplace
    transform exp(-R sqrt(2 lam)); R = 0 gives 0.
    """
    if R < 0.0:
        raise ValueError("R must be nonnegative")
    if R == 0.0:
        return 0.0
    return float(stable_draws(0.5, R * math.sqrt(2.0), 1, seed, stream)[0])


def palm_sum_laplace_exponent(lam, s_min, r) -> float:
    """Analytic Laplace exponent of the truncated decoration sum S_r.

    Decorations with durations >= s_min arrive at rate 4 per N-unit along the
    backbone up to the escape time of level 2r, whose own exponent is
    sqrt(2 mu); integrating 1 - exp(-lam t) against the truncated duration
    density gives  -log E exp(-lam S_r) = 2r sqrt(2 Psi(lam))  with
    Psi(lam) = 4 int_{s_min}^inf (1-e^(-lam t)) c t^(-3/2) dt.
    """
    psi, _ = integrate.quad(
        lambda t: (1.0 - math.exp(-lam * t)) * ITO_DENSITY_CONST * t ** (-1.5),
        s_min,
        np.inf,
    )
    return 2.0 * r * math.sqrt(2.0 * 4.0 * psi)


@dataclass(frozen=True)
class UpperBoundStatistic:
    """Decoration-sum and late-hit indicators at scale r_n = (1/log n)^n."""

    n: int
    r_n: float
    gamma: float
    s_value: float
    e_indicator: bool
    v_indicator: bool
    threshold: float
    n_decorations: int


def upperbound_statistic(
    n, s_min, dt, seed, stream=0, dim=5, sigma_cap=None, hit_tests=True,
    escape_multiple=50.0,
) -> UpperBoundStatistic:
    """One draw of (S_{r_n}, E_{r_n}, V_n) along a decorated backbone.

    The backbone's first three coordinates define the escape time gamma of
    level 2 r_n; S sums the durations of decorations born before gamma, E
    asks that no decoration born after gamma hits the closed ball of radius
    r_n at the origin, and V = 1{S <= (27/2) g(r_n)} and E.  Requires n >= 4
    so that r_n < 1/e lies in the gauge domain.
    """
    from .gauges import gauge_g

    if n < 4:
        raise ValueError("n must be >= 4 (r_n must lie inside the gauge domain)")
    if dim < 3:
        raise ValueError("dim must be >= 3 (escape uses three coordinates)")
    r_n = (1.0 / math.log(n)) ** n
    rng = make_rng(seed, stream)

    # backbone on its own fine grid: must resolve the escape scale (2 r_n)^2
    dt_bb = min(dt, (2.0 * r_n) ** 2 / 200.0)
    stop_radius = escape_multiple * 2.0 * r_n
    chunk = 65536
    pos = np.zeros(dim)
    t = 0.0
    gamma = 0.0
    times, points = [0.0], [pos.copy()]
    while True:
        steps = rng.standard_normal((chunk, dim)) * math.sqrt(dt_bb)
        block = pos + np.cumsum(steps, axis=0)
        rad3 = np.sqrt(np.sum(block[:, :3] ** 2, axis=1))
        below = rad3 <= 2.0 * r_n
        if np.any(below):
            gamma = t + dt_bb * (np.nonzero(below)[0][-1] + 1)
        exceeded = np.nonzero(rad3 > stop_radius)[0]
        if exceeded.size:
            last = exceeded[0] + 1
            times.append(t + dt_bb * last)
            points.append(block[:last])
            t += dt_bb * last
            break
        times.append(t + dt_bb * chunk)
        points.append(block)
        pos = block[-1]
        t += dt_bb * chunk
    horizon = t
    bb = np.concatenate([p.reshape(-1, dim) for p in points])
    n_grid = bb.shape[0] - 1

    rate = 4.0 * ito_mass(s_min)
    n_dec = rng.poisson(rate * horizon)
    t_j = np.sort(rng.random(n_dec) * horizon)
    sigmas = sample_ito_durations(s_min, n_dec, rng)

    born_before = t_j <= gamma
    s_value = float(sigmas[born_before].sum())

    e_indicator = True
    if hit_tests:
        if sigma_cap is None:
            sigma_cap = 10000.0 * s_min
        late = np.nonzero(~born_before)[0]
        center = np.zeros(dim)
        for j in late:
            root = bb[min(int(round(t_j[j] / dt_bb)), n_grid)]
            sub = make_rng(seed, (stream + 1) * (1 << 22) + int(j))
            exc = _scaled_excursion(min(float(sigmas[j]), sigma_cap), dt, sub)
            _, hit = _run_count(exc.values, dim, root, center, r_n, r_n, sub, True)
            if hit:
                e_indicator = False
                break

    threshold = 13.5 * gauge_g()(r_n)
    v_indicator = bool((s_value <= threshold) and e_indicator)
    return UpperBoundStatistic(
        n=n,
        r_n=r_n,
        gamma=gamma,
        s_value=s_value,
        e_indicator=e_indicator,
        v_indicator=v_indicator,
        threshold=threshold,
        n_decorations=int(n_dec),
    )


# ---------------------------------------------------------------------------
# Radial Green machinery (d = 5) and the time-integrated mild equation
# ---------------------------------------------------------------------------

GREEN_C5 = 1.0 / (4.0 * math.pi ** 2)  # Gamma(d/2-1) / (2 pi^(d/2)) at d = 5


def green_radial_weight(R, s):
    """Radial weight of the d=5 Green operator on radial functions.

    int G(x, y) phi(|y|) dy = int_0^inf w(|x|, s) phi(s) ds with
    w(R, s) = (2/3) s^4 max(R, s)^(-3); the angular reduction is exact by the
    mean-value property of the harmonic kernel |x|^(-3).
    """
    R = np.asarray(R, dtype=float)
    s = np.asarray(s, dtype=float)
    return (2.0 / 3.0) * s ** 4 / np.maximum(R, s) ** 3


def green_ball_potential(R, rho) -> float:
    """int_{B(0, rho)} c5 |y - x|^(-3) dy at |x| = R, in closed form (d=5)."""
    if R >= rho:
        return (2.0 / 15.0) * rho ** 5 / R ** 3
    return rho ** 2 / 3.0 - R ** 2 / 5.0


@dataclass(frozen=True)
class RatTail:
    """Power-law tail extension U(s) = U(s_max) (s/s_max)^(-3) beyond the table."""

    s_max: float
    u_max: float

    def __call__(self, s):
        return self.u_max * (np.asarray(s, dtype=float) / self.s_max) ** -3.0


SIGMA_FLOOR = 1e-7  # durations below carry < 0.4 sqrt(floor) of any <M,f> mass


def _geometric_strata(lo, hi, per_decade=1.0):
    """Geometric break points strictly inside (lo, hi)."""
    n = max(1, int(math.ceil(per_decade * math.log10(hi / lo))) - 1)
    return list(np.geomspace(lo, hi, n + 2)[1:-1])


def estimate_u_radial(
    R, ball_radius, amplitude, s_min, dt, n, seed, stream_offset=0,
    sigma_cap=1024.0, allocation_decay=0.75, max_grid=200000, min_grid=1024,
):
    """Estimate u_f(x) = N_x(1 - exp(-<M, f>)) at |x| = R for f = amp 1_B(0, rho).

    Control-variate form: the linear part of 1 - e^(-z) has the exact
    excursion-measure mean amp * G(f), so only the second-order defect
    z - 1 + e^(-z) (of size z^2/2) is sampled:

        u = amp G(f)(R) - mass * E[ amp occ - 1 + exp(-amp occ) ].

    The defect is estimated over durations stratified geometrically from the
    1e-7 floor up to sigma_cap (draws beyond the last break are clipped at
    the cap, entering through their saturating occupation); strata above
    s_min realise the truncated estimator, the rest replace the untruncated
    remainder by direct small-duration sampling.  Returns
    (estimate, standard error, first-moment diagnostic ratio); the ratio of
    sampled to analytic first moment should sit near 1 and exposes floor,
    cap and grid bias directly.
    """
    origin = np.zeros(5)
    origin[0] = R
    center = np.zeros(5)
    strata = _geometric_strata(SIGMA_FLOOR, sigma_cap, per_decade=1.0)
    if s_min > SIGMA_FLOOR:
        strata = sorted(set(strata) | {s_min})
    alloc = allocation_decay ** np.arange(len(strata) + 1)
    stats = truncated_snake_ball_stats(
        origin=origin, center=center, radius=ball_radius, s_min=SIGMA_FLOOR,
        dt=dt, n=n, seed=seed, stream_offset=stream_offset, sigma_cap=sigma_cap,
        stop_on_hit=False, sigma_strata=strata, allocation=alloc,
        min_grid=min_grid, max_grid=max_grid,
    )
    z = amplitude * stats.occupations
    defect = np.expm1(-z) + z  # z - (1 - e^-z) >= 0, of order z^2/2
    mean_defect, se = stratified_mean_se(stats, defect)
    mass = ito_mass(SIGMA_FLOOR)
    gf = amplitude * green_ball_potential(float(R), ball_radius)
    first_moment, _ = stratified_mean_se(stats, z)
    return gf - mass * mean_defect, mass * se, mass * first_moment / gf


def occupation_first_moment(
    origin, center, radius, n, seed, stream_offset=0, sigma_cap=256.0,
    allocation_decay=0.62, dt_floor=2e-4, max_grid=500000,
):
    """Excursion-measure first moment of the ball occupation, N_y<M, 1_B(x,r)>.

    Fully stratified over the duration from the 1e-7 floor; draws above the
    cap are clipped there, so the slowly-decaying tail enters through the
    saturating occupation of the capped draws (the residual bias is
    nu(sigma > cap) times the change of the mean occupation beyond the cap).
    Returns (estimate, standard_error); compare against the Green integral
    of the indicator.
    """
    origin = np.asarray(origin, dtype=float)
    strata = _geometric_strata(SIGMA_FLOOR, sigma_cap, per_decade=1.0)
    alloc = allocation_decay ** np.arange(len(strata) + 1)
    stats = truncated_snake_ball_stats(
        origin=origin, center=np.asarray(center, dtype=float), radius=radius,
        s_min=SIGMA_FLOOR, dt=dt_floor, n=n, seed=seed,
        stream_offset=stream_offset, sigma_cap=sigma_cap, stop_on_hit=False,
        sigma_strata=strata, allocation=alloc, max_grid=max_grid,
    )
    mean, se = stratified_mean_se(stats, stats.occupations)
    mass = ito_mass(SIGMA_FLOOR)
    return mass * mean, mass * se


@dataclass(frozen=True)
class MildEquationReport:
    """Residuals of u + 2 G(u^2) = G(f) on a radial evaluation grid."""

    radii: np.ndarray
    u_values: np.ndarray
    u_errors: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    residuals: np.ndarray
    s_min: float
    first_moment_ratios: np.ndarray = None

    @property
    def max_relative_residual(self) -> float:
        return float(np.max(np.abs(self.residuals)))


def check_mild_equation(
    f_spec, grid_spec, s_min, n_replicas, seed, dt=None, table_radii=None,
    sigma_cap=1024.0,
) -> MildEquationReport:
    """Verify the time-integrated mild equation u + 2 G(u^2) = G(f) at d = 5.

    ``f_spec`` is ('indicator', rho) or ('indicator', rho, amplitude); only
    radial indicators centred at the origin are supported (the Green operator
    then reduces to an exact one-dimensional radial kernel).  u is tabulated
    by truncated Monte Carlo on a radial grid, interpolated log-linearly with
    a cubic-decay tail, and both sides are evaluated on ``grid_spec``.
    """
    kind = f_spec[0]
    if kind != "indicator":
        raise ValueError("only radial indicator profiles are supported")
    rho = float(f_spec[1])
    amplitude = float(f_spec[2]) if len(f_spec) > 2 else 1.0
    if rho <= 0.0 or amplitude <= 0.0:
        raise ValueError("indicator radius and amplitude must be positive")
    grid = np.asarray(grid_spec, dtype=float)
    if dt is None:
        dt = s_min / 100.0
    if table_radii is None:
        lo = min(grid.min(), rho / 2.0)
        table_radii = np.unique(np.concatenate([
            np.geomspace(lo, 3.2, 9), grid
        ]))
    table_radii = np.asarray(sorted(set(float(r) for r in table_radii)))

    u_tab = np.empty(table_radii.size)
    se_tab = np.empty(table_radii.size)
    fm_tab = np.empty(table_radii.size)
    for i, R in enumerate(table_radii):
        u_tab[i], se_tab[i], fm_tab[i] = estimate_u_radial(
            R, rho, amplitude, s_min, dt, n_replicas, seed,
            stream_offset=(i + 1) * (n_replicas + 8), sigma_cap=sigma_cap,
        )
    tail = RatTail(s_max=float(table_radii[-1]), u_max=float(u_tab[-1]))

    logr = np.log(table_radii)
    logu = np.log(np.maximum(u_tab, 1e-300))

    def u_interp(s):
        s = float(s)
        if s >= table_radii[-1]:
            return float(tail(s))
        if s <= table_radii[0]:
            return float(u_tab[0])
        return float(np.exp(np.interp(math.log(s), logr, logu)))

    lhs = np.empty(grid.size)
    rhs = np.empty(grid.size)
    uvals = np.empty(grid.size)
    uerrs = np.empty(grid.size)
    fmr = np.empty(grid.size)
    for i, R in enumerate(grid):
        j = int(np.argmin(np.abs(table_radii - R)))
        uvals[i] = u_tab[j]
        uerrs[i] = se_tab[j]
        fmr[i] = fm_tab[j]
        quad_val, _ = integrate.quad(
            lambda s: green_radial_weight(R, s) * u_interp(s) ** 2,
            0.0, table_radii[-1], points=[R, rho], limit=200,
        )
        tail_val, _ = integrate.quad(
            lambda s: green_radial_weight(R, s) * float(tail(s)) ** 2,
            table_radii[-1], np.inf, limit=200,
        )
        lhs[i] = uvals[i] + 2.0 * (quad_val + tail_val)
        rhs[i] = amplitude * green_ball_potential(float(R), rho)
    residuals = (lhs - rhs) / rhs
    return MildEquationReport(
        radii=grid, u_values=uvals, u_errors=uerrs, lhs=lhs, rhs=rhs,
        residuals=residuals, s_min=s_min, first_moment_ratios=fmr,
    )
