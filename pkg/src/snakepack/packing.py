"""Dyadic-cube decomposition, greedy packing estimation, cube statistics.

The dyadic machinery follows a fixed offset p = floor(log2(4 sqrt(d))): level
n centres live on 2^(-n-p) Z^d, each centre owning a small cube of edge
2^(-n-p) (pairwise disjoint across centres) inside a big cube of edge 2^(-n).
For a radius r below (2d)^(-1) the level n(r) makes the big cube of the
centre nearest to x fit inside B(x, r) while x stays in the small cube.

The packing pre-measure is estimated from below by a greedy disjoint-ball
construction (largest gauge value first); the exact supremum is only
computed by exhaustive search on oracle-sized instances in the tests.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .gauges import Gauge, gauge_g, gauge_k, gauge_value, parse_gauge, power_gauge
from .occupation import SpatialIndex, ball_mass, density_profile

__all__ = [
    "DyadicCell",
    "dyadic_offset",
    "level_for_radius",
    "locate_cell",
    "cell_contains",
    "big_cube_in_ball",
    "epsilon_packing",
    "PackingResult",
    "cube_statistic",
    "default_kappa2",
    "KappaConfig",
    "kappa_experiment",
    "KappaReport",
]


def dyadic_offset(d: int) -> int:
    """p = floor(log2(4 sqrt(d))), fixing the centre lattice 2^(-n-p) Z^d."""
    if d < 1:
        raise ValueError("dimension must be >= 1")
    return int(math.floor(math.log2(4.0 * math.sqrt(d))))


@dataclass(frozen=True)
class DyadicCell:
    """A dyadic centre: big cube edge 2^-n, small cube edge 2^(-n-p)."""

    n: int
    y: tuple
    d: int

    @property
    def p(self) -> int:
        return dyadic_offset(self.d)

    @property
    def big_edge(self) -> float:
        return 2.0 ** (-self.n)

    @property
    def small_edge(self) -> float:
        return 2.0 ** (-self.n - self.p)


def level_for_radius(r: float, d: int) -> int:
    """n(r) = floor(log2((1 + 2^-p) sqrt(d) / r)); requires 0 < r <= 1/(2d).

    The resulting level satisfies
    (1/2)(1 + 2^-p) sqrt(d) 2^-n < r <= (1 + 2^-p) sqrt(d) 2^-n.
    """
    if not 0.0 < r <= 1.0 / (2.0 * d):
        raise ValueError("radius must lie in (0, 1/(2d)]")
    p = dyadic_offset(d)
    return int(math.floor(math.log2((1.0 + 2.0 ** (-p)) * math.sqrt(d) / r)))


def locate_cell(x, r: float, d: int) -> DyadicCell:
    """The dyadic centre at level n(r) whose small cube contains x.

    Guarantees x in the small cube and the big cube inside B(x, r).
    """
    x = np.asarray(x, dtype=float)
    if x.size != d:
        raise ValueError("point dimension mismatch")
    n = level_for_radius(r, d)
    p = dyadic_offset(d)
    scale = 2.0 ** (n + p)
    y = np.floor(x * scale + 0.5) / scale
    return DyadicCell(n=n, y=tuple(y.tolist()), d=d)


def cell_contains(cell: DyadicCell, x, small: bool = True) -> bool:
    """Half-open cube membership test for the small (default) or big cube."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(cell.y)
    half = 0.5 * (cell.small_edge if small else cell.big_edge)
    return bool(np.all(x >= y - half) and np.all(x < y + half))


def big_cube_in_ball(cell: DyadicCell, x, r: float) -> bool:
    """True iff the big cube D_n(y) lies inside the open ball B(x, r)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(cell.y)
    half = 0.5 * cell.big_edge
    corner = np.abs(x - y) + half  # farthest corner per coordinate
    return bool(np.linalg.norm(corner) < r)


@dataclass(frozen=True)
class PackingResult:
    """Greedy lower bound of the gauge packing pre-measure at scale eps."""

    value: float
    centers: np.ndarray
    radii: np.ndarray
    eps: float


def epsilon_packing(
    index: SpatialIndex, subset_predicate, eps: float, gauge: Gauge,
    radius_levels: int = 6,
) -> PackingResult:
    """Greedy disjoint closed-ball packing value, a lower bound of the supremum.

    Candidate centres are the cloud atoms satisfying the predicate; radii are
    drawn from the geometric grid {eps 2^-j, j < radius_levels}.  Balls are
    accepted largest gauge first subject to pairwise disjointness
    (|c_i - c_j| > r_i + r_j for closed balls), and the result is the sum of
    gauge values of the accepted radii.
    """
    gauge(eps)  # domain check up front
    atoms = index.cloud.atoms
    if atoms.shape[0] == 0:
        return PackingResult(0.0, np.empty((0, index.cloud.dim)), np.empty(0), eps)
    keep = np.array([bool(subset_predicate(a)) for a in atoms])
    cand = atoms[keep]
    if cand.shape[0] == 0:
        return PackingResult(0.0, np.empty((0, index.cloud.dim)), np.empty(0), eps)
    cand = np.unique(cand, axis=0)
    radii = eps * 2.0 ** (-np.arange(radius_levels, dtype=float))

    acc_c, acc_r, total = [], [], 0.0
    for r in radii:  # gauges are nondecreasing: larger radii first
        gr = gauge_value(gauge, r)
        for c in cand:
            ok = True
            for cc, rr in zip(acc_c, acc_r):
                if np.linalg.norm(c - cc) <= r + rr:
                    ok = False
                    break
            if ok:
                acc_c.append(c)
                acc_r.append(r)
                total += gr
    return PackingResult(
        value=total,
        centers=np.asarray(acc_c) if acc_c else np.empty((0, index.cloud.dim)),
        radii=np.asarray(acc_r),
        eps=eps,
    )


def default_kappa2(d: int, kappa1: float = 1.0) -> float:
    """The largest kappa2 with kappa2 g(2^-n) <= kappa1 g(small-cube ball radius)
    for all n >= 7; the ratio is increasing in n so level 7 is binding."""
    g = gauge_g()
    p = dyadic_offset(d)
    n = 7
    return kappa1 * g(0.5 * 2.0 ** (-n - p) * math.sqrt(d)) / g(2.0 ** (-n))


def cube_statistic(index: SpatialIndex, n: int, A: float, kappa2: float) -> float:
    """Sum of gauge terms over hit low-mass dyadic cells in the shell
    1/A <= |y| <= A:

        U_n(A) = sum over centres y of g(sqrt(d)(1+2^-p) 2^-n)
                 1{ M(D_n(y)) <= kappa2 g(2^-n) } 1{ atoms meet the small cube }.

    Only centres whose small cube contains at least one atom can contribute,
    so the scan is over occupied small cubes.  The regime of interest is
    A > 100 with 2^-n <= 1/(2A); smaller A runs with a warning.
    """
    if A <= 0.0:
        raise ValueError("A must be positive")
    if A <= 100.0:
        warnings.warn("cube statistic outside its intended regime A > 100", stacklevel=2)
    if 2.0 ** (-n) > 1.0 / (2.0 * A):
        raise ValueError("level too coarse: need 2^-n <= 1/(2A)")
    cloud = index.cloud
    if cloud.n_atoms == 0:
        return 0.0
    d = cloud.dim
    p = dyadic_offset(d)
    g = gauge_g()
    small = 2.0 ** (-n - p)
    big_half = 0.5 * 2.0 ** (-n)
    term = g(math.sqrt(d) * (1.0 + 2.0 ** (-p)) * 2.0 ** (-n))
    thresh = kappa2 * g(2.0 ** (-n))

    centers = np.unique(np.floor(cloud.atoms / small + 0.5), axis=0) * small
    norms = np.linalg.norm(centers, axis=1)
    centers = centers[(norms >= 1.0 / A) & (norms <= A)]
    total = 0.0
    for y in centers:
        # half-open big cube: lower faces included, upper faces excluded
        inside = np.all(cloud.atoms >= y - big_half, axis=1) & np.all(
            cloud.atoms < y + big_half, axis=1
        )
        mass = float(cloud.weights[inside].sum())
        if mass <= thresh:
            total += term
    return total


@dataclass(frozen=True)
class KappaConfig:
    """Parameters of the density-ratio bracket experiment."""

    d: int = 5
    a: float = 0.4
    s_min: float = 1e-4
    dt: float = 1e-6
    sigma_cap: float = 1.0
    r_grid: tuple = (0.25, 0.125)
    n_replicas: int = 40
    seed: int = 2024


@dataclass(frozen=True)
class KappaReport:
    """Distribution of grid-minimum density ratios at decorated origins."""

    config: KappaConfig
    ratios: np.ndarray  # (replicas, radii)
    minima: np.ndarray  # (replicas,)
    lower_bracket: float
    upper_bracket: float

    def summary(self) -> dict:
        q = np.quantile(self.minima, [0.0, 0.25, 0.5, 0.75, 1.0])
        return {
            "d": self.config.d,
            "replicas": int(self.minima.size),
            "min": float(q[0]),
            "q25": float(q[1]),
            "median": float(q[2]),
            "q75": float(q[3]),
            "max": float(q[4]),
            "lower_bracket": self.lower_bracket,
            "upper_bracket": self.upper_bracket,
            "frac_above_half_lower": float(
                np.mean(self.minima > 0.5 * self.lower_bracket)
            ),
        }


def kappa_experiment(config: KappaConfig) -> KappaReport:
    """Sample decorated clouds and profile ball-mass/gauge ratios at the origin.

    For each replica a Palm cloud is drawn and M(B(0, r))/g(r) recorded over
    the decreasing dyadic radius grid; the distribution of grid minima is
    reported against the theoretical bracket [2^-10, 27/2].  The bracket
    concerns the r -> 0 liminf, so at finite radii only the report (never a
    sharp gate) is meaningful.
    """
    from .palm import sample_palm_cloud
    from .occupation import build_spatial_index

    if config.d < 5:
        warnings.warn("density bracket theorems assume d >= 5", stacklevel=2)
    g = gauge_g()
    r_grid = np.asarray(sorted(config.r_grid, reverse=True), dtype=float)
    ratios = np.empty((config.n_replicas, r_grid.size))
    for k in range(config.n_replicas):
        cloud = sample_palm_cloud(
            config.a, config.s_min, config.dt, config.d,
            seed=config.seed, stream=k, sigma_cap=config.sigma_cap,
            keep_decorations=False,
        ).cloud
        if cloud.n_atoms == 0:
            ratios[k] = 0.0
            continue
        index = build_spatial_index(cloud, cell=float(r_grid[0]))
        prof = density_profile(index, np.zeros(config.d), r_grid, g)
        ratios[k] = prof.ratios
    minima = ratios.min(axis=1)
    return KappaReport(
        config=config,
        ratios=ratios,
        minima=minima,
        lower_bracket=2.0 ** (-10),
        upper_bracket=27.0 / 2.0,
    )
