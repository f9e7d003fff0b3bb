"""Weighted point clouds in R^d with exact ball queries and density profiles.

Occupation measures are stored as atom/weight arrays.  A hash-grid spatial
index accelerates repeated ball queries; every query is exact (candidate
cells are scanned, then distances compared), and all fast paths are tested
against brute force.

Ball conventions: occupation masses use open balls, hitting tests use closed
balls; both are explicit in the API to avoid off-by-boundary mistakes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .gauges import Gauge, GaugeDomainError
from .kernels import ito_mass

__all__ = [
    "OccupationMeasure",
    "SpatialIndex",
    "DensityProfile",
    "HittingEstimate",
    "build_spatial_index",
    "ball_mass",
    "range_hits_ball",
    "density_profile",
    "estimate_hitting",
    "save_cloud_csv",
    "load_cloud_csv",
]


@dataclass(frozen=True)
class OccupationMeasure:
    """A finite weighted point cloud: atoms (n, dim) with positive weights."""

    dim: int
    atoms: np.ndarray
    weights: np.ndarray
    times: np.ndarray = field(default=None)

    def __post_init__(self):
        atoms = np.asarray(self.atoms, dtype=float).reshape(-1, self.dim)
        weights = np.asarray(self.weights, dtype=float).reshape(-1)
        if atoms.shape[0] != weights.shape[0]:
            raise ValueError("atoms and weights must have equal length")
        if np.any(weights <= 0.0):
            raise ValueError("weights must be positive")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", weights)
        if self.times is not None:
            t = np.asarray(self.times, dtype=float).reshape(-1)
            if t.shape[0] != atoms.shape[0]:
                raise ValueError("times must match atoms")
            object.__setattr__(self, "times", t)

    @property
    def total_mass(self) -> float:
        return float(self.weights.sum())

    @property
    def n_atoms(self) -> int:
        return self.atoms.shape[0]


def union_clouds(dim, clouds) -> OccupationMeasure:
    """Concatenate clouds into one occupation measure (linearity of M)."""
    clouds = [c for c in clouds if c.n_atoms > 0]
    if not clouds:
        return OccupationMeasure(
            dim=dim, atoms=np.empty((0, dim)), weights=np.empty(0), times=np.empty(0)
        )
    atoms = np.concatenate([c.atoms for c in clouds])
    weights = np.concatenate([c.weights for c in clouds])
    times = None
    if all(c.times is not None for c in clouds):
        times = np.concatenate([c.times for c in clouds])
    return OccupationMeasure(dim=dim, atoms=atoms, weights=weights, times=times)


@dataclass
class SpatialIndex:
    """Hash-grid over a cloud; immutable after build, exact queries only.

    For query radii up to ``cell`` only the one-ring neighbourhood of the
    query point's cell is visited, so pick ``cell`` >= the largest radius of
    the experiment.
    """

    cloud: OccupationMeasure
    cell: float
    buckets: dict = field(repr=False)

    def _cell_of(self, x) -> tuple:
        return tuple(int(math.floor(float(c) / self.cell)) for c in x)

    def candidates(self, x, r) -> np.ndarray:
        """Atom indices in all grid cells overlapping the ball B(x, r)."""
        x = np.asarray(x, dtype=float)
        lo = np.floor((x - r) / self.cell).astype(int)
        hi = np.floor((x + r) / self.cell).astype(int)
        if not self.buckets:
            return np.empty(0, dtype=int)
        hits = []
        for key in product(*(range(a, b + 1) for a, b in zip(lo, hi))):
            got = self.buckets.get(key)
            if got is not None:
                hits.append(got)
        if not hits:
            return np.empty(0, dtype=int)
        return np.concatenate(hits)


def build_spatial_index(cloud: OccupationMeasure, cell: float) -> SpatialIndex:
    """Bucket every atom by its integer grid cell of edge ``cell``."""
    if cell <= 0.0:
        raise ValueError("cell must be positive")
    buckets = {}
    if cloud.n_atoms:
        keys = np.floor(cloud.atoms / cell).astype(np.int64)
        order = np.lexsort(keys.T[::-1])
        sorted_keys = keys[order]
        breaks = np.nonzero(np.any(np.diff(sorted_keys, axis=0) != 0, axis=1))[0] + 1
        for chunk in np.split(order, breaks):
            buckets[tuple(keys[chunk[0]])] = chunk
    return SpatialIndex(cloud=cloud, cell=cell, buckets=buckets)


def ball_mass(index: SpatialIndex, x, r: float, closed: bool = False) -> float:
    """Total weight of atoms in the open (default) or closed ball B(x, r)."""
    if r < 0.0:
        raise ValueError("r must be nonnegative")
    idx = index.candidates(x, r)
    if idx.size == 0:
        return 0.0
    d2 = np.sum((index.cloud.atoms[idx] - np.asarray(x, dtype=float)) ** 2, axis=1)
    r2 = r * r
    inside = d2 <= r2 if closed else d2 < r2
    return float(index.cloud.weights[idx][inside].sum())


def range_hits_ball(index: SpatialIndex, x, r: float) -> bool:
    """True iff some atom lies in the closed ball around x."""
    if r < 0.0:
        raise ValueError("r must be nonnegative")
    idx = index.candidates(x, r)
    if idx.size == 0:
        return False
    d2 = np.sum((index.cloud.atoms[idx] - np.asarray(x, dtype=float)) ** 2, axis=1)
    return bool(np.any(d2 <= r * r))


@dataclass(frozen=True)
class DensityProfile:
    """Ball-mass to gauge ratios over a decreasing radius grid."""

    radii: np.ndarray
    ratios: np.ndarray

    @property
    def minimum(self) -> float:
        """Minimum ratio over the grid, a finite-resolution liminf proxy."""
        return float(np.min(self.ratios))


def density_profile(index: SpatialIndex, x, r_grid, gauge: Gauge) -> DensityProfile:
    """M(B(x, r)) / gauge(r) for each r of a decreasing grid."""
    r_grid = np.atleast_1d(np.asarray(r_grid, dtype=float))
    if r_grid.size == 0:
        raise ValueError("r_grid must be nonempty")
    if r_grid.size > 1 and np.any(np.diff(r_grid) >= 0.0):
        raise ValueError("r_grid must be strictly decreasing")
    gvals = gauge(r_grid)  # raises GaugeDomainError outside the domain
    ratios = np.array([ball_mass(index, x, r) for r in r_grid]) / gvals
    return DensityProfile(radii=r_grid, ratios=ratios)


@dataclass(frozen=True)
class HittingEstimate:
    """Truncated Monte-Carlo estimate of the excursion-measure hitting value.

    value = mass(s_min) x fraction of truncated snake draws whose range meets
    the closed target ball.  The part of the excursion measure below s_min is
    not corrected for (no closed form); compare estimates only at matched
    truncation, where the bias cancels under the exact scaling covariance.
    """

    value: float
    mass: float
    hits: int
    n_replicas: int
    s_min: float
    sigma_cap: float

    @property
    def se(self) -> float:
        p = self.hits / self.n_replicas
        return self.mass * math.sqrt(max(p * (1.0 - p), 0.0) / self.n_replicas)


def estimate_hitting(
    origin_y,
    x,
    r: float,
    s_min: float,
    n_replicas: int,
    seed,
    stream_offset: int = 0,
    dt: float = None,
    sigma_cap: float = None,
) -> HittingEstimate:
    """Estimate the excursion measure of {range meets closed B(x, r)} from y.

    Draws truncated excursion-snakes rooted at y and counts range hits; the
    head construction stops early on the first hit.
    """
    from .snake import truncated_snake_ball_stats

    origin_y = np.asarray(origin_y, dtype=float)
    x = np.asarray(x, dtype=float)
    if origin_y.shape != x.shape:
        raise ValueError("origin and centre must share a dimension")
    if float(np.linalg.norm(origin_y - x)) <= r:
        raise ValueError("origin must lie outside the closed target ball")
    if s_min <= 0.0:
        raise ValueError("s_min must be positive")
    if dt is None:
        dt = s_min / 100.0
    if sigma_cap is None:
        sigma_cap = 16384.0 * s_min
    stats = truncated_snake_ball_stats(
        origin=origin_y,
        center=x,
        radius=r,
        s_min=s_min,
        dt=dt,
        n=n_replicas,
        seed=seed,
        stream_offset=stream_offset,
        sigma_cap=sigma_cap,
        stop_on_hit=True,
    )
    hits = int(stats.hits.sum())
    mass = ito_mass(s_min)
    return HittingEstimate(
        value=mass * hits / n_replicas,
        mass=mass,
        hits=hits,
        n_replicas=n_replicas,
        s_min=s_min,
        sigma_cap=sigma_cap,
    )


# ---------------------------------------------------------------------------
# CSV interchange: one comment header naming dim and dt, then t,x_1..x_d,weight
# ---------------------------------------------------------------------------


def save_cloud_csv(path, cloud: OccupationMeasure, dt: float = None):
    """Write a cloud as CSV with a one-line header naming dim and dt."""
    if dt is None:
        w = cloud.weights
        dt = float(w[0]) if w.size and np.all(w == w[0]) else float("nan")
    times = cloud.times
    if times is None:
        times = np.zeros(cloud.n_atoms)
    cols = ["t"] + [f"x_{i+1}" for i in range(cloud.dim)] + ["weight"]
    data = np.column_stack([times, cloud.atoms, cloud.weights]) if cloud.n_atoms else np.empty((0, cloud.dim + 2))
    with open(path, "w") as fh:
        fh.write(f"# dim={cloud.dim} dt={dt:.17g}\n")
        fh.write(",".join(cols) + "\n")
        for row in data:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def load_cloud_csv(path) -> OccupationMeasure:
    """Read a cloud written by :func:`save_cloud_csv`."""
    with open(path) as fh:
        header = fh.readline().strip()
        if not header.startswith("#"):
            raise ValueError("missing '# dim=.. dt=..' header line")
        meta = dict(tok.split("=") for tok in header[1:].split())
        dim = int(meta["dim"])
        fh.readline()  # column names
        rows = [line.strip().split(",") for line in fh if line.strip()]
    if rows:
        data = np.asarray(rows, dtype=float)
        times, atoms, weights = data[:, 0], data[:, 1 : 1 + dim], data[:, 1 + dim]
    else:
        times, atoms, weights = np.empty(0), np.empty((0, dim)), np.empty(0)
    return OccupationMeasure(dim=dim, atoms=atoms, weights=weights, times=times)
