"""The Gaussian head process over a lifetime excursion, and derived data.

Conditionally on the lifetime H, the head is built sequentially along the
contour: rising lifetime appends independent Gaussian increments with
per-coordinate variance equal to the lifetime gained; falling lifetime erases
path, splitting a partially erased Gaussian segment by exact Brownian-bridge
conditioning.  On the grid this realises the conditional law exactly: each
coordinate of head_t - head_s is centred Gaussian with variance
d(s,t) = H_s + H_t - 2 min H|[s,t].

The sequential kernels are jit-compiled with numba when available (a pure
Python twin with identical float semantics is used otherwise), and consume
pre-drawn normal blocks so results do not depend on the backend.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .kernels import Excursion, ito_mass, sample_ito_durations, _scaled_excursion
from .occupation import OccupationMeasure
from .rng import make_rng
from .tree import ContourIndex, build_contour_index

__all__ = [
    "SnakeRealization",
    "sample_snake_head",
    "snake_heads_at",
    "sample_ise",
    "occupation_cloud",
    "range_box_dimension",
    "box_counts",
    "truncated_snake_ball_stats",
    "BallStats",
]

_CHUNK = 1 << 20


def _steps_store(h, k0, k1, normals, lev, val, top, head):
    """Advance the contour from step k0 to k1, storing every head point.

    Returns (k_reached, top); k_reached < k1 signals the segment stack is
    full and must be grown before resuming.
    """
    dim = val.shape[1]
    cap = lev.shape[0]
    for k in range(k0, k1):
        tgt = h[k + 1]
        cur = h[k]
        if tgt > cur:
            if top + 1 >= cap:
                return k, top
            s = math.sqrt(tgt - cur)
            for c in range(dim):
                val[top + 1, c] = val[top, c] + s * normals[k - k0, c]
            lev[top + 1] = tgt
            top += 1
        elif tgt < cur:
            while lev[top] > tgt:
                if lev[top - 1] >= tgt:
                    top -= 1
                else:
                    l0 = lev[top - 1]
                    l1 = lev[top]
                    frac = (tgt - l0) / (l1 - l0)
                    s = math.sqrt((tgt - l0) * (l1 - tgt) / (l1 - l0))
                    for c in range(dim):
                        val[top, c] = (
                            val[top - 1, c]
                            + frac * (val[top, c] - val[top - 1, c])
                            + s * normals[k - k0, c]
                        )
                    lev[top] = tgt
                    break
        for c in range(dim):
            head[k + 1, c] = val[top, c]
    return k1, top


def _steps_count(h, k0, k1, normals, lev, val, top, center, r2_open, r2_closed, stop_on_hit, count, hit):
    """Like _steps_store but only accumulates ball statistics of the head.

    ``count`` gains 1 for every head grid index j in [k0+1, k1] with j <= n-1
    and |head_j - center|^2 < r2_open;  ``hit`` records whether any head point
    entered the closed ball of squared radius r2_closed.  Early exit on hit
    when requested.  Returns (k_reached, top, count, hit, done_early).
    """
    dim = val.shape[1]
    cap = lev.shape[0]
    n = h.shape[0] - 1
    for k in range(k0, k1):
        tgt = h[k + 1]
        cur = h[k]
        if tgt > cur:
            if top + 1 >= cap:
                return k, top, count, hit, False
            s = math.sqrt(tgt - cur)
            for c in range(dim):
                val[top + 1, c] = val[top, c] + s * normals[k - k0, c]
            lev[top + 1] = tgt
            top += 1
        elif tgt < cur:
            while lev[top] > tgt:
                if lev[top - 1] >= tgt:
                    top -= 1
                else:
                    l0 = lev[top - 1]
                    l1 = lev[top]
                    frac = (tgt - l0) / (l1 - l0)
                    s = math.sqrt((tgt - l0) * (l1 - tgt) / (l1 - l0))
                    for c in range(dim):
                        val[top, c] = (
                            val[top - 1, c]
                            + frac * (val[top, c] - val[top - 1, c])
                            + s * normals[k - k0, c]
                        )
                    lev[top] = tgt
                    break
        d2 = 0.0
        for c in range(dim):
            diff = val[top, c] - center[c]
            d2 += diff * diff
        if d2 <= r2_closed:
            hit = True
            if stop_on_hit:
                return k + 1, top, count, hit, True
        if d2 < r2_open and k + 1 <= n - 1:
            count += 1
    return k1, top, count, hit, False


try:  # pragma: no cover - exercised implicitly
    from numba import njit

    _steps_store = njit(cache=True)(_steps_store)
    _steps_count = njit(cache=True)(_steps_count)
except ImportError:  # pragma: no cover
    pass


def _grow(lev, val):
    return (
        np.concatenate([lev, np.zeros(lev.shape[0])]),
        np.concatenate([val, np.zeros_like(val)]),
    )


def _run_store(h, dim, origin, rng):
    n = h.shape[0] - 1
    head = np.empty((n + 1, dim))
    head[0] = origin
    lev = np.zeros(4096)
    val = np.zeros((4096, dim))
    val[0] = origin
    top = 0
    k = 0
    while k < n:
        k1 = min(n, k + _CHUNK)
        normals = rng.standard_normal((k1 - k, dim))
        kk = k
        while kk < k1:
            kk2, top = _steps_store(h, kk, k1, normals[kk - k :], lev, val, top, head)
            if kk2 < k1:
                lev, val = _grow(lev, val)
            kk = kk2
        k = k1
    return head


def _run_count(h, dim, origin, center, radius_open, radius_closed, rng, stop_on_hit):
    n = h.shape[0] - 1
    lev = np.zeros(4096)
    val = np.zeros((4096, dim))
    val[0] = origin
    top = 0
    count = 0
    d0 = float(np.linalg.norm(np.asarray(origin, float) - center))
    hit = d0 <= radius_closed
    if d0 < radius_open:
        count += 1  # head index 0
    if hit and stop_on_hit:
        return count, True
    r2o = radius_open * radius_open
    r2c = radius_closed * radius_closed
    k = 0
    while k < n:
        k1 = min(n, k + _CHUNK)
        normals = rng.standard_normal((k1 - k, dim))
        kk = k
        while kk < k1:
            kk2, top, count, hit, done = _steps_count(
                h, kk, k1, normals[kk - k :], lev, val, top, center, r2o, r2c,
                stop_on_hit, count, hit,
            )
            if done:
                return count, True
            if kk2 < k1:
                lev, val = _grow(lev, val)
            kk = kk2
        k = k1
    return count, hit


@dataclass(frozen=True)
class SnakeRealization:
    """A lifetime excursion together with the head trajectory in R^dim."""

    index: ContourIndex
    dim: int
    head: np.ndarray  # (n+1, dim)
    origin: np.ndarray

    @property
    def excursion(self) -> Excursion:
        return self.index.excursion

    @property
    def duration(self) -> float:
        return self.index.duration


def sample_snake_head(index: ContourIndex, dim: int, origin=None, seed=0, stream=0) -> SnakeRealization:
    """Sample the Gaussian head process over a fixed lifetime excursion."""
    if dim < 1:
        raise ValueError("dim must be >= 1")
    origin = np.zeros(dim) if origin is None else np.asarray(origin, dtype=float)
    if origin.shape != (dim,):
        raise ValueError("origin must have length dim")
    rng = make_rng(seed, stream)
    head = _run_store(index.values, dim, origin, rng)
    return SnakeRealization(index=index, dim=dim, head=head, origin=origin)


def snake_heads_at(excursion: Excursion, dim: int, grid_indices, n_replicas: int, seed, stream=0, origin=None):
    """Head values at chosen grid indices for many replicas sharing one H.

    The segment structure is a deterministic function of H, so all replicas
    are advanced together with (n_replicas, dim) Gaussian blocks per step.
    Returns an array of shape (n_replicas, len(grid_indices), dim).
    """
    origin = np.zeros(dim) if origin is None else np.asarray(origin, dtype=float)
    h = excursion.values
    n = h.shape[0] - 1
    rng = make_rng(seed, stream)
    want = {int(g): j for j, g in enumerate(grid_indices)}
    out = np.empty((n_replicas, len(want), dim))
    lev = [0.0]
    val = [np.tile(origin, (n_replicas, 1))]
    if 0 in want:
        out[:, want[0], :] = val[0]
    for k in range(n):
        tgt = h[k + 1]
        cur = h[k]
        z = rng.standard_normal((n_replicas, dim))
        if tgt > cur:
            lev.append(tgt)
            val.append(val[-1] + math.sqrt(tgt - cur) * z)
        elif tgt < cur:
            while lev[-1] > tgt:
                if lev[-2] >= tgt:
                    lev.pop()
                    val.pop()
                else:
                    l0, l1 = lev[-2], lev[-1]
                    frac = (tgt - l0) / (l1 - l0)
                    s = math.sqrt((tgt - l0) * (l1 - tgt) / (l1 - l0))
                    val[-1] = val[-2] + frac * (val[-1] - val[-2]) + s * z
                    lev[-1] = tgt
                    break
        if k + 1 in want:
            out[:, want[k + 1], :] = val[-1]
    return out


def sample_ise(n_steps: int, dim: int, seed, stream=0) -> SnakeRealization:
    """Normalised snake: duration-1 excursion plus head; occupation mass 1."""
    if n_steps < 2:
        raise ValueError("n_steps must be >= 2")
    if dim < 1:
        raise ValueError("dim must be >= 1")
    from .kernels import sample_normalized_excursion

    exc = sample_normalized_excursion(n_steps, seed, stream)
    index = build_contour_index(exc)
    # head stream is offset so excursion and head draws never overlap
    return sample_snake_head(index, dim, seed=seed, stream=stream + (1 << 20))


def occupation_cloud(snake: SnakeRealization) -> OccupationMeasure:
    """Occupation measure of the head: atoms at head points, weight dt each.

    Left grid endpoints are used, so the total mass is exactly the duration
    (the final head point repeats the origin and is dropped).
    """
    dt = snake.index.dt
    n = snake.head.shape[0] - 1
    times = dt * np.arange(n)
    return OccupationMeasure(
        dim=snake.dim,
        atoms=snake.head[:-1],
        weights=np.full(n, dt),
        times=times,
    )


def box_counts(points: np.ndarray, eps_grid) -> np.ndarray:
    """Occupied-cell counts of a point set on dyadic-style grids of size eps."""
    counts = []
    for eps in eps_grid:
        cells = np.floor(points / eps).astype(np.int64)
        counts.append(np.unique(cells, axis=0).shape[0])
    return np.asarray(counts)


def range_box_dimension(snake: SnakeRealization, eps_grid):
    """Least-squares slope of log N(eps) against log(1/eps) for the head range.

    N(eps) counts occupied dyadic cells of edge eps.  The grid must be
    decreasing and should stay inside the scaling window: coarser than the
    typical head inter-point spacing, finer than the range diameter.
    """
    eps_grid = np.asarray(eps_grid, dtype=float)
    if eps_grid.size < 2 or np.any(eps_grid <= 0.0) or np.any(np.diff(eps_grid) >= 0.0):
        raise ValueError("eps_grid must be a decreasing grid of >= 2 positive sizes")
    counts = box_counts(snake.head, eps_grid)
    slope = np.polyfit(np.log(1.0 / eps_grid), np.log(np.maximum(counts, 1)), 1)[0]
    return float(slope), counts


@dataclass(frozen=True)
class BallStats:
    """Per-replica truncated-snake statistics against one target ball."""

    sigmas: np.ndarray  # drawn durations (after cap)
    dts: np.ndarray  # realised grid steps sigma/n
    counts: np.ndarray  # open-ball head counts (occupation = count * dt)
    hits: np.ndarray  # closed-ball hit flags
    weights: np.ndarray  # excursion-measure weight per replica
    s_min: float
    sigma_cap: float

    @property
    def occupations(self) -> np.ndarray:
        return self.counts * self.dts


def truncated_snake_ball_stats(
    origin,
    center,
    radius,
    s_min,
    dt,
    n,
    seed,
    stream_offset=0,
    sigma_cap=math.inf,
    stop_on_hit=False,
    sigma_strata=None,
    allocation=None,
    min_grid=128,
    max_grid=math.inf,
) -> BallStats:
    """Monte Carlo over the excursion measure restricted to sigma >= s_min.

    Each replica draws a duration, builds the rescaled excursion and runs the
    head kernel against the target ball.  Grid steps are min(dt, sigma/min_grid)
    per replica, so short durations keep a fixed relative resolution instead
    of inheriting the absolute step of the long ones; ``max_grid`` caps the
    points spent on tail draws (coarse grids add occupation-count noise, not
    bias).

    With ``sigma_strata`` (a list of geometric break points above s_min)
    durations are drawn stratified and per-replica weights carry the stratum
    masses, which removes the duration-sampling variance from heavy-tailed
    functionals.  ``allocation`` gives the fraction of replicas per stratum
    (default equal); long-duration strata cost proportionally more grid
    steps, so skewing draws toward cheap strata trades variance for wall
    clock.  Weights are normalised so that sum(w_i f_i) estimates the
    conditional mean under {sigma >= s_min}.
    """
    origin = np.asarray(origin, dtype=float)
    center = np.asarray(center, dtype=float)
    if s_min <= 0.0:
        raise ValueError("s_min must be positive")
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    rng = make_rng(seed, stream_offset)

    if sigma_strata is None:
        sigmas = np.minimum(sample_ito_durations(s_min, n, rng), sigma_cap)
        weights = np.full(n, 1.0 / n)
    else:
        # final stratum covers (last, inf); draws there are clipped at the cap
        # so the stratum masses sum to one
        edges = [s_min] + list(sigma_strata) + [math.inf]
        if any(b <= a for a, b in zip(edges, edges[1:])):
            raise ValueError("strata must increase inside (s_min, sigma_cap)")
        k = len(edges) - 1
        if allocation is None:
            per = np.full(k, n // k)
            per[: n % k] += 1
        else:
            frac = np.asarray(allocation, dtype=float)
            if frac.size != k or np.any(frac <= 0.0):
                raise ValueError("allocation needs one positive entry per stratum")
            per = np.maximum((frac / frac.sum() * n).astype(int), 1)
        sig_parts, w_parts = [], []
        tail = lambda s: (s_min / s) ** 0.5  # P(sigma > s | sigma >= s_min)
        for j in range(k):
            lo, hi = edges[j], edges[j + 1]
            p_lo, p_hi = tail(lo), (0.0 if not math.isfinite(hi) else tail(hi))
            u = rng.random(per[j])
            # inverse CDF of the t^(-3/2) law conditioned to (lo, hi]
            t = tail(lo) - u * (p_lo - p_hi)
            sig = np.minimum(s_min / (t * t), sigma_cap if math.isfinite(sigma_cap) else np.inf)
            sig_parts.append(sig)
            w_parts.append(np.full(per[j], (p_lo - p_hi) / per[j]))
        sigmas = np.concatenate(sig_parts)
        weights = np.concatenate(w_parts)

    counts = np.zeros(sigmas.size, dtype=np.int64)
    hits = np.zeros(sigmas.size, dtype=bool)
    dts = np.empty(sigmas.size)
    for i, sigma in enumerate(sigmas):
        sub = make_rng(seed, stream_offset + 1 + i)
        dt_i = max(min(dt, float(sigma) / min_grid), float(sigma) / max_grid)
        exc = _scaled_excursion(float(sigma), dt_i, sub)
        dts[i] = exc.dt
        c, h = _run_count(
            exc.values, origin.size, origin, center, radius, radius, sub, stop_on_hit
        )
        counts[i] = c
        hits[i] = h
    return BallStats(
        sigmas=sigmas,
        dts=dts,
        counts=counts,
        hits=hits,
        weights=weights,
        s_min=s_min,
        sigma_cap=float(sigma_cap),
    )


def stratified_mean_se(stats: BallStats, values):
    """Weighted mean of per-replica values and its stratified standard error."""
    values = np.asarray(values, dtype=float)
    mean = float(np.sum(stats.weights * values))
    var = 0.0
    for w in np.unique(stats.weights):
        sel = stats.weights == w
        m = int(np.count_nonzero(sel))
        if m > 1:
            var += (w * m) ** 2 * float(np.var(values[sel], ddof=1)) / m
    return mean, math.sqrt(var)
