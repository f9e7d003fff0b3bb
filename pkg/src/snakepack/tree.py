"""Tree view of an excursion: range minima, tree distance, ball occupations.

An excursion H encodes a rooted real tree; two grid times s, t sit at tree
distance d(s,t) = H_s + H_t - 2 min(H on [s,t]).  A sparse table gives the
range minimum in O(1) per query; occupation profiles around a fixed time use
an O(n) two-sided running minimum instead.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .kernels import Excursion, bessel_ball_occupations

__all__ = [
    "ContourIndex",
    "BismutDraw",
    "build_contour_index",
    "tree_distance",
    "tree_distance_profile",
    "ball_occupation",
    "bismut_sample",
    "bismut_samples",
]


@dataclass
class ContourIndex:
    """Immutable range-minimum view over the H grid of an excursion.

    The sparse table takes O(n log n) space and is built lazily on the first
    query, so indexing very long excursions stays cheap when only the head
    construction is needed.
    """

    excursion: Excursion
    _table: list = field(default=None, repr=False)

    @property
    def values(self) -> np.ndarray:
        return self.excursion.values

    @property
    def dt(self) -> float:
        return self.excursion.dt

    @property
    def duration(self) -> float:
        return self.excursion.duration

    def snap(self, t: float) -> int:
        """Nearest grid index for a time in [0, duration]."""
        if t < 0.0 or t > self.duration + 0.5 * self.dt:
            raise ValueError(f"time {t} outside [0, {self.duration}]")
        return min(int(round(t / self.dt)), self.values.size - 1)

    def _build(self):
        h = self.values
        levels = max(1, int(np.floor(np.log2(h.size))) + 1)
        table = [h]
        for k in range(1, levels):
            prev = table[-1]
            half = 1 << (k - 1)
            if prev.size <= half:
                break
            table.append(np.minimum(prev[:-half], prev[half:]))
        self._table = table

    def rmq(self, i: int, j: int) -> float:
        """min(H_i .. H_j), inclusive grid indices."""
        if i > j:
            i, j = j, i
        if i < 0 or j >= self.values.size:
            raise ValueError("index out of range")
        if self._table is None:
            self._build()
        k = (j - i + 1).bit_length() - 1
        row = self._table[k]
        return min(row[i], row[j - (1 << k) + 1])


def build_contour_index(excursion: Excursion) -> ContourIndex:
    """Wrap an excursion for O(1) range-minimum queries."""
    if excursion is None or excursion.values.size < 2:
        raise ValueError("excursion must be nonempty")
    return ContourIndex(excursion=excursion)


def tree_distance(index: ContourIndex, s: float, t: float) -> float:
    """Tree distance H_s + H_t - 2 m(s,t) between two (snapped) times."""
    i = index.snap(s)
    j = index.snap(t)
    h = index.values
    return float(h[i] + h[j] - 2.0 * index.rmq(i, j))


def tree_distance_profile(index: ContourIndex, t: float) -> np.ndarray:
    """d(s_k, t) for every grid time s_k, computed in O(n)."""
    i = index.snap(t)
    h = index.values
    m = np.empty_like(h)
    m[: i + 1] = np.minimum.accumulate(h[i::-1])[::-1]
    m[i:] = np.minimum.accumulate(h[i:])
    return h + h[i] - 2.0 * m


def ball_occupation(index: ContourIndex, t: float, r: float) -> float:
    """Grid measure of {s : d(s,t) <= r} (count of left grid endpoints x dt)."""
    if r < 0.0:
        raise ValueError("r must be nonnegative")
    d = tree_distance_profile(index, t)
    return float(np.count_nonzero(d[:-1] <= r) * index.dt)


@dataclass(frozen=True)
class BismutDraw:
    """Two-sided occupation profile around a uniformly marked tree point.

    ``left_occ[k]`` and ``right_occ[k]`` are the occupation times of
    {distance <= r_grid[k]} on either side of a point at height ``a``; for
    r < a they do not depend on a.
    """

    a: float
    r_grid: np.ndarray
    left_occ: np.ndarray
    right_occ: np.ndarray


def bismut_samples(a, r_grid, dt, n, seed, stream=0, escape_multiple=100.0):
    """n independent two-sided occupation draws; returns (left, right) arrays.

    Each side simulates a Brownian motion run to its hitting time of -a and
    records the occupation of {B - 2 inf B <= r}; since B - 2 inf B <= r < a
    forces inf B > -a, the occupations are total Bessel(3) ball occupations
    and the hitting level never has to be reached explicitly.
    """
    r_grid = np.atleast_1d(np.asarray(r_grid, dtype=float))
    if np.any(np.diff(r_grid) < 0.0):
        raise ValueError("r_grid must be nondecreasing")
    if a <= float(np.max(r_grid)):
        raise ValueError("a must exceed max(r_grid)")
    left = bessel_ball_occupations(
        r_grid, dt, n, seed, stream=2 * stream, escape_multiple=escape_multiple
    )
    right = bessel_ball_occupations(
        r_grid, dt, n, seed, stream=2 * stream + 1, escape_multiple=escape_multiple
    )
    return left, right


def bismut_sample(a, r_grid, dt, seed, stream=0, escape_multiple=100.0) -> BismutDraw:
    """One two-sided draw of the marked-point occupation profile."""
    left, right = bismut_samples(
        a, r_grid, dt, 1, seed, stream=stream, escape_multiple=escape_multiple
    )
    r_grid = np.atleast_1d(np.asarray(r_grid, dtype=float))
    return BismutDraw(a=float(a), r_grid=r_grid, left_occ=left[0], right_occ=right[0])
