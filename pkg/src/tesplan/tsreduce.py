"""Representative-week selection by k-means over the hourly series.

The 8760-hour year is split into 52 weeks of 168 h.  The trailing 24 h are
folded into the last week: it stays a 168-h feature vector but counts for
192/168 of a week, so the weights of every reduction add up to 8760 hours.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from types import MappingProxyType
from typing import Mapping, Sequence

import numpy as np

from .domain import HOURS_PER_YEAR
from .errors import DegenerateCluster, DomainError

WEEK_HOURS = 168
N_WEEKS = 52
FOLD_HOURS = HOURS_PER_YEAR - N_WEEKS * WEEK_HOURS  # 24
MAX_ITER = 300


def week_weight(week: int) -> Fraction:
    """Fraction of a 168-h week represented by calendar week ``week`` (0-based)."""
    if week == N_WEEKS - 1:
        return Fraction(WEEK_HOURS + FOLD_HOURS, WEEK_HOURS)
    return Fraction(1)


@dataclass(frozen=True)
class ReducedSeries:
    """Time index of the reduced model.

    Model hour ``t`` belongs to period ``t // period_hours``; every hour in a
    period carries the period's weight ``weights[p]`` (hours of the year it
    stands for, per modelled hour).
    """

    period_hours: int
    rep_index: np.ndarray
    weights: tuple
    series: Mapping[str, np.ndarray]
    representatives: tuple = ()
    assignment: tuple = ()

    @property
    def k(self) -> int:
        return len(self.weights)

    @property
    def n_hours(self) -> int:
        return self.k * self.period_hours

    @property
    def rep_week_hours(self) -> np.ndarray:
        return self.rep_index

    @property
    def hour_weights(self) -> np.ndarray:
        return np.repeat(np.array([float(w) for w in self.weights]), self.period_hours)

    def total_weight(self) -> Fraction:
        return sum((w * self.period_hours for w in self.weights), Fraction(0))

    def represented_hours(self) -> list[int]:
        out = []
        for w in self.weights:
            h = w * self.period_hours
            if h.denominator != 1:
                raise DomainError(f"period weight {w} does not cover whole hours")
            out.append(int(h))
        return out

    def previous_hour(self, t: int) -> int:
        """Predecessor of model hour ``t`` with wrap-around inside its period."""
        p, h = divmod(t, self.period_hours)
        return p * self.period_hours + (h - 1) % self.period_hours

    def values(self, ref: str) -> np.ndarray:
        return self.series[ref]


def _restrict(series_table: Mapping[str, np.ndarray], index: np.ndarray) -> Mapping[str, np.ndarray]:
    flat = index.ravel()
    out = {}
    for key, arr in series_table.items():
        v = np.asarray(arr, dtype=float)[flat]
        v.flags.writeable = False
        out[key] = v
    return MappingProxyType(out)


def single_period(series_table, start: int = 0, hours: int = 24, weight=None) -> ReducedSeries:
    """One contiguous period standing for the whole year (weight 8760/hours by default)."""
    if weight is None:
        weight = Fraction(HOURS_PER_YEAR, hours)
    index = np.arange(start, start + hours).reshape(1, hours)
    return ReducedSeries(hours, index, (Fraction(weight),), _restrict(series_table, index))


def week_features(series_table: Mapping[str, np.ndarray], ids: Sequence[str]) -> np.ndarray:
    """52 × (168·len(ids)) matrix of min-max normalized weekly slices."""
    blocks = []
    for key in ids:
        arr = np.asarray(series_table[key], dtype=float)
        if arr.shape != (HOURS_PER_YEAR,):
            raise DomainError(f"series {key!r} must have {HOURS_PER_YEAR} values")
        lo, hi = arr.min(), arr.max()
        norm = (arr - lo) / (hi - lo) if hi > lo else np.zeros_like(arr)
        blocks.append(norm[: N_WEEKS * WEEK_HOURS].reshape(N_WEEKS, WEEK_HOURS))
    if not blocks:
        return np.zeros((N_WEEKS, 0))
    return np.hstack(blocks)


def _sqdist(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    return ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)


def _farthest_point_init(X: np.ndarray, k: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    chosen = [int(rng.integers(len(X)))]
    nearest = _sqdist(X, X[chosen])[:, 0]
    while len(chosen) < k:
        nxt = int(np.argmax(nearest))
        chosen.append(nxt)
        nearest = np.minimum(nearest, _sqdist(X, X[[nxt]])[:, 0])
    return X[chosen].copy()


def kmeans(X: np.ndarray, k: int, seed: int = 0, max_iter: int = MAX_ITER):
    """Lloyd iterations; returns (labels, centers, wcss history)."""
    if not 1 <= k <= len(X):
        raise DomainError(f"k must be in [1, {len(X)}], got {k}")
    distinct = len(np.unique(X, axis=0)) if X.shape[1] else 1
    if k > distinct:
        raise DegenerateCluster(f"k={k} exceeds the {distinct} distinct weeks")
    centers = _farthest_point_init(X, k, seed)
    labels = None
    history = []
    for _ in range(max_iter):
        dist = _sqdist(X, centers)
        new = np.argmin(dist, axis=1)
        # an empty cluster takes over the point worst served by its own center
        for c in range(k):
            if not np.any(new == c):
                own = dist[np.arange(len(X)), new]
                sizes = np.bincount(new, minlength=k)
                own = np.where(sizes[new] > 1, own, -1.0)
                far = int(np.argmax(own))
                new[far] = c
                centers[c] = X[far]
                dist = _sqdist(X, centers)
        wcss = float(dist[np.arange(len(X)), new].sum())
        for c in range(k):
            centers[c] = X[new == c].mean(axis=0)
        after = float(((X - centers[new]) ** 2).sum())
        history.append(after)
        assert after <= wcss + 1e-9 * (1 + wcss)
        if len(history) > 1:
            assert history[-1] <= history[-2] + 1e-9 * (1 + history[-2]), "k-means objective increased"
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
    return labels, centers, history


def reduce(series_table: Mapping[str, np.ndarray], ids: Sequence[str], k: int, seed: int = 0) -> ReducedSeries:
    """Cluster the calendar weeks into ``k`` representative (medoid) weeks."""
    if not 1 <= k <= N_WEEKS:
        raise DomainError(f"k must be in [1, {N_WEEKS}], got {k}")
    X = week_features(series_table, ids)
    labels, centers, _ = kmeans(X, k, seed)
    reps, weights = [], []
    for c in range(k):
        members = np.flatnonzero(labels == c)
        d = ((X[members] - centers[c]) ** 2).sum(axis=1)
        reps.append(int(members[np.argmin(d)]))
        weights.append(sum((week_weight(int(w)) for w in members), Fraction(0)))
    # stable order: clusters listed by their representative week
    order = sorted(range(k), key=lambda c: reps[c])
    relabel = {old: new for new, old in enumerate(order)}
    reps = [reps[c] for c in order]
    weights = [weights[c] for c in order]
    index = np.array([np.arange(w * WEEK_HOURS, (w + 1) * WEEK_HOURS) for w in reps])
    return ReducedSeries(
        WEEK_HOURS,
        index,
        tuple(weights),
        _restrict(series_table, index),
        representatives=tuple(reps),
        assignment=tuple(relabel[int(c)] for c in labels),
    )


def clustering_ids(data) -> list[str]:
    """Demand and capacity-factor series used as clustering features."""
    ids = {z.demand_series_ref for z in data.zones if z.demand_series_ref}
    ids |= {r.capacity_factor_series_ref for r in data.renewables}
    return sorted(ids)


def reduce_system(data, k: int, seed: int = 0) -> ReducedSeries:
    return reduce(data.series, clustering_ids(data), k, seed)
