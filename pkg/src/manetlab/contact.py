"""Unit-disk contact structure sampled on a regular time grid."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .trace import Scenario, UsageError

_CHUNK = 128


@dataclass(frozen=True)
class AdjacencySnapshot:
    time: float
    neighbors: tuple[frozenset, ...]

    @property
    def node_count(self) -> int:
        return len(self.neighbors)

    def degree(self, node: int) -> int:
        return len(self.neighbors[node])

    def edges(self) -> set[tuple[int, int]]:
        return {(j, k) for j, nb in enumerate(self.neighbors) for k in nb if j < k}


def snapshot_from_positions(positions, radio_range: float, time: float = 0.0) -> AdjacencySnapshot:
    pos = np.asarray(positions, dtype=float).reshape(-1, 2)
    d2 = ((pos[:, None, :] - pos[None, :, :]) ** 2).sum(-1)
    adj = d2 <= radio_range * radio_range
    np.fill_diagonal(adj, False)
    return AdjacencySnapshot(time, tuple(frozenset(np.flatnonzero(row).tolist()) for row in adj))


def sample_adjacency(scenario: Scenario, t: float, radio_range: float | None = None) -> AdjacencySnapshot:
    """Neighbor sets at time t; an edge exists iff distance <= range (inclusive)."""
    r = scenario.radio_range if radio_range is None else radio_range
    if r <= 0:
        raise UsageError("radio range must be > 0")
    return snapshot_from_positions(scenario.positions([t])[0], r, t)


def sample_times(duration: float, sample_interval: float) -> np.ndarray:
    """Grid 0, dt, 2dt, ... strictly below `duration` (the final instant closes intervals)."""
    if sample_interval <= 0:
        raise UsageError("sample_interval must be > 0")
    n = int(math.ceil(duration / sample_interval - 1e-9))
    return np.arange(max(n, 1)) * sample_interval


def pair_index(node_count: int) -> tuple[np.ndarray, np.ndarray]:
    return np.triu_indices(node_count, k=1)


def link_states(positions: np.ndarray, radio_range: float) -> np.ndarray:
    """Boolean (T, P) link matrix from (T, N, 2) positions, pairs in triu order."""
    T, N, _ = positions.shape
    a, b = pair_index(N)
    r2 = radio_range * radio_range
    up = np.empty((T, len(a)), dtype=bool)
    for s in range(0, T, _CHUNK):
        p = positions[s:s + _CHUNK]
        dx = p[:, a, 0] - p[:, b, 0]
        dy = p[:, a, 1] - p[:, b, 1]
        up[s:s + _CHUNK] = dx * dx + dy * dy <= r2
    return up


@dataclass(frozen=True, eq=False)
class ContactTimeline:
    """Per-pair link state on the sampling grid plus derived up-intervals.

    `up[k, p]` is the state of pair p at `times[k]`; pairs are the
    upper-triangle (j < k) pairs in `pairs`. An up-interval covering samples
    i..j is recorded as [times[i], min(times[j] + dt, duration)).
    """

    node_count: int
    duration: float
    sample_interval: float
    radio_range: float
    times: np.ndarray
    up: np.ndarray
    pairs: np.ndarray = field(repr=False)

    @cached_property
    def sample_widths(self) -> np.ndarray:
        return np.minimum(self.times + self.sample_interval, self.duration) - self.times

    @cached_property
    def intervals(self) -> dict[tuple[int, int], list[tuple[float, float]]]:
        """Up-intervals of every pair that was ever linked."""
        T = len(self.times)
        padded = np.zeros((T + 2, self.up.shape[1]), dtype=np.int8)
        padded[1:-1] = self.up
        edge = np.diff(padded, axis=0)
        starts = np.argwhere(edge == 1)
        ends = np.argwhere(edge == -1)
        # argwhere is row-major; reorder both by pair then time so they align
        so = np.lexsort((starts[:, 0], starts[:, 1]))
        eo = np.lexsort((ends[:, 0], ends[:, 1]))
        starts, ends = starts[so], ends[eo]
        out: dict[tuple[int, int], list[tuple[float, float]]] = {}
        times, dt, dur = self.times, self.sample_interval, self.duration
        for (si, p), (ei, _) in zip(starts.tolist(), ends.tolist()):
            key = (int(self.pairs[p, 0]), int(self.pairs[p, 1]))
            out.setdefault(key, []).append(
                (float(times[si]), float(min(times[ei - 1] + dt, dur))))
        return out

    def pair_intervals(self, j: int, k: int) -> list[tuple[float, float]]:
        if j > k:
            j, k = k, j
        return self.intervals.get((j, k), [])

    def linked(self, j: int, k: int, t: float) -> bool:
        """Link state implied by the intervals at time t."""
        return any(s <= t < e for s, e in self.pair_intervals(j, k))

    def snapshot(self, k: int) -> AdjacencySnapshot:
        nb = [set() for _ in range(self.node_count)]
        for p in np.flatnonzero(self.up[k]):
            a, b = self.pairs[p]
            nb[a].add(int(b))
            nb[b].add(int(a))
        return AdjacencySnapshot(float(self.times[k]), tuple(frozenset(s) for s in nb))


def build_timeline(scenario: Scenario, radio_range: float | None = None,
                   sample_interval: float = 1.0) -> ContactTimeline:
    r = scenario.radio_range if radio_range is None else radio_range
    if r <= 0:
        raise UsageError("radio range must be > 0")
    times = sample_times(scenario.duration, sample_interval)
    pos = scenario.positions(times)
    a, b = pair_index(scenario.node_count)
    up = link_states(pos, r)
    return ContactTimeline(scenario.node_count, float(scenario.duration), float(sample_interval),
                           float(r), times, up, np.column_stack([a, b]))
