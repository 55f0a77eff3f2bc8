"""Protocol-independent mobility metrics: ND, NP, LC, LD and RS."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .contact import AdjacencySnapshot, ContactTimeline, build_timeline
from .trace import ManetLabError, Scenario, validate


class ScenarioError(ManetLabError):
    """Raised when metrics are requested for an invalid scenario."""

    def __init__(self, violations):
        self.violations = list(violations)
        head = "; ".join(str(v) for v in self.violations[:3])
        more = f" (+{len(self.violations) - 3} more)" if len(self.violations) > 3 else ""
        super().__init__(f"invalid scenario: {head}{more}")


@dataclass(frozen=True)
class LinkChanges:
    total: int
    per_pair: float


@dataclass(frozen=True)
class MetricReport:
    avg_node_degree: float
    avg_partitions: float
    total_link_changes: int
    link_changes_per_pair: float
    avg_link_duration: float
    avg_relative_speed: float
    sample_interval: float
    radio_range: float
    node_count: int
    duration: float

    # short names used by experiment reports
    @property
    def ND(self) -> float:
        return self.avg_node_degree

    @property
    def NP(self) -> float:
        return self.avg_partitions

    @property
    def LC(self) -> float:
        return float(self.total_link_changes)

    @property
    def LD(self) -> float:
        return self.avg_link_duration

    @property
    def RS(self) -> float:
        return self.avg_relative_speed


def _is_snapshots(obj) -> bool:
    return isinstance(obj, (list, tuple)) and (not obj or isinstance(obj[0], AdjacencySnapshot))


def degrees_per_sample(data: ContactTimeline | Sequence[AdjacencySnapshot]) -> np.ndarray:
    """Per-sample, per-node neighbour counts, shape (T, N)."""
    if _is_snapshots(data):
        return np.array([[len(nb) for nb in s.neighbors] for s in data], dtype=float)
    tl = data
    a, b = tl.pairs[:, 0], tl.pairs[:, 1]
    # pair-node incidence: degree = sum of up links touching the node
    inc = np.zeros((tl.up.shape[1], tl.node_count))
    inc[np.arange(len(a)), a] = 1
    inc[np.arange(len(b)), b] = 1
    return tl.up.astype(float) @ inc


def node_degree(data: ContactTimeline | Sequence[AdjacencySnapshot]) -> float:
    """Mean neighbour count over all samples and nodes."""
    if _is_snapshots(data):
        if not data:
            raise ValueError("need at least one sample")
        return float(degrees_per_sample(data).mean())
    tl = data
    if len(tl.times) == 0 or tl.node_count == 0:
        raise ValueError("need at least one sample")
    return float(2.0 * tl.up.sum() / (len(tl.times) * tl.node_count))


def partitions_per_sample(data: ContactTimeline | Sequence[AdjacencySnapshot]) -> np.ndarray:
    """Connected-component count at every sample (isolated nodes count)."""
    if _is_snapshots(data):
        out = []
        for s in data:
            n = s.node_count
            rows = [j for j, nb in enumerate(s.neighbors) for _ in nb]
            cols = [k for nb in s.neighbors for k in nb]
            g = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
            out.append(connected_components(g, directed=False)[0])
        return np.array(out, dtype=float)
    tl = data
    n = tl.node_count
    out = np.empty(len(tl.times))
    for k in range(len(tl.times)):
        p = np.flatnonzero(tl.up[k])
        g = coo_matrix((np.ones(len(p)), (tl.pairs[p, 0], tl.pairs[p, 1])), shape=(n, n))
        out[k] = connected_components(g, directed=False)[0]
    return out


def network_partitions(data: ContactTimeline | Sequence[AdjacencySnapshot]) -> float:
    per = partitions_per_sample(data)
    if len(per) == 0:
        raise ValueError("need at least one sample")
    return float(per.mean())


def link_changes(timeline: ContactTimeline) -> LinkChanges:
    """Up/down transitions between consecutive samples, summed over pairs."""
    up = timeline.up
    total = int(np.count_nonzero(up[1:] != up[:-1])) if len(up) > 1 else 0
    n_pairs = up.shape[1]
    return LinkChanges(total, total / n_pairs if n_pairs else 0.0)


def link_duration(timeline: ContactTimeline) -> float:
    """Mean length of all up-intervals of all pairs (observed, censored lengths)."""
    up = timeline.up
    if up.size == 0:
        return 0.0
    starts = int(np.count_nonzero(up[0])) + int(np.count_nonzero(up[1:] & ~up[:-1]))
    if starts == 0:
        return 0.0
    total = float(timeline.sample_widths @ up.sum(axis=1))
    return total / starts


def relative_speed(scenario: Scenario, timeline: ContactTimeline) -> float:
    """Mean |v_j - v_k| over every (linked pair, sample) observation."""
    up = timeline.up
    if not up.any():
        return 0.0
    vel = scenario.velocities(timeline.times)
    a, b = timeline.pairs[:, 0], timeline.pairs[:, 1]
    total, count = 0.0, 0
    for s in range(0, len(timeline.times), 128):
        u = up[s:s + 128]
        if not u.any():
            continue
        v = vel[s:s + 128]
        dvx = v[:, a, 0] - v[:, b, 0]
        dvy = v[:, a, 1] - v[:, b, 1]
        total += float(np.hypot(dvx, dvy)[u].sum())
        count += int(u.sum())
    return total / count


def compute_all(scenario: Scenario, radio_range: float | None = None,
                sample_interval: float = 1.0, check: bool = True) -> MetricReport:
    if check:
        bad = validate(scenario)
        if bad:
            raise ScenarioError(bad)
    tl = build_timeline(scenario, radio_range, sample_interval)
    lc = link_changes(tl)
    return MetricReport(
        avg_node_degree=node_degree(tl),
        avg_partitions=network_partitions(tl),
        total_link_changes=lc.total,
        link_changes_per_pair=lc.per_pair,
        avg_link_duration=link_duration(tl),
        avg_relative_speed=relative_speed(scenario, tl),
        sample_interval=float(sample_interval),
        radio_range=tl.radio_range,
        node_count=scenario.node_count,
        duration=float(scenario.duration),
    )
