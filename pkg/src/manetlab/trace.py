"""Node traces, scenarios, configuration and seeded randomness.

A trace is a piecewise-linear path through timestamped waypoints. Pauses are
a repeated position at a later timestamp. Everything downstream (contact
sampling, metrics, routing) evaluates traces through `position_at`,
`velocity_at` or the vectorised `Scenario.positions` / `Scenario.velocities`.
"""
from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np

MODELS = ("RWP", "GM", "RPGM", "NCMM")
ENTITY_MODELS = ("RWP", "GM")
GROUP_MODELS = ("RPGM", "NCMM")


class ManetLabError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(ManetLabError, ValueError):
    pass


class UsageError(ManetLabError, ValueError):
    pass


class ParseError(ManetLabError, ValueError):
    """Malformed input text; carries the 1-based line and column."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f"line {line}"
            if column is not None:
                where += f", column {column}"
            where += ": "
        super().__init__(where + message)


class Vec2(NamedTuple):
    x: float
    y: float


class Waypoint(NamedTuple):
    time: float
    position: Vec2


class NodeTrace:
    """Immutable piecewise-linear movement path of one node."""

    __slots__ = ("node_id", "times", "xy", "_tlist")

    def __init__(self, node_id: int, times, xy):
        times = np.array(times, dtype=float).reshape(-1)
        xy = np.array(xy, dtype=float).reshape(-1, 2)
        if len(times) != len(xy):
            raise UsageError("times and positions differ in length")
        times.flags.writeable = False
        xy.flags.writeable = False
        self.node_id = int(node_id)
        self.times = times
        self.xy = xy
        self._tlist = times.tolist()

    @classmethod
    def from_waypoints(cls, node_id: int, waypoints: Iterable) -> "NodeTrace":
        pts = [(float(t), float(p[0]), float(p[1])) for t, p in waypoints]
        if not pts:
            return cls(node_id, np.empty(0), np.empty((0, 2)))
        arr = np.array(pts)
        return cls(node_id, arr[:, 0], arr[:, 1:])

    @property
    def waypoints(self) -> list[Waypoint]:
        return [Waypoint(t, Vec2(x, y)) for t, (x, y) in zip(self._tlist, self.xy.tolist())]

    def __len__(self) -> int:
        return len(self._tlist)

    def __eq__(self, other) -> bool:
        if not isinstance(other, NodeTrace):
            return NotImplemented
        return (
            self.node_id == other.node_id
            and np.array_equal(self.times, other.times)
            and np.array_equal(self.xy, other.xy)
        )

    def __hash__(self):
        return hash((self.node_id, self.times.tobytes(), self.xy.tobytes()))

    def __repr__(self) -> str:
        return f"NodeTrace(node_id={self.node_id}, waypoints={len(self)})"

    def with_id(self, node_id: int) -> "NodeTrace":
        return NodeTrace(node_id, self.times, self.xy)

    def positions(self, t) -> np.ndarray:
        """Positions at an array of times, shape (len(t), 2)."""
        t = np.asarray(t, dtype=float)
        if len(self._tlist) == 0:
            raise UsageError(f"node {self.node_id}: empty trace")
        return np.stack(
            [np.interp(t, self.times, self.xy[:, 0]), np.interp(t, self.times, self.xy[:, 1])],
            axis=-1,
        )

    def velocities(self, t) -> np.ndarray:
        """Segment velocities at an array of times, shape (len(t), 2).

        At an exact waypoint time the following segment applies; after the
        last waypoint the velocity is zero.
        """
        t = np.asarray(t, dtype=float)
        k = len(self._tlist)
        if k == 0:
            raise UsageError(f"node {self.node_id}: empty trace")
        out = np.zeros(t.shape + (2,))
        if k == 1:
            return out
        dt = np.diff(self.times)
        disp = np.diff(self.xy, axis=0)
        with np.errstate(divide="ignore", invalid="ignore"):
            seg_v = np.where(dt[:, None] > 0, disp / dt[:, None], 0.0)
        idx = np.searchsorted(self.times, t, side="right") - 1
        inside = (idx >= 0) & (idx < k - 1)
        out[inside] = seg_v[idx[inside]]
        return out


def position_at(trace: NodeTrace, t: float) -> Vec2:
    tl = trace._tlist
    if not tl:
        raise UsageError(f"node {trace.node_id}: empty trace")
    i = bisect_right(tl, t) - 1
    if i < 0:
        x, y = trace.xy[0]
        return Vec2(float(x), float(y))
    if i >= len(tl) - 1:
        x, y = trace.xy[-1]
        return Vec2(float(x), float(y))
    t0, t1 = tl[i], tl[i + 1]
    x0, y0 = trace.xy[i]
    x1, y1 = trace.xy[i + 1]
    f = (t - t0) / (t1 - t0) if t1 > t0 else 0.0
    return Vec2(float(x0 + f * (x1 - x0)), float(y0 + f * (y1 - y0)))


def velocity_at(trace: NodeTrace, t: float) -> Vec2:
    tl = trace._tlist
    if not tl:
        raise UsageError(f"node {trace.node_id}: empty trace")
    i = bisect_right(tl, t) - 1
    if i < 0 or i >= len(tl) - 1:
        return Vec2(0.0, 0.0)
    dt = tl[i + 1] - tl[i]
    if dt <= 0:
        return Vec2(0.0, 0.0)
    (x0, y0), (x1, y1) = trace.xy[i], trace.xy[i + 1]
    return Vec2(float((x1 - x0) / dt), float((y1 - y0) / dt))


def segment_speeds(trace: NodeTrace) -> np.ndarray:
    dt = np.diff(trace.times)
    dist = np.hypot(*np.diff(trace.xy, axis=0).T)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(dt > 0, dist / np.where(dt > 0, dt, 1.0), 0.0)


@dataclass(frozen=True)
class Scenario:
    area_width: float
    area_height: float
    duration: float
    radio_range: float
    traces: tuple[NodeTrace, ...] = ()
    model: str | None = None
    # group id per node for group models (None for entity models)
    groups: tuple[int, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "traces", tuple(self.traces))
        if self.groups is not None:
            object.__setattr__(self, "groups", tuple(int(g) for g in self.groups))

    @property
    def node_count(self) -> int:
        return len(self.traces)

    def positions(self, times) -> np.ndarray:
        """All node positions at the given times, shape (T, N, 2)."""
        times = np.asarray(times, dtype=float)
        out = np.empty((len(times), self.node_count, 2))
        for n, tr in enumerate(self.traces):
            out[:, n, :] = tr.positions(times)
        return out

    def velocities(self, times) -> np.ndarray:
        times = np.asarray(times, dtype=float)
        out = np.empty((len(times), self.node_count, 2))
        for n, tr in enumerate(self.traces):
            out[:, n, :] = tr.velocities(times)
        return out

    def translated(self, dx: float, dy: float) -> "Scenario":
        """Rigidly shifted copy; the area is not changed (used by invariance checks)."""
        traces = [NodeTrace(tr.node_id, tr.times, tr.xy + (dx, dy)) for tr in self.traces]
        return Scenario(self.area_width, self.area_height, self.duration, self.radio_range,
                        traces, self.model, self.groups)

    def relabeled(self, perm: Sequence[int]) -> "Scenario":
        """Copy where old node i becomes node perm[i]."""
        traces = [None] * self.node_count
        for old, new in enumerate(perm):
            traces[new] = self.traces[old].with_id(new)
        groups = None
        if self.groups is not None:
            groups = [0] * self.node_count
            for old, new in enumerate(perm):
                groups[new] = self.groups[old]
        return Scenario(self.area_width, self.area_height, self.duration, self.radio_range,
                        traces, self.model, groups)


@dataclass(frozen=True)
class ScenarioConfig:
    model: str = "RWP"
    node_count: int = 90
    area_width: float = 1000.0
    area_height: float = 1000.0
    min_speed: float = 0.5
    max_speed: float = 20.0
    max_pause: float = 10.0
    duration: float = 900.0
    radio_range: float = 75.0
    group_size: int = 5
    gm_alpha: float = 0.75
    gm_update_interval: float = 1.0
    # None -> max_speed / 2
    gm_mean_speed: float | None = None
    # std devs of the Gaussian innovations; None -> max_speed / 4 and pi / 4
    gm_speed_sigma: float | None = None
    gm_direction_sigma: float | None = None
    rpgm_max_deviation: float = 50.0
    rpgm_deviation_speed: float = 1.0
    rpgm_update_interval: float = 1.0
    ncmm_roam_radius: float = 100.0
    seed: int = 0

    def check(self) -> None:
        if self.model not in MODELS:
            raise ConfigError(f"unknown model {self.model!r}; expected one of {', '.join(MODELS)}")
        if self.node_count < 1:
            raise ConfigError("node_count must be >= 1")
        if not (self.area_width > 0 and self.area_height > 0):
            raise ConfigError("area must have positive width and height")
        if self.max_speed <= 0:
            raise ConfigError("max_speed must be > 0")
        if not (0 <= self.min_speed <= self.max_speed):
            raise ConfigError("need 0 <= min_speed <= max_speed")
        if self.max_pause < 0:
            raise ConfigError("max_pause must be >= 0")
        if self.duration <= 0:
            raise ConfigError("duration must be > 0")
        if self.radio_range <= 0:
            raise ConfigError("radio_range must be > 0")
        if self.model in GROUP_MODELS:
            if self.group_size < 1:
                raise ConfigError("group_size must be >= 1")
            if self.group_size > self.node_count:
                raise ConfigError(
                    f"group_size {self.group_size} exceeds node_count {self.node_count}")
        if self.model == "GM":
            if not 0 <= self.gm_alpha <= 1:
                raise ConfigError(f"gm_alpha {self.gm_alpha} outside [0, 1]")
            if self.gm_update_interval <= 0:
                raise ConfigError("gm_update_interval must be > 0")
        if self.rpgm_max_deviation < 0 or self.rpgm_deviation_speed < 0:
            raise ConfigError("rpgm deviation parameters must be >= 0")
        if self.rpgm_update_interval <= 0:
            raise ConfigError("rpgm_update_interval must be > 0")
        if self.ncmm_roam_radius < 0:
            raise ConfigError("ncmm_roam_radius must be >= 0")

    @property
    def mean_speed(self) -> float:
        return self.max_speed / 2 if self.gm_mean_speed is None else self.gm_mean_speed

    @property
    def speed_sigma(self) -> float:
        return self.max_speed / 4 if self.gm_speed_sigma is None else self.gm_speed_sigma

    @property
    def direction_sigma(self) -> float:
        return math.pi / 4 if self.gm_direction_sigma is None else self.gm_direction_sigma


class RandomStream:
    """Seeded PCG64 stream (numpy) with deterministic child streams.

    Equal seeds give bit-identical draw sequences; `spawn` derives
    independent children so per-node generation does not depend on how many
    draws other nodes consumed.
    """

    def __init__(self, seed: int | np.random.SeedSequence = 0):
        if isinstance(seed, np.random.SeedSequence):
            self._seq = seed
            self.seed = seed.entropy
        else:
            self.seed = int(seed)
            self._seq = np.random.SeedSequence(self.seed)
        self.gen = np.random.Generator(np.random.PCG64(self._seq))

    def spawn(self, n: int) -> list["RandomStream"]:
        return [RandomStream(s) for s in self._seq.spawn(n)]

    def uniform(self, low: float = 0.0, high: float = 1.0, size=None):
        return self.gen.uniform(low, high, size)

    def normal(self, size=None):
        return self.gen.standard_normal(size)

    def integers(self, low, high=None, size=None):
        return self.gen.integers(low, high, size)

    def choice(self, n, size, replace=True):
        return self.gen.choice(n, size=size, replace=replace)

    def in_disc(self, radius: float) -> tuple[float, float]:
        """Uniform point in a disc of the given radius centred on the origin."""
        r = radius * math.sqrt(self.gen.random())
        a = 2 * math.pi * self.gen.random()
        return r * math.cos(a), r * math.sin(a)


@dataclass(frozen=True)
class Violation:
    kind: str
    node_id: int | None
    index: int | None
    message: str

    def __str__(self) -> str:
        return self.message


def validate(scenario: Scenario, config: ScenarioConfig | None = None) -> list[Violation]:
    """Check a scenario; an empty list means it is valid.

    When `config` is given, segment speeds are also checked against
    `config.max_speed` with a 1e-6 relative tolerance.
    """
    out: list[Violation] = []
    if scenario.node_count == 0:
        out.append(Violation("empty", None, None, "scenario has no nodes (node_count >= 1 required)"))
        return out
    w, h = scenario.area_width, scenario.area_height
    seen: set[int] = set()
    for pos, tr in enumerate(scenario.traces):
        nid = tr.node_id
        if nid in seen:
            out.append(Violation("duplicate id", nid, None, f"duplicate node_id {nid}"))
        seen.add(nid)
        if len(tr) == 0:
            out.append(Violation("empty trace", nid, None, f"node {nid}: empty trace"))
            continue
        if not (np.all(np.isfinite(tr.times)) and np.all(np.isfinite(tr.xy))):
            out.append(Violation("non-finite", nid, None, f"node {nid}: non-finite waypoint"))
            continue
        if tr.times[0] != 0:
            out.append(Violation("start time", nid, 0, f"node {nid}: first waypoint at t={tr.times[0]:g}, expected 0"))
        back = np.flatnonzero(np.diff(tr.times) < 0)
        for i in back:
            out.append(Violation("time regression", nid, int(i) + 1,
                                 f"node {nid}: time regression at waypoint {i + 1} "
                                 f"({tr.times[i]:g} -> {tr.times[i + 1]:g})"))
        x, y = tr.xy[:, 0], tr.xy[:, 1]
        bad = np.flatnonzero((x < 0) | (x > w) | (y < 0) | (y > h))
        for i in bad:
            out.append(Violation("out of bounds", nid, int(i),
                                 f"node {nid}: waypoint {i} at ({x[i]:g}, {y[i]:g}) out of bounds "
                                 f"for {w:g}x{h:g} area"))
        if config is not None and len(tr) > 1:
            sp = segment_speeds(tr)
            fast = np.flatnonzero(sp > config.max_speed * (1 + 1e-6))
            for i in fast:
                out.append(Violation("speed", nid, int(i),
                                     f"node {nid}: segment {i} speed {sp[i]:.6g} exceeds max_speed "
                                     f"{config.max_speed:g}"))
    expected = set(range(scenario.node_count))
    if seen != expected:
        missing = sorted(expected - seen)
        out.append(Violation("node ids", None, None,
                             f"node ids are not 0..{scenario.node_count - 1}; missing {missing[:5]}"))
    return out
