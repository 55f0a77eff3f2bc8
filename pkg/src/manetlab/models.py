"""Mobility model generators: Random Waypoint, Gauss-Markov, RPGM and Nomadic.

Every generator is a pure function of (config, rng) and returns a Scenario
whose traces cover [0, duration].
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .trace import (
    ConfigError, NodeTrace, RandomStream, Scenario, ScenarioConfig,
)


@dataclass(frozen=True)
class GmState:
    """Gauss-Markov state; fields may be floats or equal-shape arrays."""

    speed: float
    direction: float
    mean_speed: float
    mean_direction: float
    alpha: float


def gm_update(state: GmState, gauss_v, gauss_d, max_speed: float = math.inf) -> GmState:
    """One Gauss-Markov step for speed and direction.

    `gauss_v` and `gauss_d` are the innovations already scaled to their
    standard deviations. The new speed is clamped to [0, max_speed].
    """
    a = state.alpha
    if np.any(np.asarray(a) < 0) or np.any(np.asarray(a) > 1):
        raise ConfigError(f"alpha {a} outside [0, 1]")
    root = np.sqrt(1.0 - a * a)
    speed = a * state.speed + (1.0 - a) * state.mean_speed + root * gauss_v
    direction = a * state.direction + (1.0 - a) * state.mean_direction + root * gauss_d
    speed = np.clip(speed, 0.0, max_speed)
    if np.ndim(speed) == 0:
        speed, direction = float(speed), float(direction)
    return replace(state, speed=speed, direction=direction)


def gm_advance(position, state: GmState, dt: float):
    x, y = position
    step = state.speed * dt
    return x + step * np.cos(state.direction), y + step * np.sin(state.direction)


def _check(config: ScenarioConfig, model: str) -> None:
    if config.model != model:
        raise ConfigError(f"config.model is {config.model!r}, expected {model!r}")
    config.check()


def _rwp_path(rng: RandomStream, width, height, min_speed, max_speed, max_pause, duration,
              start=None):
    """Random waypoint legs until `duration` is covered. Returns (times, xy) lists."""
    u = rng.gen.random
    if start is None:
        x, y = u() * width, u() * height
    else:
        x, y = start
    t = 0.0
    times, pts = [0.0], [(x, y)]
    while t < duration:
        nx, ny = u() * width, u() * height
        speed = min_speed + (max_speed - min_speed) * u()
        dist = math.hypot(nx - x, ny - y)
        if dist == 0.0 or speed <= 0.0:
            continue
        t += dist / speed
        x, y = nx, ny
        times.append(t)
        pts.append((x, y))
        pause = max_pause * u()
        if pause > 0 and t < duration:
            t += pause
            times.append(t)
            pts.append((x, y))
    return times, pts


def generate_rwp(config: ScenarioConfig, rng: RandomStream | None = None) -> Scenario:
    _check(config, "RWP")
    rng = rng or RandomStream(config.seed)
    traces = []
    for n, sub in enumerate(rng.spawn(config.node_count)):
        times, pts = _rwp_path(sub, config.area_width, config.area_height, config.min_speed,
                               config.max_speed, config.max_pause, config.duration)
        traces.append(NodeTrace(n, times, pts))
    return Scenario(config.area_width, config.area_height, config.duration, config.radio_range,
                    traces, "RWP")


def _unwrap_near(angle, ref):
    """Shift `angle` by a multiple of 2*pi to lie within pi of `ref`."""
    return ref + (angle - ref + np.pi) % (2 * np.pi) - np.pi


def generate_gm(config: ScenarioConfig, rng: RandomStream | None = None) -> Scenario:
    _check(config, "GM")
    rng = rng or RandomStream(config.seed)
    n = config.node_count
    w, h, dt = config.area_width, config.area_height, config.gm_update_interval
    vmax = config.max_speed
    margin = 2 * vmax * dt
    steps = int(math.ceil(config.duration / dt - 1e-12))

    x = rng.uniform(0, w, n)
    y = rng.uniform(0, h, n)
    direction = rng.uniform(0, 2 * np.pi, n)
    state = GmState(
        speed=np.full(n, float(config.mean_speed)),
        direction=direction,
        mean_speed=np.full(n, float(config.mean_speed)),
        mean_direction=direction.copy(),
        alpha=config.gm_alpha,
    )
    xs = np.empty((steps + 1, n))
    ys = np.empty((steps + 1, n))
    xs[0], ys[0] = x, y
    sv, sd = config.speed_sigma, config.direction_sigma
    for j in range(1, steps + 1):
        # position update uses the previous interval's speed and direction
        x, y = gm_advance((x, y), state, dt)
        x = np.clip(x, 0.0, w)
        y = np.clip(y, 0.0, h)
        xs[j], ys[j] = x, y
        near = (x < margin) | (x > w - margin) | (y < margin) | (y > h - margin)
        mean_dir = state.mean_direction
        if near.any():
            to_center = np.arctan2(h / 2 - y, w / 2 - x)
            mean_dir = np.where(near, _unwrap_near(to_center, state.direction), mean_dir)
        state = gm_update(replace(state, mean_direction=mean_dir),
                          sv * rng.normal(n), sd * rng.normal(n), vmax)
    times = np.arange(steps + 1) * dt
    traces = [NodeTrace(i, times, np.column_stack([xs[:, i], ys[:, i]])) for i in range(n)]
    return Scenario(w, h, config.duration, config.radio_range, traces, "GM")


def group_members(node_count: int, group_size: int) -> list[list[int]]:
    """Consecutive node ids split into groups; the last group may be smaller."""
    return [list(range(s, min(s + group_size, node_count)))
            for s in range(0, node_count, group_size)]


def _group_ids(groups) -> list[int]:
    out = []
    for g, members in enumerate(groups):
        out.extend([g] * len(members))
    return out


def _max_scale(base, step, limit):
    """Largest lam in [0, 1] with |base + lam*step| <= limit, given |base| <= limit."""
    bx, by = base
    sx, sy = step
    a = sx * sx + sy * sy
    if a == 0.0:
        return 1.0
    b = 2 * (bx * sx + by * sy)
    c = bx * bx + by * by - limit * limit
    if a + b + c <= 0.0:
        return 1.0
    disc = max(b * b - 4 * a * c, 0.0)
    lam = (-b + math.sqrt(disc)) / (2 * a)
    return min(max(lam, 0.0), 1.0)


def generate_rpgm(config: ScenarioConfig, rng: RandomStream | None = None) -> Scenario:
    """Reference Point Group Mobility.

    The first node of each group is its leader and moves RWP-style between
    checkpoints. Each member's deviation from the leader is a bounded random
    walk: every `rpgm_update_interval` a fresh target offset is drawn
    uniformly in the deviation disc and the current offset moves toward it
    at no more than `rpgm_deviation_speed`. Leader speeds are capped at
    max_speed - rpgm_deviation_speed so members never exceed max_speed.
    """
    _check(config, "RPGM")
    rng = rng or RandomStream(config.seed)
    w, h, T = config.area_width, config.area_height, config.duration
    R = config.rpgm_max_deviation
    dev_speed = min(config.rpgm_deviation_speed, config.max_speed - config.min_speed)
    lead_max = config.max_speed - dev_speed
    dt = config.rpgm_update_interval
    groups = group_members(config.node_count, config.group_size)
    traces: list[NodeTrace] = [None] * config.node_count
    steps = int(math.ceil(T / dt - 1e-12))
    grid = np.arange(steps + 1) * dt
    leaders, draws = [], []
    for members, sub in zip(groups, rng.spawn(len(groups))):
        lt, lp = _rwp_path(sub, w, h, config.min_speed, lead_max, config.max_pause, T)
        leaders.append((np.asarray(lt), np.asarray(lp)))
        traces[members[0]] = NodeTrace(members[0], lt, lp)
        k = len(members) - 1
        if k and R > 0:
            # radius and angle uniforms for the start offset and every target
            draws.append(sub.gen.random((steps + 1, 2, k)))
    if R > 0 and draws:
        u = np.concatenate(draws, axis=2)
        rr = R * np.sqrt(u[:, 0])
        aa = 2 * np.pi * u[:, 1]
        target = np.stack([rr * np.cos(aa), rr * np.sin(aa)], axis=-1)
        off = np.empty_like(target)
        off[0] = target[0]
        max_step = dev_speed * dt
        for j in range(1, steps + 1):
            step = target[j] - off[j - 1]
            norm = np.hypot(step[:, 0], step[:, 1])
            scale = np.minimum(1.0, max_step / np.maximum(norm, 1e-300))
            off[j] = off[j - 1] + step * scale[:, None]
    col = 0
    for members, (lt, lp) in zip(groups, leaders):
        followers = members[1:]
        if not followers:
            continue
        if R == 0:
            for m in followers:
                traces[m] = NodeTrace(m, lt, lp)
            continue
        times = np.union1d(grid, lt[lt <= grid[-1]])
        lx = np.interp(times, lt, lp[:, 0])
        ly = np.interp(times, lt, lp[:, 1])
        for m in followers:
            ox = np.interp(times, grid, off[:, col, 0])
            oy = np.interp(times, grid, off[:, col, 1])
            col += 1
            xy = np.column_stack([np.clip(lx + ox, 0, w), np.clip(ly + oy, 0, h)])
            traces[m] = NodeTrace(m, times, xy)
    return Scenario(w, h, T, config.radio_range, traces, "RPGM", _group_ids(groups))


def _in_area(x, y, w, h):
    return 0.0 <= x <= w and 0.0 <= y <= h


def _offset_in_area(rng: RandomStream, ax, ay, R, w, h):
    for _ in range(64):
        ox, oy = rng.in_disc(R)
        if _in_area(ax + ox, ay + oy, w, h):
            return ox, oy
    return 0.0, 0.0


def _clip_pt(x, y, w, h):
    return min(max(x, 0.0), w), min(max(y, 0.0), h)


def _ncmm_member(rng: RandomStream, anchor_t, anchor_p, config: ScenarioConfig):
    """Trace of one nomadic member around its group's anchor."""
    w, h, R = config.area_width, config.area_height, config.ncmm_roam_radius
    vmin, vmax, pmax = config.min_speed, config.max_speed, config.max_pause
    u = rng.gen.random
    ax, ay = anchor_p[0]
    ox, oy = _offset_in_area(rng, ax, ay, R, w, h)
    x, y = _clip_pt(ax + ox, ay + oy, w, h)
    times, pts = [0.0], [(x, y)]
    for i in range(len(anchor_t) - 1):
        t0, t1 = anchor_t[i], anchor_t[i + 1]
        (ax0, ay0), (ax1, ay1) = anchor_p[i], anchor_p[i + 1]
        if ax0 == ax1 and ay0 == ay1:
            # anchor pauses: RWP inside the roaming disc until it leaves
            t = t0
            while t < t1:
                dox, doy = _offset_in_area(rng, ax0, ay0, R, w, h)
                tx, ty = ax0 + dox, ay0 + doy
                speed = vmin + (vmax - vmin) * u()
                dist = math.hypot(tx - x, ty - y)
                if dist == 0.0 or speed <= 0.0:
                    break
                arrive = t + dist / speed
                if arrive >= t1:
                    f = (t1 - t) / (arrive - t)
                    x, y = x + f * (tx - x), y + f * (ty - y)
                    times.append(t1)
                    pts.append((x, y))
                    break
                x, y, t = tx, ty, arrive
                times.append(t)
                pts.append((x, y))
                resume = min(t + pmax * u(), t1)
                if resume > t:
                    t = resume
                    times.append(t)
                    pts.append((x, y))
            if times[-1] < t1:
                times.append(t1)
                pts.append((x, y))
        else:
            # anchor relocates: head straight for a spot in the new disc
            tox, toy = _offset_in_area(rng, ax1, ay1, R, w, h)
            cur_ox, cur_oy = x - ax0, y - ay0
            base = (ax1 - ax0, ay1 - ay0)
            step = (tox - cur_ox, toy - cur_oy)
            lam = _max_scale(base, step, vmax * (t1 - t0))
            nx, ny = _clip_pt(ax1 + cur_ox + lam * step[0], ay1 + cur_oy + lam * step[1], w, h)
            x, y = nx, ny
            times.append(t1)
            pts.append((x, y))
    return times, pts


def generate_ncmm(config: ScenarioConfig, rng: RandomStream | None = None) -> Scenario:
    """Nomadic community mobility.

    Each group has an invisible anchor moving RWP-style. Members roam
    RWP-style inside a disc of radius `ncmm_roam_radius` around the paused
    anchor and travel in a straight line to a point of the next disc while
    the anchor relocates. All group members are visible nodes.
    """
    _check(config, "NCMM")
    rng = rng or RandomStream(config.seed)
    w, h, T = config.area_width, config.area_height, config.duration
    groups = group_members(config.node_count, config.group_size)
    traces: list[NodeTrace] = [None] * config.node_count
    for members, sub in zip(groups, rng.spawn(len(groups))):
        anchor_rng, *member_rngs = sub.spawn(len(members) + 1)
        at, ap = _rwp_path(anchor_rng, w, h, config.min_speed, config.max_speed,
                           config.max_pause, T)
        for m, mrng in zip(members, member_rngs):
            if config.ncmm_roam_radius == 0:
                traces[m] = NodeTrace(m, at, ap)
            else:
                mt, mp = _ncmm_member(mrng, at, ap, config)
                traces[m] = NodeTrace(m, mt, mp)
    return Scenario(w, h, T, config.radio_range, traces, "NCMM", _group_ids(groups))


def anchor_trace(config: ScenarioConfig, group: int, rng: RandomStream | None = None) -> NodeTrace:
    """Re-derive the invisible NCMM anchor of `group` (same seed, same path)."""
    _check(config, "NCMM")
    rng = rng or RandomStream(config.seed)
    groups = group_members(config.node_count, config.group_size)
    sub = rng.spawn(len(groups))[group]
    anchor_rng = sub.spawn(len(groups[group]) + 1)[0]
    at, ap = _rwp_path(anchor_rng, config.area_width, config.area_height, config.min_speed,
                       config.max_speed, config.max_pause, config.duration)
    return NodeTrace(-1, at, ap)


GENERATORS = {
    "RWP": generate_rwp,
    "GM": generate_gm,
    "RPGM": generate_rpgm,
    "NCMM": generate_ncmm,
}


def generate(config: ScenarioConfig, rng: RandomStream | None = None) -> Scenario:
    """Dispatch on `config.model`; the stream defaults to one seeded by `config.seed`."""
    config.check()
    return GENERATORS[config.model](config, rng)
