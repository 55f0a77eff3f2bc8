"""Trace interchange (ns-2 setdest movements, BonnMotion) and CSV reports."""
from __future__ import annotations

import csv
import io
import math
import re
from dataclasses import fields, is_dataclass

import numpy as np

from .trace import NodeTrace, ParseError, Scenario, position_at

# -- ns-2 ------------------------------------------------------------------------------


def _speed(dist: float, dt: float) -> str:
    """6 decimals, or more digits when 6 would misplace the arrival by over 1 um."""
    v = dist / dt
    short = f"{v:.6f}"
    if float(short) > 0 and abs(dist / float(short) - dt) * v <= 1e-6:
        return short
    return f"{v:.15g}"


def export_ns2_movements(scenario: Scenario) -> str:
    """ns-2 movement script: initial X_/Y_/Z_ per node, then one setdest per segment.

    Each setdest is issued at the segment start and names the segment end and
    speed. Pauses produce no line. Coordinates and times use 6 decimals.
    """
    lines = []
    for tr in scenario.traces:
        i = tr.node_id
        x, y = tr.xy[0]
        lines.append(f"$node_({i}) set X_ {x:.6f}")
        lines.append(f"$node_({i}) set Y_ {y:.6f}")
        lines.append(f"$node_({i}) set Z_ 0.0")
    for tr in scenario.traces:
        i = tr.node_id
        t, xy = tr.times, tr.xy
        for k in range(len(t) - 1):
            dt = t[k + 1] - t[k]
            dist = math.hypot(xy[k + 1, 0] - xy[k, 0], xy[k + 1, 1] - xy[k, 1])
            if dist == 0.0 or dt <= 0.0:
                continue
            lines.append(f'$ns_ at {t[k]:.6f} "$node_({i}) setdest '
                         f'{xy[k + 1, 0]:.6f} {xy[k + 1, 1]:.6f} {_speed(dist, dt)}"')
    return "\n".join(lines) + "\n"


_NS2_SET = re.compile(r'^\$node_\((\d+)\)\s+set\s+([XYZ])_\s+(\S+)\s*$')
_NS2_DEST = re.compile(
    r'^\$ns_\s+at\s+(\S+)\s+"\$node_\((\d+)\)\s+setdest\s+(\S+)\s+(\S+)\s+(\S+)"\s*$')


def _num(tok: str, line: int, col: int) -> float:
    try:
        v = float(tok)
    except ValueError:
        raise ParseError(f"not a number: {tok!r}", line, col) from None
    if not math.isfinite(v):
        raise ParseError(f"non-finite value {tok!r}", line, col)
    return v


def import_ns2_movements(text: str, duration: float, area_width: float = 1000.0,
                         area_height: float = 1000.0, radio_range: float = 75.0) -> Scenario:
    """Rebuild waypoint traces from an ns-2 movement script.

    A setdest issued while a node is still moving interrupts the current leg
    at the interpolated position, as in ns-2.
    """
    init: dict[int, dict[str, float]] = {}
    cmds: dict[int, list[tuple[float, float, float, float, int]]] = {}
    for ln, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        m = _NS2_SET.match(line)
        if m:
            node, axis = int(m.group(1)), m.group(2)
            init.setdefault(node, {})[axis] = _num(m.group(3), ln, m.start(3) + 1)
            continue
        m = _NS2_DEST.match(line)
        if m:
            t = _num(m.group(1), ln, m.start(1) + 1)
            node = int(m.group(2))
            x = _num(m.group(3), ln, m.start(3) + 1)
            y = _num(m.group(4), ln, m.start(4) + 1)
            v = _num(m.group(5), ln, m.start(5) + 1)
            cmds.setdefault(node, []).append((t, x, y, v, ln))
            continue
        raise ParseError(f"unrecognised ns-2 movement line: {line!r}", ln, 1)
    traces = []
    for node in sorted(set(init) | set(cmds)):
        xy0 = init.get(node, {})
        if "X" not in xy0 or "Y" not in xy0:
            raise ParseError(f"node {node} has no initial X_/Y_ position")
        times, pts = [0.0], [(xy0["X"], xy0["Y"])]
        for t, x, y, v, ln in sorted(cmds.get(node, []), key=lambda c: c[0]):
            if v <= 0:
                continue
            if t < times[-1]:
                # interrupt the running leg
                probe = NodeTrace(node, times, pts)
                px, py = position_at(probe, t)
                while times and times[-1] > t:
                    times.pop()
                    pts.pop()
                times.append(t)
                pts.append((px, py))
            elif t > times[-1]:
                times.append(t)
                pts.append(pts[-1])
            cx, cy = pts[-1]
            dist = math.hypot(x - cx, y - cy)
            if dist == 0:
                continue
            # snap to the 6-decimal grid the times were written on, so an arrival
            # that coincides with a later (unwritten) waypoint time lands on it exactly
            times.append(max(round(t + dist / v, 6), math.nextafter(t, math.inf)))
            pts.append((x, y))
        traces.append(NodeTrace(node, times, pts))
    return Scenario(area_width, area_height, duration, radio_range, traces)


# -- BonnMotion --------------------------------------------------------------------------


def export_bonnmotion(scenario: Scenario) -> str:
    """One line per node of whitespace-separated `t x y` triples."""
    out = []
    for tr in scenario.traces:
        out.append(" ".join(f"{t:.6f} {x:.6f} {y:.6f}" for t, (x, y) in zip(tr.times, tr.xy)))
    return "\n".join(out) + ("\n" if out else "")


def import_bonnmotion(text: str, duration: float, area_width: float = 1000.0,
                      area_height: float = 1000.0, radio_range: float = 75.0) -> Scenario:
    traces = []
    for ln, raw in enumerate(text.splitlines(), 1):
        if not raw.strip():
            continue
        toks = [(m.group(0), m.start() + 1) for m in re.finditer(r"\S+", raw)]
        if len(toks) % 3:
            raise ParseError(f"incomplete 't x y' triple ({len(toks)} values on the line)",
                             ln, toks[len(toks) - len(toks) % 3][1])
        times, pts = [], []
        for k in range(0, len(toks), 3):
            t = _num(toks[k][0], ln, toks[k][1])
            x = _num(toks[k + 1][0], ln, toks[k + 1][1])
            y = _num(toks[k + 2][0], ln, toks[k + 2][1])
            if times and t < times[-1]:
                raise ParseError(f"time regression ({times[-1]:g} -> {t:g})", ln, toks[k][1])
            if not (0 <= x <= area_width):
                raise ParseError(f"x={x:g} outside [0, {area_width:g}]", ln, toks[k + 1][1])
            if not (0 <= y <= area_height):
                raise ParseError(f"y={y:g} outside [0, {area_height:g}]", ln, toks[k + 2][1])
            times.append(t)
            pts.append((x, y))
        traces.append(NodeTrace(len(traces), times, pts))
    return Scenario(area_width, area_height, duration, radio_range, traces)


# -- CSV ---------------------------------------------------------------------------------

_UNITS = {
    "avg_node_degree": "nodes", "avg_partitions": "count", "total_link_changes": "count",
    "link_changes_per_pair": "count", "avg_link_duration": "s", "avg_relative_speed": "m/s",
    "sample_interval": "s", "radio_range": "m", "node_count": "nodes", "duration": "s",
    "pdr": "%", "avg_delay": "s", "nrl": "ratio", "sent_data": "pkts", "delivered_data": "pkts",
    "routing_packets": "pkts", "routing_radio_range": "m",
    "ND": "nodes", "NP": "count", "LC": "count", "LC_per_pair": "count", "LD": "s", "RS": "m/s",
    "PDR": "%", "delay": "s", "NRL": "ratio", "sent": "pkts", "delivered": "pkts",
    "speed": "m/s", "margin": "metric units", "rho": "-",
}


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (float, np.floating)):
        return "" if math.isnan(v) else repr(float(v))
    if isinstance(v, np.integer):
        return str(int(v))
    return str(v)


def _head(name: str) -> str:
    u = _UNITS.get(name)
    return f"{name} [{u}]" if u else name


def _flatten(rec) -> dict:
    from .experiment import AggregateRow, SeparationEntry
    from .routesim import PerfReport

    if isinstance(rec, PerfReport):
        d = {f.name: getattr(rec, f.name) for f in fields(rec) if f.name != "drops"}
        d["nrl_undefined"] = rec.nrl is None
        for cause, n in rec.drops.items():
            d[f"drop_{cause}"] = n
        return d
    if isinstance(rec, AggregateRow):
        d = {"model": rec.model, "speed": rec.speed, "n_seeds": rec.n}
        for name in rec.mean:
            d[f"{name}_mean"] = rec.mean[name]
            d[f"{name}_std"] = rec.std[name]
        if "NRL" in rec.mean:
            d["nrl_undefined"] = math.isnan(rec.mean["NRL"])
        return d
    if isinstance(rec, SeparationEntry):
        d = {f.name: getattr(rec, f.name) for f in fields(rec)}
        d["normalized_margin"] = rec.normalized_margin
        return d
    if is_dataclass(rec):
        return {f.name: getattr(rec, f.name) for f in fields(rec)}
    return dict(rec)


def _column_head(col: str) -> str:
    for suffix in ("_mean", "_std", "_min", "_max"):
        if col.endswith(suffix) and col[: -len(suffix)] in _UNITS:
            return f"{col} [{_UNITS[col[: -len(suffix)]]}]"
    return _head(col)


def csv_columns(kind) -> list[str]:
    """Column names for an empty record set of dataclass type `kind`."""
    from .routesim import PerfReport

    names = [f.name for f in fields(kind) if f.name != "drops"]
    if kind is PerfReport:
        from .routesim import DROP_CAUSES
        names += ["nrl_undefined"] + [f"drop_{c}" for c in DROP_CAUSES]
    return names


def emit_csv(records, kind=None) -> str:
    """Header naming every column (with units) and one row per record.

    Floats use repr so output is byte-deterministic; an undefined NRL is an
    empty cell with `nrl_undefined=1`.
    """
    records = list(records)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if not records:
        if kind is None:
            return ""
        w.writerow([_column_head(c) for c in csv_columns(kind)])
        return buf.getvalue()
    rows = [_flatten(r) for r in records]
    cols = list(rows[0])
    for r in rows[1:]:
        for c in r:
            if c not in cols:
                cols.append(c)
    w.writerow([_column_head(c) for c in cols])
    for r in rows:
        w.writerow([_fmt(r.get(c)) for c in cols])
    return buf.getvalue()
