"""Discrete-event CBR/UDP simulation over an AODV-style reactive protocol.

The MAC is idealised: no collisions or contention, every transmission takes
size * 8 / data_rate plus a fixed per-hop processing time. Link existence is
read from a unit-disk contact structure sampled every `contact_interval`
seconds at the routing radio range. Relative to RFC 3561 this AODV-lite has
no HELLO messages, no local repair and no gratuitous RREP; link breaks are
detected when a unicast is attempted over a link that no longer exists.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field, fields

import numpy as np

from .trace import ConfigError, RandomStream, Scenario, UsageError

# expanding ring search, RFC 3561 values
TTL_START = 1
TTL_INCREMENT = 2
TTL_THRESHOLD = 7
NODE_TRAVERSAL_TIME = 0.04
TIMEOUT_BUFFER = 2
# hold-down after a failed discovery before the destination is tried again
MAX_RREQ_TIMEOUT = 10.0

# sim_end: still buffered or in flight when the run stops
DROP_CAUSES = ("no_route", "buffer_overflow", "link_break", "ttl_expired", "sim_end")


@dataclass(frozen=True)
class Flow:
    source: int
    destination: int
    packet_size: int = 512
    rate: float = 4.0
    start: float = 0.0
    stop: float = 300.0

    def __post_init__(self):
        if self.source == self.destination:
            raise ConfigError(f"flow source equals destination ({self.source})")
        if self.rate <= 0:
            raise ConfigError("flow rate must be > 0")
        if not self.start < self.stop:
            raise ConfigError("flow start must precede stop")


@dataclass(frozen=True)
class SimParams:
    data_rate: float = 2_000_000.0          # bit/s
    per_hop_processing: float = 0.001
    rreq_ttl_max: int | None = None         # None -> node count
    route_lifetime: float = 10.0
    discovery_timeout: float = 1.0
    max_buffered_per_flow: int = 64
    rreq_retries: int = 2
    broadcast_jitter_max: float = 0.01
    routing_radio_range: float = 250.0
    contact_interval: float = 0.1
    control_packet_size: int = 48           # bytes incl. IP header
    max_connections: int = 15
    packet_size: int = 512
    sending_rate: float = 4.0               # packets/s
    flow_start_max: float = 10.0
    duration: float = 300.0

    def check(self) -> None:
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "rreq_ttl_max" and v is None:
                continue
            if f.name == "rreq_retries":
                if v < 0:
                    raise ConfigError("rreq_retries must be >= 0")
                continue
            if f.name == "flow_start_max":
                if v < 0:
                    raise ConfigError("flow_start_max must be >= 0")
                continue
            if not v > 0:
                raise ConfigError(f"{f.name} must be positive, got {v!r}")

    def hop_time(self, size_bytes: int) -> float:
        return size_bytes * 8 / self.data_rate + self.per_hop_processing


@dataclass
class SimCounters:
    sent: int = 0
    delivered: int = 0
    routing_packets: int = 0
    delay_sum: float = 0.0
    drops: dict = field(default_factory=lambda: dict.fromkeys(DROP_CAUSES, 0))
    rreq_sent: int = 0
    rrep_sent: int = 0
    rerr_sent: int = 0
    discoveries: int = 0


@dataclass(frozen=True)
class PerfReport:
    pdr: float
    avg_delay: float
    nrl: float | None
    sent_data: int
    delivered_data: int
    routing_packets: int
    drops: dict
    routing_radio_range: float = 250.0

    @property
    def nrl_undefined(self) -> bool:
        return self.nrl is None

    @property
    def dropped_data(self) -> int:
        return sum(self.drops.values())

    @property
    def conserved(self) -> bool:
        return self.sent_data == self.delivered_data + self.dropped_data

    # short names used by experiment reports
    @property
    def PDR(self) -> float:
        return self.pdr

    @property
    def delay(self) -> float:
        return self.avg_delay

    @property
    def NRL(self) -> float | None:
        return self.nrl


def compute_perf(c: SimCounters, routing_radio_range: float = 250.0) -> PerfReport:
    """PDR in percent, mean delay over delivered packets, NRL per delivered packet.

    NRL is None (undefined) when nothing was delivered; the delay is then 0.
    """
    pdr = 100.0 * c.delivered / c.sent if c.sent else 0.0
    delay = c.delay_sum / c.delivered if c.delivered else 0.0
    nrl = c.routing_packets / c.delivered if c.delivered else None
    return PerfReport(pdr, delay, nrl, c.sent, c.delivered, c.routing_packets, dict(c.drops),
                      routing_radio_range)


def build_flows(node_count: int, params: SimParams | None = None,
                rng: RandomStream | None = None) -> list[Flow]:
    """`max_connections` CBR flows over distinct ordered (source, destination) pairs."""
    params = params or SimParams()
    rng = rng or RandomStream(0)
    k = params.max_connections
    if node_count < 2:
        raise ConfigError("need at least 2 nodes for a flow")
    n_pairs = node_count * (node_count - 1)
    if k > n_pairs:
        raise ConfigError(f"{k} connections requested but only {n_pairs} distinct pairs exist")
    picks = rng.choice(n_pairs, size=k, replace=False)
    flows = []
    for p in sorted(int(x) for x in picks):
        src, r = divmod(p, node_count - 1)
        dst = r if r < src else r + 1
        start = float(rng.uniform(0.0, params.flow_start_max))
        flows.append(Flow(src, dst, params.packet_size, params.sending_rate, start,
                          params.duration))
    return flows


class ContactOracle:
    """Adjacency at routing range, sampled every `interval` seconds."""

    def __init__(self, scenario: Scenario, radio_range: float, interval: float,
                 duration: float | None = None):
        duration = scenario.duration if duration is None else duration
        n = max(int(math.ceil(duration / interval)) + 1, 1)
        self.interval = interval
        self.times = np.arange(n) * interval
        pos = scenario.positions(self.times)
        r2 = radio_range * radio_range
        self.adj = np.empty((n, scenario.node_count, scenario.node_count), dtype=bool)
        for s in range(0, n, 128):
            p = pos[s:s + 128]
            d = p[:, :, None, :] - p[:, None, :, :]
            self.adj[s:s + 128] = (d * d).sum(-1) <= r2
        idx = np.arange(scenario.node_count)
        self.adj[:, idx, idx] = False
        self._last = len(self.times) - 1
        self._nb: dict = {}

    def _k(self, t: float) -> int:
        k = int(t / self.interval + 1e-9)
        return k if k < self._last else self._last

    def linked(self, a: int, b: int, t: float) -> bool:
        return bool(self.adj[self._k(t), a, b])

    def neighbors(self, node: int, t: float) -> list[int]:
        key = (self._k(t), node)
        nb = self._nb.get(key)
        if nb is None:
            nb = np.flatnonzero(self.adj[key[0], node]).tolist()
            self._nb[key] = nb
        return nb


class _Route:
    __slots__ = ("next_hop", "hops", "seq", "expiry", "valid", "precursors")

    def __init__(self, next_hop, hops, seq, expiry):
        self.next_hop = next_hop
        self.hops = hops
        self.seq = seq
        self.expiry = expiry
        self.valid = True
        # upstream neighbours that forwarded data over this route
        self.precursors: set[int] = set()


class _Packet:
    __slots__ = ("pid", "src", "dst", "created", "size", "hops")

    def __init__(self, pid, src, dst, created, size):
        self.pid = pid
        self.src = src
        self.dst = dst
        self.created = created
        self.size = size
        self.hops = 0


class AodvSim:
    """One simulation run. Use `run_simulation` unless you need the internals."""

    def __init__(self, scenario: Scenario, flows, params: SimParams, rng: RandomStream,
                 contacts: ContactOracle | None = None):
        self.n = scenario.node_count
        self.p = params
        self.end = min(params.duration, scenario.duration)
        self.rng = rng
        self.contacts = contacts or ContactOracle(scenario, params.routing_radio_range,
                                                  params.contact_interval, self.end)
        self.flows = list(flows)
        self.ttl_max = params.rreq_ttl_max or self.n
        self.c = SimCounters()
        self.routes = [dict() for _ in range(self.n)]
        self.seqno = [0] * self.n
        self.rreq_id = [0] * self.n
        self.seen = [set() for _ in range(self.n)]
        self.buffers: dict[tuple[int, int], list[_Packet]] = {}
        # (orig, dst) -> (discovery token, attempt index)
        self.pending: dict[tuple[int, int], tuple[int, int]] = {}
        self.hold_until: dict[tuple[int, int], float] = {}
        self.delivered_ids: set[int] = set()
        self.delays: list[float] = []
        self._heap: list = []
        self._seq = 0
        self._pid = 0
        self._token = 0
        self.now = 0.0
        self.data_time = params.hop_time(params.packet_size)
        self.ctrl_time = params.hop_time(params.control_packet_size)

    # -- event queue ---------------------------------------------------------
    def at(self, t, fn, *args):
        self._seq += 1
        heapq.heappush(self._heap, (t, self._seq, fn, args))

    def run(self) -> PerfReport:
        for i, f in enumerate(self.flows):
            if not (0 <= f.source < self.n and 0 <= f.destination < self.n):
                raise UsageError(f"flow {i} references a node outside 0..{self.n - 1}")
            if f.start <= self.end:
                self.at(f.start, self._flow_open, f)
        heap = self._heap
        while heap and heap[0][0] <= self.end:
            t, _, fn, args = heapq.heappop(heap)
            self.now = t
            fn(*args)
        pending = sum(len(b) for b in self.buffers.values())
        pending += sum(1 for _, _, fn, _ in heap if fn == self._data_arrive)
        self.c.drops["sim_end"] = pending
        return compute_perf(self.c, self.p.routing_radio_range)

    # -- route table -----------------------------------------------------------
    def valid_route(self, node: int, dst: int) -> _Route | None:
        r = self.routes[node].get(dst)
        if r is not None and r.valid and r.expiry > self.now:
            return r
        return None

    def _update_route(self, node, dst, next_hop, hops, seq):
        r = self.routes[node].get(dst)
        expiry = self.now + self.p.route_lifetime
        if (r is None or not r.valid or r.expiry <= self.now or seq > r.seq
                or (seq == r.seq and hops < r.hops)):
            self.routes[node][dst] = _Route(next_hop, hops, seq, expiry)
        elif r.next_hop == next_hop and seq == r.seq:
            r.expiry = max(r.expiry, expiry)

    def _refresh(self, node, dst):
        r = self.routes[node].get(dst)
        if r is not None and r.valid:
            r.expiry = max(r.expiry, self.now + self.p.route_lifetime)

    def _break_link(self, node, neighbor):
        """Invalidate every route of `node` via `neighbor` and tell the precursors."""
        lost = [d for d, r in self.routes[node].items() if r.valid and r.next_hop == neighbor]
        self._invalidate(node, lost)

    def _invalidate(self, node, dsts):
        notify: dict[int, list[int]] = {}
        for d in dsts:
            r = self.routes[node][d]
            r.valid = False
            for p in r.precursors:
                notify.setdefault(p, []).append(d)
            r.precursors = set()
        for p in sorted(notify):
            self._unicast_ctrl(node, p, ("RERR", tuple(notify[p])))

    # -- traffic ---------------------------------------------------------------
    def _flow_open(self, f: Flow):
        # opening the connection starts discovery; CBR packets follow at 1/rate
        if self.valid_route(f.source, f.destination) is None:
            self._discover(f.source, f.destination)
        interval = 1.0 / f.rate
        first = f.start + interval
        if first < f.stop:
            self.at(first, self._cbr, f, 1)

    def _cbr(self, f: Flow, k: int):
        self._pid += 1
        pkt = _Packet(self._pid, f.source, f.destination, self.now, f.packet_size)
        self.c.sent += 1
        nxt = f.start + (k + 1) / f.rate
        if nxt < f.stop:
            self.at(nxt, self._cbr, f, k + 1)
        if self.valid_route(f.source, f.destination) is not None:
            self._forward(f.source, pkt)
            return
        key = (f.source, f.destination)
        buf = self.buffers.setdefault(key, [])
        if len(buf) >= self.p.max_buffered_per_flow:
            self.c.drops["buffer_overflow"] += 1
        else:
            buf.append(pkt)
        if key not in self.pending and self.hold_until.get(key, -1.0) <= self.now:
            self._discover(*key)

    def _forward(self, node: int, pkt: _Packet, prev: int | None = None):
        r = self.valid_route(node, pkt.dst)
        if r is None:
            self.c.drops["no_route"] += 1
            if prev is not None:
                self._unicast_ctrl(node, prev, ("RERR", (pkt.dst,)))
            return
        if pkt.hops >= self.ttl_max:
            self.c.drops["ttl_expired"] += 1
            return
        nh = r.next_hop
        if not self.contacts.linked(node, nh, self.now):
            self.c.drops["link_break"] += 1
            if prev is not None:
                r.precursors.add(prev)
            self._break_link(node, nh)
            return
        if prev is not None:
            r.precursors.add(prev)
        r.expiry = max(r.expiry, self.now + self.p.route_lifetime)
        pkt.hops += 1
        self.at(self.now + self.p.hop_time(pkt.size), self._data_arrive, nh, node, pkt)

    def _data_arrive(self, node: int, prev: int, pkt: _Packet):
        self._refresh(node, pkt.src)
        if node == pkt.dst:
            if pkt.pid in self.delivered_ids:
                raise AssertionError(f"packet {pkt.pid} delivered twice")
            self.delivered_ids.add(pkt.pid)
            d = self.now - pkt.created
            self.c.delivered += 1
            self.c.delay_sum += d
            self.delays.append(d)
            return
        self._forward(node, pkt, prev)

    # -- route discovery -----------------------------------------------------------
    def _ttl_schedule(self) -> list[int]:
        ring = list(range(TTL_START, min(TTL_THRESHOLD, self.ttl_max - 1) + 1, TTL_INCREMENT))
        return ring + [self.ttl_max] * (1 + self.p.rreq_retries)

    def _discover(self, orig: int, dst: int):
        self._token += 1
        self.c.discoveries += 1
        self._attempt(orig, dst, self._token, 0)

    def _attempt(self, orig, dst, token, attempt):
        self.pending[(orig, dst)] = (token, attempt)
        ttl = self._ttl_schedule()[attempt]
        self.seqno[orig] += 1
        self.rreq_id[orig] += 1
        rid = self.rreq_id[orig]
        self.seen[orig].add((orig, rid))
        known = self.routes[orig].get(dst)
        dst_seq = known.seq if known is not None else 0
        msg = (orig, rid, self.seqno[orig], dst, dst_seq, ttl, 0)
        self._broadcast(orig, msg)
        if ttl < self.ttl_max:
            wait = 2 * NODE_TRAVERSAL_TIME * (ttl + TIMEOUT_BUFFER)
        else:
            # binary exponential backoff over network-wide retries
            retry = attempt - (len(self._ttl_schedule()) - 1 - self.p.rreq_retries)
            wait = self.p.discovery_timeout * 2 ** retry
        self.at(self.now + wait, self._timeout, orig, dst, token, attempt)

    def _timeout(self, orig, dst, token, attempt):
        if self.pending.get((orig, dst)) != (token, attempt):
            return
        if self.valid_route(orig, dst) is not None:
            self._complete(orig, dst)
            return
        if attempt + 1 < len(self._ttl_schedule()):
            self._attempt(orig, dst, token, attempt + 1)
            return
        del self.pending[(orig, dst)]
        dropped = self.buffers.pop((orig, dst), [])
        self.c.drops["no_route"] += len(dropped)
        self.hold_until[(orig, dst)] = self.now + MAX_RREQ_TIMEOUT
        self.at(self.now + MAX_RREQ_TIMEOUT, self._hold_over, orig, dst)

    def _hold_over(self, orig, dst):
        key = (orig, dst)
        if self.buffers.get(key) and key not in self.pending:
            if self.valid_route(orig, dst) is not None:
                self._complete(orig, dst)
            else:
                self._discover(orig, dst)

    def _complete(self, orig, dst):
        self.pending.pop((orig, dst), None)
        for pkt in self.buffers.pop((orig, dst), []):
            self._forward(orig, pkt)

    def _broadcast(self, node, msg):
        self.c.routing_packets += 1
        self.c.rreq_sent += 1
        receivers = self.contacts.neighbors(node, self.now)
        if receivers:
            self.at(self.now + self.ctrl_time, self._rreq_arrive, receivers, node, msg)

    def _rreq_arrive(self, receivers, sender, msg):
        orig, rid, oseq, dst, dst_seq, ttl, hops = msg
        hops += 1
        jitter = self.p.broadcast_jitter_max
        for r in receivers:
            seen = self.seen[r]
            if (orig, rid) in seen:
                continue
            seen.add((orig, rid))
            self._update_route(r, orig, sender, hops, oseq)
            if r == dst:
                self.seqno[r] = max(self.seqno[r] + 1, dst_seq)
                self._unicast_ctrl(r, sender, ("RREP", orig, dst, self.seqno[r], 0))
                continue
            route = self.valid_route(r, dst)
            if route is not None and route.seq >= dst_seq and route.next_hop != sender:
                self._unicast_ctrl(r, sender, ("RREP", orig, dst, route.seq, route.hops))
                continue
            if ttl > 1:
                fwd = (orig, rid, oseq, dst, dst_seq, ttl - 1, hops)
                self.at(self.now + float(self.rng.uniform(0.0, jitter)), self._broadcast, r, fwd)

    def _unicast_ctrl(self, frm, to, msg):
        if not self.contacts.linked(frm, to, self.now):
            return
        self.c.routing_packets += 1
        if msg[0] == "RREP":
            self.c.rrep_sent += 1
        else:
            self.c.rerr_sent += 1
        self.at(self.now + self.ctrl_time, self._ctrl_arrive, to, frm, msg)

    def _ctrl_arrive(self, node, sender, msg):
        if msg[0] == "RREP":
            _, orig, dst, dseq, hops = msg
            hops += 1
            self._update_route(node, dst, sender, hops, dseq)
            if node == orig:
                if (orig, dst) in self.pending and self.valid_route(orig, dst) is not None:
                    self._complete(orig, dst)
                return
            back = self.valid_route(node, orig)
            if back is not None:
                self._unicast_ctrl(node, back.next_hop, ("RREP", orig, dst, dseq, hops))
        else:
            table = self.routes[node]
            lost = [d for d in msg[1]
                    if d in table and table[d].valid and table[d].next_hop == sender]
            self._invalidate(node, lost)


def run_simulation(scenario: Scenario, flows, params: SimParams | None = None,
                   rng: RandomStream | None = None) -> PerfReport:
    """Simulate `flows` over `scenario` for min(params.duration, scenario.duration) seconds."""
    params = params or SimParams()
    params.check()
    if scenario.node_count < 2:
        raise ConfigError("routing needs at least 2 nodes")
    rng = rng or RandomStream(0)
    return AodvSim(scenario, flows, params, rng).run()
