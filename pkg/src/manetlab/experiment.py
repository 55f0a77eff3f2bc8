"""Multi-seed sweeps over models and max speed, with class separation and
rank-correlation reports."""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.stats import rankdata

from .metrics import MetricReport, compute_all
from .models import generate
from .routesim import PerfReport, SimParams, build_flows, run_simulation
from .trace import (
    ENTITY_MODELS, GROUP_MODELS, MODELS, ConfigError, ManetLabError, RandomStream,
    ScenarioConfig, UsageError, validate,
)

log = logging.getLogger(__name__)

MOBILITY_METRICS = ("ND", "NP", "LC", "LD", "RS")
PERF_METRICS = ("PDR", "delay", "NRL")
OUTPUTS = ("metrics", "performance", "both")


@dataclass(frozen=True)
class ExperimentPlan:
    models: tuple[str, ...] = MODELS
    speed_points: tuple[float, ...] = (5.0, 10.0, 15.0, 20.0)
    seeds: int = 25
    base_config: ScenarioConfig = field(default_factory=ScenarioConfig)
    sim_params: SimParams = field(default_factory=SimParams)
    outputs: str = "metrics"
    sample_interval: float = 1.0
    parallelism: int = 1

    def check(self) -> None:
        if self.seeds < 1:
            raise ConfigError("seeds must be >= 1")
        if not self.speed_points or any(s <= 0 for s in self.speed_points):
            raise ConfigError("speed_points must be nonempty and positive")
        if not self.models:
            raise ConfigError("models must be nonempty")
        for m in self.models:
            if m not in MODELS:
                raise ConfigError(f"unknown model {m!r}")
        if self.outputs not in OUTPUTS:
            raise ConfigError(f"outputs must be one of {OUTPUTS}")
        if self.parallelism < 1:
            raise ConfigError("parallelism must be >= 1")
        if self.wants_perf:
            self.sim_params.check()

    @property
    def wants_metrics(self) -> bool:
        return self.outputs in ("metrics", "both")

    @property
    def wants_perf(self) -> bool:
        return self.outputs in ("performance", "both")


def derive_seed(base_seed: int, model_index: int, speed_index: int, replicate: int) -> int:
    """64-bit scenario seed for one (model, speed, replicate) triple."""
    ss = np.random.SeedSequence([int(base_seed) & (2**64 - 1), model_index, speed_index, replicate])
    lo, hi = ss.generate_state(2, dtype=np.uint32)
    return int(hi) << 32 | int(lo)


@dataclass(frozen=True)
class RunResult:
    model: str
    speed: float
    replicate: int
    seed: int
    metrics: MetricReport | None
    perf: PerfReport | None


def simulate_config(config: ScenarioConfig, params: SimParams, seed: int) -> PerfReport:
    """Routing run on a fresh scenario of `params.duration` seconds.

    The seed is split into independent streams for the scenario, the flow
    endpoints and the simulator's own draws.
    """
    pcfg = replace(config, duration=params.duration)
    scen_rng, flows_rng, sim_rng = RandomStream(seed).spawn(3)
    scen = generate(pcfg, scen_rng)
    bad = validate(scen, pcfg)
    if bad:
        raise ConfigError(f"generated scenario invalid: {bad[0]}")
    flows = build_flows(pcfg.node_count, params, flows_rng)
    return run_simulation(scen, flows, params, sim_rng)


def run_one(model: str, speed: float, replicate: int, seed: int, plan: ExperimentPlan) -> RunResult:
    cfg = replace(plan.base_config, model=model, max_speed=float(speed), seed=seed,
                  min_speed=min(plan.base_config.min_speed, float(speed)))
    metrics = perf = None
    where = f"(model={model}, speed={speed:g}, replicate={replicate})"
    try:
        if plan.wants_metrics:
            scen = generate(cfg)
            metrics = compute_all(scen, cfg.radio_range, plan.sample_interval)
        if plan.wants_perf:
            perf = simulate_config(cfg, plan.sim_params, seed)
    except ManetLabError as exc:
        raise type(exc)(f"{exc} {where}") from exc
    return RunResult(model, float(speed), replicate, seed, metrics, perf)


def _run_args(args):
    return run_one(*args)


def run_fields(run: RunResult) -> dict[str, float]:
    """Flat numeric view of one run: mobility and performance fields."""
    out: dict[str, float] = {}
    if run.metrics is not None:
        m = run.metrics
        out.update(ND=m.ND, NP=m.NP, LC=m.LC, LC_per_pair=m.link_changes_per_pair, LD=m.LD,
                   RS=m.RS)
    if run.perf is not None:
        p = run.perf
        out.update(PDR=p.pdr, delay=p.avg_delay, NRL=p.nrl if p.nrl is not None else math.nan,
                   sent=p.sent_data, delivered=p.delivered_data, routing_packets=p.routing_packets)
    return out


@dataclass(frozen=True)
class AggregateRow:
    model: str
    speed: float
    n: int
    mean: dict
    std: dict
    minimum: dict
    maximum: dict

    def __getitem__(self, name: str) -> float:
        return self.mean[name]


def aggregate(runs) -> list[AggregateRow]:
    """Mean, sample std, min and max per (model, speed); order of runs does not matter.

    NaN entries (undefined NRL) are left out of that field's statistics.
    """
    groups: dict[tuple[str, float], list[RunResult]] = {}
    for r in runs:
        groups.setdefault((r.model, r.speed), []).append(r)
    rows = []
    for (model, speed), rs in groups.items():
        rs = sorted(rs, key=lambda r: r.replicate)
        data = [run_fields(r) for r in rs]
        names = list(data[0])
        mean, std, lo, hi = {}, {}, {}, {}
        for name in names:
            v = np.array([d[name] for d in data], dtype=float)
            v = v[~np.isnan(v)]
            if len(v) == 0:
                mean[name] = std[name] = lo[name] = hi[name] = math.nan
                continue
            mean[name] = float(math.fsum(v) / len(v))
            std[name] = float(np.std(v, ddof=1)) if len(v) > 1 else 0.0
            lo[name], hi[name] = float(v.min()), float(v.max())
        rows.append(AggregateRow(model, speed, len(rs), mean, std, lo, hi))
    order = {m: i for i, m in enumerate(MODELS)}
    rows.sort(key=lambda r: (order.get(r.model, 99), r.speed))
    return rows


@dataclass(frozen=True)
class ExperimentResult:
    plan: ExperimentPlan
    rows: list[AggregateRow]
    runs: list[RunResult]


def plan_triples(plan: ExperimentPlan):
    base = plan.base_config.seed
    for mi, model in enumerate(plan.models):
        for si, speed in enumerate(plan.speed_points):
            for rep in range(plan.seeds):
                yield model, float(speed), rep, derive_seed(base, MODELS.index(model), si, rep)


def run_plan(plan: ExperimentPlan) -> ExperimentResult:
    plan.check()
    triples = list(plan_triples(plan))
    seeds = [t[3] for t in triples]
    if len(set(seeds)) != len(seeds):
        raise ManetLabError("seed derivation collided within the plan")
    args = [(*t, plan) for t in triples]
    log.info("running %d scenarios", len(args))
    if plan.parallelism > 1:
        with ProcessPoolExecutor(max_workers=plan.parallelism) as pool:
            runs = list(pool.map(_run_args, args))
    else:
        runs = [_run_args(a) for a in args]
    return ExperimentResult(plan, aggregate(runs), runs)


@dataclass(frozen=True)
class SeparationEntry:
    metric: str
    speed: float
    entity_min: float
    entity_max: float
    group_min: float
    group_max: float
    separated: bool
    margin: float
    group_higher: bool

    @property
    def normalized_margin(self) -> float:
        """Margin divided by the spread of all four values (scale free)."""
        span = max(self.entity_max, self.group_max) - min(self.entity_min, self.group_min)
        return self.margin / span if span > 0 else 0.0


def _rows_at(rows, speed):
    if speed is None:
        speeds = sorted({r.speed for r in rows})
        if not speeds:
            raise UsageError("no aggregate rows")
        speed = speeds[-1]
    return speed, {r.model: r for r in rows if r.speed == speed}


def separation(rows, metric: str, speed: float | None = None) -> SeparationEntry:
    """Compare the class intervals of entity vs group model means at one speed.

    The verdict is True iff the closed intervals are disjoint; `margin` is
    the gap between them (negative when they overlap).
    """
    speed, at = _rows_at(rows, speed)
    missing = [m for m in MODELS if m not in at]
    if missing:
        raise UsageError(f"separation needs all four models at speed {speed:g}; missing {missing}")
    ent = [at[m].mean[metric] for m in ENTITY_MODELS]
    grp = [at[m].mean[metric] for m in GROUP_MODELS]
    e_lo, e_hi, g_lo, g_hi = min(ent), max(ent), min(grp), max(grp)
    up_gap = g_lo - e_hi
    down_gap = e_lo - g_hi
    margin = max(up_gap, down_gap)
    return SeparationEntry(metric, speed, e_lo, e_hi, g_lo, g_hi, margin > 0, margin,
                           up_gap >= down_gap)


def separation_report(rows, speed: float | None = None, metrics=MOBILITY_METRICS):
    return [separation(rows, m, speed) for m in metrics]


@dataclass(frozen=True)
class CorrelationEntry:
    mobility_metric: str
    perf_metric: str
    rho: float
    sign: int
    ties: bool
    n: int


def spearman(x, y) -> tuple[float, bool]:
    """Spearman rho with average ranks; degenerate (constant) input gives (0, True)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    rx, ry = rankdata(x), rankdata(y)
    tied = len(np.unique(x)) < len(x) or len(np.unique(y)) < len(y)
    if np.all(rx == rx[0]) or np.all(ry == ry[0]):
        return 0.0, True
    rx = rx - rx.mean()
    ry = ry - ry.mean()
    rho = float((rx @ ry) / math.sqrt((rx @ rx) * (ry @ ry)))
    return max(-1.0, min(1.0, rho)), tied


def correlate(rows, mobility_metric: str, perf_metric: str, speed: float | None = None,
              models=None) -> CorrelationEntry:
    """Spearman correlation across aggregate means.

    With `speed` given, only rows at that speed are used; `models` limits the
    rows to a model subset.
    """
    sel = [r for r in rows
           if (speed is None or r.speed == speed) and (models is None or r.model in models)]
    pts = [(r.mean.get(mobility_metric, math.nan), r.mean.get(perf_metric, math.nan)) for r in sel]
    pts = [p for p in pts if not (math.isnan(p[0]) or math.isnan(p[1]))]
    if len(pts) < 3:
        raise UsageError(f"correlation needs >= 3 aggregate points, got {len(pts)}")
    rho, ties = spearman([p[0] for p in pts], [p[1] for p in pts])
    sign = 0 if rho == 0 else (1 if rho > 0 else -1)
    return CorrelationEntry(mobility_metric, perf_metric, rho, sign, ties, len(pts))


def correlation_report(rows, speed: float | None = None):
    out = []
    for mm in MOBILITY_METRICS:
        for pm in PERF_METRICS:
            try:
                out.append(correlate(rows, mm, pm, speed))
            except UsageError:
                continue
    return out
