"""End-to-end acceptance checks; each test records one pass/fail line."""
import math
import time
from dataclasses import replace

import numpy as np
import pytest

from manetlab.cli import main
from manetlab.contact import sample_adjacency
from manetlab.experiment import (
    MOBILITY_METRICS, AggregateRow, ExperimentPlan, correlate, run_plan, separation_report,
)
from manetlab.formats import (
    export_bonnmotion, export_ns2_movements, import_bonnmotion, import_ns2_movements,
)
from manetlab.metrics import network_partitions
from manetlab.models import GmState, generate, gm_advance, gm_update
from manetlab.routesim import AodvSim, Flow, SimParams
from manetlab.trace import MODELS, NodeTrace, RandomStream, Scenario, ScenarioConfig

from oracles import FIG1_NAMES, brute_adjacency, fig1_scenario, flood_fill_components

SPEED = 20.0
SEEDS = 25


@pytest.fixture(scope="session")
def metric_plan():
    plan = ExperimentPlan(models=MODELS, speed_points=(SPEED,), seeds=SEEDS, outputs="metrics")
    t0 = time.perf_counter()
    res = run_plan(plan)
    return res, time.perf_counter() - t0


@pytest.fixture(scope="session")
def routing_plan():
    plan = ExperimentPlan(models=MODELS, speed_points=(SPEED,), seeds=SEEDS,
                          outputs="performance")
    t0 = time.perf_counter()
    res = run_plan(plan)
    return res, time.perf_counter() - t0


def _row(res, model):
    return next(r for r in res.rows if r.model == model)


def _fmt(res, metric):
    return ", ".join(f"{m}={_row(res, m).mean[metric]:.4g}" for m in MODELS)


def test_c01_contact_and_partition_oracles(criterion):
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    mismatches = 0
    for _ in range(100):
        n = int(rng.integers(15, 21))
        pts = rng.uniform(0, 1000, (n, 2)).tolist()
        scen = Scenario(1000, 1000, 1.0, 75.0, [NodeTrace(i, [0.0], [p]) for i, p in enumerate(pts)])
        snap = sample_adjacency(scen, 0.0, 75.0)
        adj = brute_adjacency(pts, 75.0)
        if [set(nb) for nb in snap.neighbors] != adj:
            mismatches += 1
        if network_partitions([snap]) != flood_fill_components(adj):
            mismatches += 1
    elapsed = time.perf_counter() - t0
    criterion(1, mismatches == 0 and elapsed < 5.0,
              f"100 snapshots, {mismatches} mismatches, {elapsed:.2f} s (limit 5 s)")


def test_c02_illustration_fixture(criterion):
    scen = fig1_scenario()
    snap = sample_adjacency(scen, 0.0, 75.0)
    deg_h = snap.degree(FIG1_NAMES.index("h"))
    np_ = network_partitions([snap])
    criterion(2, deg_h == 3 and np_ == 4, f"degree(h)={deg_h} (want 3), NP={np_:g} (want 4)")


def test_c03_gauss_markov_algebra(criterion):
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(1000):
        a = rng.uniform(0, 1)
        v, vbar = rng.uniform(0, 40, 2)
        d, dbar = rng.uniform(-10, 10, 2)
        gv, gd = rng.normal(0, 5, 2)
        out = gm_update(GmState(v, d, vbar, dbar, a), gv, gd)
        root = math.sqrt(1 - a * a)
        want_v = max(0.0, a * v + (1 - a) * vbar + root * gv)
        want_d = a * d + (1 - a) * dbar + root * gd
        x, y = rng.uniform(0, 1000, 2)
        dt = rng.uniform(0.1, 5)
        px, py = gm_advance((x, y), out, dt)
        want_x = x + out.speed * dt * math.cos(out.direction)
        want_y = y + out.speed * dt * math.sin(out.direction)
        for got, want in ((out.speed, want_v), (out.direction, want_d), (px, want_x), (py, want_y)):
            worst = max(worst, abs(got - want) / max(abs(want), 1e-300) if want else abs(got))
    s = GmState(7.5, 1.25, 10.0, 0.5, 1.0)
    one = gm_update(s, 3.0, -2.0)
    zero = gm_update(replace(s, alpha=0.0), 0.0, 0.0)
    limits = (one.speed, one.direction) == (7.5, 1.25) and (zero.speed, zero.direction) == (10.0, 0.5)
    criterion(3, worst <= 1e-12 and limits,
              f"1000 inputs, worst relative error {worst:.2e} (limit 1e-12), limits exact={limits}")


@pytest.mark.slow
def test_c04_link_duration_separation(criterion, metric_plan):
    res, elapsed = metric_plan
    ld = {m: _row(res, m).mean["LD"] for m in MODELS}
    ok = min(ld["RPGM"], ld["NCMM"]) > max(ld["RWP"], ld["GM"]) and elapsed < 180
    criterion(4, ok, f"mean LD {_fmt(res, 'LD')} s; 100 runs in {elapsed:.0f} s (limit 180 s)")


@pytest.mark.slow
def test_c05_node_degree_separation(criterion, metric_plan):
    res, _ = metric_plan
    nd = {m: _row(res, m).mean["ND"] for m in MODELS}
    criterion(5, min(nd["RPGM"], nd["NCMM"]) > max(nd["RWP"], nd["GM"]),
              f"mean ND {_fmt(res, 'ND')}")


@pytest.mark.slow
def test_c06_partitions_rpgm_below_rwp(criterion, metric_plan):
    res, _ = metric_plan
    criterion(6, _row(res, "RPGM").mean["NP"] < _row(res, "RWP").mean["NP"],
              f"mean NP {_fmt(res, 'NP')}")


@pytest.mark.slow
def test_c07_rpgm_lowest_relative_speed(criterion, metric_plan):
    res, _ = metric_plan
    rs = {m: _row(res, m).mean["RS"] for m in MODELS}
    criterion(7, min(rs, key=rs.get) == "RPGM", f"mean RS {_fmt(res, 'RS')} m/s")


@pytest.mark.slow
def test_c08_link_changes_do_not_separate(criterion, metric_plan):
    res, _ = metric_plan
    report = {e.metric: e for e in separation_report(res.rows, SPEED, MOBILITY_METRICS)}
    lc = report["LC"]
    smallest = min(report.values(), key=lambda e: e.normalized_margin).metric
    ok = len(report) == 5 and (lc.margin < 0 or smallest == "LC")
    margins = ", ".join(f"{m}={e.normalized_margin:+.2f}" for m, e in report.items())
    criterion(8, ok, f"LC separated={lc.separated}, margin={lc.margin:.4g}; "
                     f"normalized margins {margins}")


@pytest.mark.slow
def test_c09_link_duration_vs_routing_load(criterion, metric_plan, routing_plan):
    mres, _ = metric_plan
    pres, elapsed = routing_plan
    rows = []
    for m in MODELS:
        a, b = _row(mres, m), _row(pres, m)
        rows.append(AggregateRow(m, SPEED, a.n, {**a.mean, **b.mean}, {**a.std, **b.std},
                                 {**a.minimum, **b.minimum}, {**a.maximum, **b.maximum}))
    c = correlate(rows, "LD", "NRL", SPEED)
    criterion(9, c.rho < 0 and elapsed < 600,
              f"Spearman(LD, NRL)={c.rho:+.2f} (want < 0); mean NRL {_fmt(pres, 'NRL')}; "
              f"100 routing runs in {elapsed:.0f} s (limit 600 s)")


def test_c10_routing_closed_forms(criterion):
    params = SimParams(duration=20.0)
    hop = 512 * 8 / params.data_rate + params.per_hop_processing

    def run(points, flow):
        scen = Scenario(1000, 1000, 20.0, 250.0,
                        [NodeTrace(i, [0.0], [p]) for i, p in enumerate(points)])
        sim = AodvSim(scen, [flow], params, RandomStream(1))
        return sim, sim.run()

    s2, two = run([(0, 0), (100, 0)], Flow(0, 1, stop=20))
    s3, three = run([(0, 0), (200, 0), (400, 0)], Flow(0, 2, rate=2, stop=20))
    _, cut = run([(0, 0), (600, 0)], Flow(0, 1, stop=20))
    err2 = max(abs(d - hop) for d in s2.delays)
    err3 = max(abs(d - 2 * hop) for d in s3.delays)
    ok = (two.pdr == 100 and three.pdr == 100 and err2 <= 1e-9 and err3 <= 1e-9
          and cut.pdr == 0)
    criterion(10, ok, f"1 hop delay={two.avg_delay:.9f} s (want {hop:.9f}), "
                      f"2 hops={three.avg_delay:.9f} s, PDR 1-hop/2-hop/partitioned="
                      f"{two.pdr:g}/{three.pdr:g}/{cut.pdr:g}")


def test_c11_determinism_and_round_trips(criterion, tmp_path):
    cfg = tmp_path / "plan.cfg"
    cfg.write_text("[scenario]\nnumber_of_nodes = 20\nsimulation_time = 120\n"
                   "[routing]\nsimulation_time = 30\nmaximum_connections = 5\n"
                   "[experiment]\nspeed_points = 10, 20\nseeds = 2\noutputs = both\n")
    a, b = tmp_path / "a", tmp_path / "b"
    codes = (main(["experiment", "--config", str(cfg), "--out", str(a)]),
             main(["experiment", "--config", str(cfg), "--out", str(b)]))
    names = ("aggregate.csv", "separation.csv", "correlation.csv")
    identical = codes == (0, 0) and all((a / n).read_bytes() == (b / n).read_bytes()
                                        for n in names)
    ns2_err, bm_ok = 0.0, True
    grid = np.arange(0.0, 901.0)
    for model in MODELS:
        scen = generate(ScenarioConfig(model=model, seed=11))
        back = import_ns2_movements(export_ns2_movements(scen), scen.duration)
        ns2_err = max(ns2_err, float(np.abs(back.positions(grid) - scen.positions(grid)).max()))
        text = export_bonnmotion(scen)
        bm = import_bonnmotion(text, scen.duration)
        bm_ok &= export_bonnmotion(bm) == text and all(
            np.array_equal(x.times, y.times.round(6)) and np.array_equal(x.xy, y.xy.round(6))
            for x, y in zip(bm.traces, scen.traces))
    ok = identical and ns2_err <= 1e-4 and bm_ok
    criterion(11, ok, f"experiment CSVs byte-identical={identical}; ns-2 max position error "
                      f"{ns2_err:.1e} m (limit 1e-4); BonnMotion identity={bm_ok}")


@pytest.mark.slow
def test_c12_packet_conservation(criterion, routing_plan):
    res, _ = routing_plan
    bad = [r for r in res.runs
           if r.perf.sent_data != r.perf.delivered_data + sum(r.perf.drops.values())]
    criterion(12, len(res.runs) == 100 and not bad,
              f"{len(res.runs)} routing runs, {len(bad)} violate sent = delivered + drops")
