import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from manetlab.models import (
    GmState, anchor_trace, generate, generate_gm, generate_ncmm, generate_rpgm, generate_rwp,
    gm_advance, gm_update, group_members,
)
from manetlab.trace import (
    MODELS, ConfigError, RandomStream, ScenarioConfig, position_at, segment_speeds, validate,
)


# -- Gauss-Markov algebra --------------------------------------------------------------

def test_gm_update_alpha_one_keeps_state():
    s = GmState(7.0, 1.2, 10.0, 0.3, 1.0)
    out = gm_update(s, 3.0, -2.0)
    assert out.speed == 7.0 and out.direction == 1.2


def test_gm_update_alpha_zero_returns_means():
    s = GmState(7.0, 1.2, 10.0, 0.3, 0.0)
    out = gm_update(s, 0.0, 0.0)
    assert out.speed == 10.0 and out.direction == 0.3


def test_gm_update_hand_value():
    out = gm_update(GmState(10.0, 0.0, 8.0, 0.0, 0.5), 2.0, 0.0)
    assert out.speed == pytest.approx(0.5 * 10 + 0.5 * 8 + math.sqrt(0.75) * 2, rel=1e-12)
    assert out.speed == pytest.approx(10.732, abs=5e-4)


def test_gm_update_clamps_speed():
    assert gm_update(GmState(1.0, 0, 1.0, 0, 0.5), -100.0, 0.0).speed == 0.0
    assert gm_update(GmState(1.0, 0, 1.0, 0, 0.5), 100.0, 0.0, max_speed=20).speed == 20.0


@pytest.mark.parametrize("alpha", [-0.1, 1.5])
def test_gm_update_rejects_alpha(alpha):
    with pytest.raises(ConfigError):
        gm_update(GmState(1.0, 0.0, 1.0, 0.0, alpha), 0.0, 0.0)


def test_gm_advance_examples():
    assert gm_advance((0.0, 0.0), GmState(10.0, 0.0, 0, 0, 0.5), 1.0) == (10.0, 0.0)
    assert gm_advance((4.0, 2.0), GmState(0.0, 1.0, 0, 0, 0.5), 1.0) == (4.0, 2.0)
    x, y = gm_advance((3.0, 3.0), GmState(5.0, math.pi / 2, 0, 0, 0.5), 2.0)
    assert x == pytest.approx(3.0, abs=1e-12) and y == pytest.approx(13.0, rel=1e-12)


finite = st.floats(-1e3, 1e3, allow_nan=False)


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 1), st.floats(0, 50), finite, st.floats(0, 50), finite, finite, finite)
def test_gm_update_matches_formula(a, v, d, vbar, dbar, gv, gd):
    out = gm_update(GmState(v, d, vbar, dbar, a), gv, gd)
    r = math.sqrt(1 - a * a)
    assert out.speed == pytest.approx(max(0.0, a * v + (1 - a) * vbar + r * gv), rel=1e-12, abs=1e-9)
    assert out.direction == pytest.approx(a * d + (1 - a) * dbar + r * gd, rel=1e-12, abs=1e-9)


# -- generators --------------------------------------------------------------------------

@pytest.mark.parametrize("model", MODELS)
def test_default_generators_produce_valid_scenarios(model):
    cfg = ScenarioConfig(model=model, seed=3)
    scen = generate(cfg)
    assert scen.node_count == 90
    assert validate(scen, cfg) == []
    for tr in scen.traces:
        assert tr.times[-1] >= cfg.duration - 1e-9


@pytest.mark.parametrize("model", MODELS)
def test_generators_are_deterministic(model):
    cfg = ScenarioConfig(model=model, node_count=12, duration=100, seed=11)
    assert generate(cfg).traces == generate(cfg).traces
    other = generate(replace(cfg, seed=12))
    assert other.traces != generate(cfg).traces


def test_rwp_single_node_speeds_in_range():
    cfg = ScenarioConfig(node_count=1, max_pause=0, duration=5000, seed=1)
    tr = generate_rwp(cfg).traces[0]
    sp = segment_speeds(tr)
    assert len(sp) > 10
    assert np.all(sp >= 0.5 - 1e-9) and np.all(sp <= 20 + 1e-9)
    # no pauses: consecutive waypoints always differ
    assert np.all(np.hypot(*np.diff(tr.xy, axis=0).T) > 0)


def test_rwp_fixed_speed():
    cfg = ScenarioConfig(node_count=3, min_speed=7, max_speed=7, max_pause=0, duration=500)
    for tr in generate_rwp(cfg).traces:
        np.testing.assert_allclose(segment_speeds(tr), 7.0, rtol=1e-9)


def test_rwp_zero_area_rejected():
    with pytest.raises(ConfigError):
        generate_rwp(ScenarioConfig(area_width=0))


def test_generator_rejects_wrong_model():
    with pytest.raises(ConfigError):
        generate_gm(ScenarioConfig(model="RWP"))


def test_gm_defaults():
    cfg = ScenarioConfig(model="GM", node_count=20, seed=5)
    scen = generate_gm(cfg)
    assert cfg.mean_speed == 10.0
    assert validate(scen, cfg) == []
    # one waypoint per update interval
    assert len(scen.traces[0]) == int(cfg.duration / cfg.gm_update_interval) + 1


def test_gm_alpha_one_moves_straight_in_interior():
    cfg = ScenarioConfig(model="GM", node_count=1, gm_alpha=1.0, duration=10, seed=2)
    tr = generate_gm(cfg).traces[0]
    d = np.diff(tr.xy, axis=0)
    margin = 2 * cfg.max_speed
    x, y = tr.xy[:, 0], tr.xy[:, 1]
    if np.all((x > margin) & (x < 1000 - margin) & (y > margin) & (y < 1000 - margin)):
        # constant velocity: every step identical
        np.testing.assert_allclose(d, np.broadcast_to(d[0], d.shape), atol=1e-9)


def test_group_partition():
    groups = group_members(90, 5)
    assert len(groups) == 18
    assert sorted(n for g in groups for n in g) == list(range(90))


@pytest.mark.parametrize("model", ["RPGM", "NCMM"])
def test_group_count_and_labels(model):
    scen = generate(ScenarioConfig(model=model, seed=4))
    assert len(set(scen.groups)) == 18
    assert all(scen.groups.count(g) == 5 for g in set(scen.groups))


@pytest.mark.parametrize("model", ["RPGM", "NCMM"])
def test_group_size_above_node_count_is_error(model):
    with pytest.raises(ConfigError):
        generate(ScenarioConfig(model=model, node_count=4, group_size=5))


def test_rpgm_zero_deviation_members_equal_leader():
    cfg = ScenarioConfig(model="RPGM", rpgm_max_deviation=0, node_count=20, duration=200, seed=9)
    scen = generate_rpgm(cfg)
    for members in group_members(20, 5):
        lead = scen.traces[members[0]]
        for m in members[1:]:
            tr = scen.traces[m]
            assert np.array_equal(tr.times, lead.times) and np.array_equal(tr.xy, lead.xy)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_rpgm_members_within_deviation_of_leader(seed):
    cfg = ScenarioConfig(model="RPGM", seed=seed)
    scen = generate_rpgm(cfg)
    for members in group_members(cfg.node_count, cfg.group_size):
        lead = scen.traces[members[0]]
        for m in members[1:]:
            tr = scen.traces[m]
            lp = lead.positions(tr.times)
            dist = np.hypot(*(tr.xy - lp).T)
            assert dist.max() <= cfg.rpgm_max_deviation + 1e-9


def test_ncmm_zero_radius_members_coincide_with_anchor():
    cfg = ScenarioConfig(model="NCMM", ncmm_roam_radius=0, node_count=10, duration=300, seed=6)
    scen = generate_ncmm(cfg)
    for g, members in enumerate(group_members(10, 5)):
        anc = anchor_trace(cfg, g)
        for m in members:
            np.testing.assert_array_equal(scen.traces[m].positions(anc.times), anc.xy)


@pytest.mark.parametrize("seed", [0, 1])
def test_ncmm_members_within_radius_of_anchor(seed):
    cfg = ScenarioConfig(model="NCMM", seed=seed)
    scen = generate_ncmm(cfg)
    grid = np.arange(0, cfg.duration + 1, 1.0)
    for g, members in enumerate(group_members(cfg.node_count, cfg.group_size)):
        ap = anchor_trace(cfg, g).positions(grid)
        for m in members:
            d = np.hypot(*(scen.traces[m].positions(grid) - ap).T)
            assert d.max() <= cfg.ncmm_roam_radius + 1e-6


def test_explicit_stream_overrides_config_seed():
    cfg = ScenarioConfig(node_count=5, duration=50, seed=1)
    a = generate(cfg, RandomStream(99))
    b = generate(replace(cfg, seed=99))
    assert a.traces == b.traces
