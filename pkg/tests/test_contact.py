import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from manetlab.contact import build_timeline, sample_adjacency, sample_times
from manetlab.models import generate
from manetlab.trace import NodeTrace, Scenario, ScenarioConfig, UsageError


def static(points, duration=10.0, radio_range=75.0):
    return Scenario(1000, 1000, duration, radio_range,
                    [NodeTrace(i, [0.0], [p]) for i, p in enumerate(points)])


def brute_edges(points, r):
    out = set()
    for j in range(len(points)):
        for k in range(j + 1, len(points)):
            dx = points[j][0] - points[k][0]
            dy = points[j][1] - points[k][1]
            if dx * dx + dy * dy <= r * r:
                out.add((j, k))
    return out


def test_boundary_is_inclusive():
    assert sample_adjacency(static([(0, 0), (75, 0)]), 0).edges() == {(0, 1)}
    assert sample_adjacency(static([(0, 0), (76, 0)]), 0).edges() == set()


def test_snapshot_symmetric_without_self_loops():
    rng = np.random.default_rng(0)
    snap = sample_adjacency(static(rng.uniform(0, 300, (25, 2))), 0)
    for j, nb in enumerate(snap.neighbors):
        assert j not in nb
        for k in nb:
            assert j in snap.neighbors[k]


@pytest.mark.parametrize("seed", range(5))
def test_snapshot_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    pts = rng.uniform(0, 400, (20, 2)).tolist()
    assert sample_adjacency(static(pts), 0).edges() == brute_edges(pts, 75)


def test_nonpositive_range_is_error():
    with pytest.raises(UsageError):
        sample_adjacency(static([(0, 0)]), 0, radio_range=0)


def test_sample_grid_half_open():
    np.testing.assert_array_equal(sample_times(5, 1), [0, 1, 2, 3, 4])
    np.testing.assert_allclose(sample_times(1, 0.3), [0, 0.3, 0.6, 0.9])


def test_always_up_pair_single_full_interval():
    tl = build_timeline(static([(0, 0), (10, 0)], duration=900), 75, 1.0)
    assert tl.pair_intervals(0, 1) == [(0.0, 900.0)]


def test_never_in_range_pair_has_no_intervals():
    tl = build_timeline(static([(0, 0), (500, 0)]), 75, 1.0)
    assert tl.pair_intervals(0, 1) == []


def test_scripted_pass_by_interval():
    # mover x(t) = 15 + t reaches range (x >= 25) at t = 10, then jumps away after t = 20
    mover = NodeTrace(1, [0, 20, 21, 40], [(15, 30), (35, 30), (300, 30), (300, 30)])
    fixed = NodeTrace(0, [0], [(100, 30)])
    scen = Scenario(1000, 1000, 40.0, 75.0, [fixed, mover])
    tl = build_timeline(scen, 75, 1.0)
    # oracle: evaluate the link sample by sample
    states = [abs(mover.positions([t])[0][0] - 100) <= 75 for t in range(40)]
    first = states.index(True)
    last = len(states) - 1 - states[::-1].index(True)
    assert (first, last) == (10, 20)
    assert tl.pair_intervals(0, 1) == [(10.0, 21.0)]


def test_pair_order_irrelevant():
    tl = build_timeline(static([(0, 0), (10, 0)]), 75, 1.0)
    assert tl.pair_intervals(1, 0) == tl.pair_intervals(0, 1)


def test_final_interval_clipped_at_duration():
    # duration not a multiple of the interval: last sample at 9, closes at 9.5
    tl = build_timeline(static([(0, 0), (10, 0)], duration=9.5), 75, 1.0)
    assert tl.pair_intervals(0, 1) == [(0.0, 9.5)]


def small_random(seed, model="RWP"):
    return generate(ScenarioConfig(model=model, node_count=15, area_width=300,
                                   area_height=300, duration=120, seed=seed))


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(["RWP", "GM", "RPGM", "NCMM"]))
def test_timeline_interval_invariants(seed, model):
    scen = small_random(seed, model)
    tl = build_timeline(scen, 75, 1.0)
    for ivs in tl.intervals.values():
        total = 0.0
        prev_end = -1.0
        for s, e in ivs:
            assert 0 <= s < e <= scen.duration
            assert s > prev_end  # disjoint and separated by a down sample
            assert e - s >= min(1.0, scen.duration - s) - 1e-9
            total += e - s
            prev_end = e
        assert total <= scen.duration + 1e-9


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10_000))
def test_timeline_agrees_with_snapshots(seed):
    scen = small_random(seed)
    tl = build_timeline(scen, 75, 1.0)
    for k in range(0, len(tl.times), 7):
        t = float(tl.times[k])
        snap = sample_adjacency(scen, t, 75)
        implied = {(j, m) for (j, m) in tl.intervals if tl.linked(j, m, t)}
        assert implied == snap.edges()
        assert tl.snapshot(k).edges() == snap.edges()


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10_000), st.randoms(use_true_random=False))
def test_timeline_relabel_invariant(seed, rnd):
    scen = small_random(seed)
    perm = list(range(scen.node_count))
    rnd.shuffle(perm)
    a = build_timeline(scen, 75, 1.0).intervals
    b = build_timeline(scen.relabeled(perm), 75, 1.0).intervals
    mapped = {tuple(sorted((perm[j], perm[k]))): v for (j, k), v in a.items()}
    assert mapped == b
