"""Run the AODV-style simulator over an RWP and an RPGM scenario and show where packets go."""
from dataclasses import replace

from manetlab import (
    RandomStream, SimParams, ScenarioConfig, build_flows, generate,
    run_simulation,
)


def run(model: str, seed: int = 3) -> None:
    params = SimParams(duration=120.0)
    cfg = replace(ScenarioConfig(model=model, seed=seed), duration=params.duration)
    scen_rng, flow_rng, sim_rng = RandomStream(seed).spawn(3)
    scen = generate(cfg, scen_rng)
    flows = build_flows(scen.node_count, params, flow_rng)
    rep = run_simulation(scen, flows, params, sim_rng)
    nrl = "undefined" if rep.nrl is None else f"{rep.nrl:.2f}"
    print(f"{model}: PDR {rep.pdr:.1f} %, delay {rep.avg_delay * 1000:.2f} ms, NRL {nrl}")
    print(f"  sent {rep.sent_data}, delivered {rep.delivered_data}, drops {rep.drops}")
    assert rep.conserved


if __name__ == "__main__":
    for m in ("RWP", "RPGM"):
        run(m)
