"""A reduced factorial experiment: aggregate rows, class separation and rank correlations."""
from manetlab import (
    ExperimentPlan, ScenarioConfig, SimParams, correlation_report, run_plan, separation_report,
)


def main() -> None:
    plan = ExperimentPlan(
        speed_points=(10.0, 20.0),
        seeds=3,
        outputs="both",
        base_config=ScenarioConfig(node_count=40, area_width=600, area_height=600, duration=200),
        sim_params=SimParams(duration=60.0, max_connections=8),
    )
    res = run_plan(plan)
    for row in res.rows:
        print(f"{row.model:5} v={row.speed:4.0f}  LD={row.mean['LD']:6.2f}  "
              f"PDR={row.mean['PDR']:6.2f}  NRL={row.mean['NRL']:.2f}")
    print("\nseparation at 20 m/s (group vs entity):")
    for e in separation_report(res.rows, 20.0):
        print(f"  {e.metric}: separated={e.separated} margin={e.normalized_margin:+.2f}")
    print("\nrank correlations at 20 m/s:")
    for c in correlation_report(res.rows, 20.0):
        print(f"  {c.mobility_metric:>2} vs {c.perf_metric:<9} rho={c.rho:+.2f}")


if __name__ == "__main__":
    main()
