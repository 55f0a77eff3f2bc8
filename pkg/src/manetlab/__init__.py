"""Mobility scenarios, mobility metrics and AODV-style routing simulation for MANETs."""
from .config import RunConfig, dump_config, load_config, parse_config
from .contact import (
    AdjacencySnapshot, ContactTimeline, build_timeline, sample_adjacency, snapshot_from_positions,
)
from .experiment import (
    AggregateRow, CorrelationEntry, ExperimentPlan, ExperimentResult, RunResult, SeparationEntry,
    aggregate, correlate, correlation_report, derive_seed, run_one, run_plan, separation,
    separation_report, simulate_config, spearman,
)
from .formats import (
    emit_csv, export_bonnmotion, export_ns2_movements, import_bonnmotion, import_ns2_movements,
)
from .metrics import (
    LinkChanges, MetricReport, ScenarioError, compute_all, link_changes, link_duration,
    network_partitions, node_degree, relative_speed,
)
from .models import (
    GmState, generate, generate_gm, generate_ncmm, generate_rpgm, generate_rwp, gm_advance,
    gm_update,
)
from .routesim import Flow, PerfReport, SimParams, build_flows, run_simulation
from .trace import (
    ENTITY_MODELS, GROUP_MODELS, MODELS, ConfigError, ManetLabError, NodeTrace, ParseError,
    RandomStream, Scenario, ScenarioConfig, UsageError, Vec2, Violation, Waypoint, position_at,
    validate, velocity_at,
)

__version__ = "0.1.0"
