"""Line-oriented `key = value` configuration files.

Three sections map onto the three parameter records::

    [scenario]      -> ScenarioConfig
    [routing]       -> SimParams
    [experiment]    -> ExperimentPlan (models, speeds, seeds, ...)

Keys that correspond to a row of the published parameter tables use that
row's name (`number_of_nodes`, `max_pause_time`, `transmission_range_routing`);
all other keys are the field names themselves. Keys are case-sensitive and
an unknown key is an error naming the line.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace

from .experiment import ExperimentPlan
from .routesim import SimParams
from .trace import MODELS, ConfigError, ParseError, ScenarioConfig

_TABLE_KEYS = {
    "scenario": {
        "number_of_nodes": "node_count",
        "area_length_x": "area_width",
        "area_width_y": "area_height",
        "max_pause_time": "max_pause",
        "simulation_time": "duration",
        "radio_range_metrics": "radio_range",
    },
    "routing": {
        "transmission_range_routing": "routing_radio_range",
        "maximum_connections": "max_connections",
        "simulation_time": "duration",
    },
    "experiment": {},
}

_EXPERIMENT_FIELDS = ("models", "speed_points", "seeds", "outputs", "sample_interval",
                      "parallelism")


def _key_map(section: str, record) -> dict[str, str]:
    """Config key -> field name for one section."""
    renamed = _TABLE_KEYS[section]
    taken = set(renamed.values())
    names = [f.name for f in fields(record)] if section != "experiment" else _EXPERIMENT_FIELDS
    out = dict(renamed)
    for name in names:
        if name not in taken:
            out[name] = name
    return out


KEYS = {
    "scenario": _key_map("scenario", ScenarioConfig),
    "routing": _key_map("routing", SimParams),
    "experiment": _key_map("experiment", None),
}


@dataclass(frozen=True)
class RunConfig:
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    routing: SimParams = field(default_factory=SimParams)
    plan: ExperimentPlan = field(default_factory=ExperimentPlan)


def _convert(raw: str, kind: str, key: str, line: int):
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            v = float(raw)
            if not math.isfinite(v):
                raise ValueError
            return v
        if kind == "optfloat":
            return None if raw.lower() == "none" else _convert(raw, "float", key, line)
        if kind == "optint":
            return None if raw.lower() == "none" else int(raw)
        if kind == "floats":
            return tuple(float(x) for x in raw.replace(",", " ").split())
        if kind == "models":
            return tuple(raw.replace(",", " ").split())
        return raw
    except ValueError:
        raise ConfigError(f"line {line}: bad value {raw!r} for {key!r} (expected {kind})") from None


def _kind(section: str, name: str) -> str:
    if section == "experiment":
        return {"models": "models", "speed_points": "floats", "seeds": "int", "outputs": "str",
                "sample_interval": "float", "parallelism": "int"}[name]
    record = ScenarioConfig if section == "scenario" else SimParams
    ann = {f.name: str(f.type) for f in fields(record)}[name]
    if "None" in ann:
        return "optint" if "int" in ann else "optfloat"
    return {"int": "int", "float": "float", "str": "str"}[ann]


def parse_config(text: str) -> RunConfig:
    """Parse config text; missing keys keep their defaults."""
    values: dict[str, dict] = {s: {} for s in KEYS}
    section = None
    seen: dict[tuple[str, str], int] = {}
    for ln, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ParseError(f"unterminated section header {line!r}", ln, 1)
            section = line[1:-1].strip()
            if section not in KEYS:
                raise ConfigError(f"line {ln}: unknown section [{section}]")
            continue
        if "=" not in line:
            raise ParseError(f"expected 'key = value', got {line!r}", ln, 1)
        key, value = (s.strip() for s in line.split("=", 1))
        if section is None:
            raise ConfigError(f"line {ln}: key {key!r} appears before any section header")
        if key not in KEYS[section]:
            raise ConfigError(f"line {ln}: unknown key {key!r} in [{section}]")
        if (section, key) in seen:
            raise ConfigError(f"line {ln}: duplicate key {key!r} (first set on line "
                              f"{seen[section, key]})")
        seen[section, key] = ln
        name = KEYS[section][key]
        values[section][name] = _convert(value, _kind(section, name), key, ln)

    scenario = replace(ScenarioConfig(), **values["scenario"])
    routing = replace(SimParams(), **values["routing"])
    exp = values["experiment"]
    if "models" in exp:
        bad = [m for m in exp["models"] if m not in MODELS]
        if bad:
            raise ConfigError(f"unknown model(s) {bad} in [experiment] models")
    plan = ExperimentPlan(base_config=scenario, sim_params=routing, **exp)
    return RunConfig(scenario, routing, plan)


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        return parse_config(text)
    except ParseError as exc:
        raise ParseError(f"{path}: {exc}") from None
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def dump_config(cfg: RunConfig | None = None) -> str:
    """Config text that `parse_config` maps back to `cfg` (defaults if None)."""
    cfg = cfg or RunConfig()

    def fmt(v):
        if v is None:
            return "none"
        if isinstance(v, tuple):
            return ", ".join(fmt(x) for x in v)
        if isinstance(v, float):
            return repr(v)
        return str(v)

    out = []
    for section, record in (("scenario", cfg.scenario), ("routing", cfg.routing),
                            ("experiment", cfg.plan)):
        out.append(f"[{section}]")
        for key, name in KEYS[section].items():
            out.append(f"{key} = {fmt(getattr(record, name))}")
        out.append("")
    return "\n".join(out)
