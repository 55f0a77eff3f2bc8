"""Command-line entry point: `manetlab <subcommand> ...`.

Exit codes: 0 on success, 1 on a usage or configuration error, 2 when an
input file cannot be parsed.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from .config import RunConfig, load_config
from .experiment import (
    CorrelationEntry, SeparationEntry, correlation_report, run_plan, separation_report,
    simulate_config,
)
from .formats import (
    emit_csv, export_bonnmotion, export_ns2_movements, import_bonnmotion, import_ns2_movements,
)
from .metrics import compute_all
from .models import generate
from .trace import MODELS, ManetLabError, ParseError, UsageError, validate

OUT_ENV = "MANETLAB_OUT"

_DEFAULT_NAMES = {
    "generate": "trace.txt", "metrics": "metrics.csv", "simulate": "perf.csv",
    "validate": "violations.txt",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", help="config file ([scenario]/[routing]/[experiment])")
    p.add_argument("--seed", type=int, help="override the scenario seed")
    p.add_argument("--out", help="output file (directory for `experiment`); default stdout")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = _Parser(prog="manetlab", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", parents=[common], help="config -> trace file")
    g.add_argument("--format", choices=("ns2", "bonnmotion"), default="bonnmotion")
    g.add_argument("--model", choices=MODELS)

    m = sub.add_parser("metrics", parents=[common], help="trace file or config -> metric CSV")
    m.add_argument("trace", nargs="?", help="trace file; generated from the config if omitted")
    m.add_argument("--format", choices=("ns2", "bonnmotion", "auto"), default="auto")
    m.add_argument("--model", choices=MODELS)
    m.add_argument("--sample-interval", type=float, default=1.0)

    s = sub.add_parser("simulate", parents=[common], help="config -> routing performance CSV")
    s.add_argument("--model", choices=MODELS)

    sub.add_parser("experiment", parents=[common],
                   help="plan config -> aggregate, separation and correlation CSVs")

    v = sub.add_parser("validate", parents=[common], help="trace file -> violation list")
    v.add_argument("trace")
    v.add_argument("--format", choices=("ns2", "bonnmotion", "auto"), default="auto")
    return parser


def _config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    sc = cfg.scenario
    if getattr(args, "model", None):
        sc = replace(sc, model=args.model)
    if args.seed is not None:
        sc = replace(sc, seed=args.seed)
    plan = replace(cfg.plan, base_config=sc)
    return RunConfig(sc, cfg.routing, plan)


def _read_trace(path: str, fmt: str, cfg: RunConfig):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read trace {path!r}: {exc.strerror}") from None
    if fmt == "auto":
        first = next((ln.strip() for ln in text.splitlines() if ln.strip()), "")
        fmt = "ns2" if first.startswith("$") else "bonnmotion"
    sc = cfg.scenario
    reader = import_ns2_movements if fmt == "ns2" else import_bonnmotion
    try:
        return reader(text, sc.duration, sc.area_width, sc.area_height, sc.radio_range)
    except ParseError as exc:
        raise ParseError(f"{path}: {exc}") from None


def _out_path(args) -> Path | None:
    if args.out:
        return Path(args.out)
    env = os.environ.get(OUT_ENV)
    if env:
        name = "." if args.command == "experiment" else _DEFAULT_NAMES[args.command]
        return Path(env) / name
    return None


def _write(args, text: str) -> None:
    path = _out_path(args)
    if path is None:
        sys.stdout.write(text)
        return
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def cmd_generate(args) -> int:
    cfg = _config(args)
    scen = generate(cfg.scenario)
    text = export_ns2_movements(scen) if args.format == "ns2" else export_bonnmotion(scen)
    _write(args, text)
    return 0


def cmd_metrics(args) -> int:
    cfg = _config(args)
    if args.trace:
        scen = _read_trace(args.trace, args.format, cfg)
    else:
        scen = generate(cfg.scenario)
    report = compute_all(scen, cfg.scenario.radio_range, args.sample_interval)
    _write(args, emit_csv([report]))
    return 0


def cmd_simulate(args) -> int:
    cfg = _config(args)
    cfg.scenario.check()
    cfg.routing.check()
    perf = simulate_config(cfg.scenario, cfg.routing, cfg.scenario.seed)
    _write(args, emit_csv([perf]))
    return 0


def cmd_experiment(args) -> int:
    cfg = _config(args)
    result = run_plan(cfg.plan)
    outdir = _out_path(args)
    if outdir is None:
        raise UsageError("experiment writes three files; give --out DIR or set " + OUT_ENV)
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "aggregate.csv").write_text(emit_csv(result.rows), encoding="utf-8")
    seps = []
    if cfg.plan.wants_metrics and set(cfg.plan.models) == set(MODELS):
        for speed in cfg.plan.speed_points:
            seps += separation_report(result.rows, float(speed))
    (outdir / "separation.csv").write_text(emit_csv(seps, SeparationEntry), encoding="utf-8")
    corr = []
    if cfg.plan.wants_metrics and cfg.plan.wants_perf and len(cfg.plan.models) >= 3:
        for speed in cfg.plan.speed_points:
            corr += correlation_report(result.rows, float(speed))
    (outdir / "correlation.csv").write_text(emit_csv(corr, CorrelationEntry), encoding="utf-8")
    if cfg.plan.wants_perf:
        bad = [r for r in result.runs if not r.perf.conserved]
        if bad:
            raise ManetLabError(f"packet conservation violated in {len(bad)} runs")
    return 0


def cmd_validate(args) -> int:
    cfg = _config(args)
    scen = _read_trace(args.trace, args.format, cfg)
    bad = validate(scen, cfg.scenario)
    lines = [str(v) for v in bad]
    lines.append(f"{len(bad)} violation(s)")
    _write(args, "\n".join(lines) + "\n")
    return 0


COMMANDS = {
    "generate": cmd_generate, "metrics": cmd_metrics, "simulate": cmd_simulate,
    "experiment": cmd_experiment, "validate": cmd_validate,
}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return COMMANDS[args.command](args)
    except ParseError as exc:
        print(f"manetlab: parse error: {exc}", file=sys.stderr)
        return 2
    except (ManetLabError, OSError) as exc:
        print(f"manetlab: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
