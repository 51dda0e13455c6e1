"""Command-line entry point: ``grainsched {simulate,compare,calibrate}``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import List, Optional, Sequence

from grainsched import __version__
from grainsched.engine import run
from grainsched.errors import ConfigError, GrainschedError
from grainsched.experiments import calibrate, compare, load_space, load_targets
from grainsched.workload import PRESET_MATRIX, ScenarioSpec, load_perf, load_scenario, preset

log = logging.getLogger("grainsched")

LOG_LEVELS = {"error": logging.ERROR, "warning": logging.WARNING, "info": logging.INFO,
              "debug": logging.DEBUG}


def _is_file_arg(value: str) -> bool:
    return value.endswith((".yaml", ".yml")) or os.sep in value or Path(value).is_file()


def resolve_scenario(scenario: Optional[str], preset_name: Optional[str]) -> ScenarioSpec:
    """A scenario file, a setting name on a preset (default exp2), or a bare preset."""
    if scenario and _is_file_arg(scenario):
        if preset_name:
            raise ConfigError("--preset cannot be combined with a scenario file; "
                              "set 'preset:' inside the file instead")
        return load_scenario(scenario)
    template = preset(preset_name or "exp2")
    return template.with_setting(scenario) if scenario else template


def _with_params(spec: ScenarioSpec, params: Optional[str]) -> ScenarioSpec:
    return spec.with_perf(load_perf(params, spec.perf)) if params else spec


def _write(out: Path, name: str, text: str) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    path.write_text(text)
    return path


def cmd_simulate(args) -> int:
    spec = _with_params(resolve_scenario(args.scenario, args.preset), args.params)
    report = run(spec, args.seed)
    out = Path(args.out)
    _write(out, f"report.{args.format}", report.to_json() if args.format == "json" else report.to_csv())
    _write(out, "trace.log", report.trace_text())
    _write(out, "gantt.csv", report.gantt_csv())
    print(report.summary())
    return 0


def _split(values: Optional[List[str]]) -> List[str]:
    return [v for item in values or [] for v in item.split(",") if v]


def cmd_compare(args) -> int:
    names = _split(args.scenario)
    if names:
        specs = [_with_params(resolve_scenario(n, args.preset), args.params) for n in names]
    else:
        key = (args.preset or "exp2").lower()
        if key not in PRESET_MATRIX:
            preset(key)   # raises with the standard message
        specs = [_with_params(resolve_scenario(n, key), args.params) for n in PRESET_MATRIX[key]]
    try:
        seeds = [int(s) for s in _split(args.seed)] or [1, 2, 3, 4, 5]
    except ValueError:
        raise ConfigError(f"--seed must be integers, got {args.seed}") from None
    table = compare(specs, seeds, args.baseline)
    out = Path(args.out)
    _write(out, "compare.csv", table.to_csv())
    _write(out, "compare.json", table.to_json())
    print(table.render())
    return 0


def cmd_calibrate(args) -> int:
    targets = load_targets(args.targets)
    dims = load_space(args.space)
    base = load_perf(args.params) if args.params else None
    result = calibrate(targets, dims, args.budget, args.seed, base)
    out = Path(args.out)
    _write(out, "params.yaml", result.params_yaml())
    _write(out, "residuals.json", json.dumps(result.report(), indent=2, sort_keys=True) + "\n")
    print(result.render())
    if result.warning:
        print("warning: some targets are outside tolerance; params are best effort",
              file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="grainsched", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run one scenario and write report, trace and gantt")
    sim.add_argument("--scenario", help="scenario YAML file or setting name (e.g. CM_G_TG)")
    sim.add_argument("--preset", help="experiment preset: exp1, exp2 or exp3")
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--out", default="out")
    sim.add_argument("--format", choices=["json", "csv"], default="json")
    sim.add_argument("--params", help="perf params YAML overriding the scenario's")
    sim.set_defaults(func=cmd_simulate)

    cmp_ = sub.add_parser("compare", help="run a scenario matrix and tabulate relative deltas")
    cmp_.add_argument("--scenario", action="append",
                      help="setting name or YAML file; repeat or comma-separate "
                           "(default: the preset's matrix)")
    cmp_.add_argument("--preset", help="preset the settings apply to (default exp2)")
    cmp_.add_argument("--seed", action="append", help="seed(s); default 1,2,3,4,5")
    cmp_.add_argument("--baseline", help="baseline scenario (default NONE if present)")
    cmp_.add_argument("--out", default="out")
    cmp_.add_argument("--params", help="perf params YAML applied to every scenario")
    cmp_.set_defaults(func=cmd_compare)

    cal = sub.add_parser("calibrate", help="random search of perf params against ratio targets")
    cal.add_argument("--targets", help="targets YAML (default: bundled targets)")
    cal.add_argument("--space", help="parameter box YAML (default: bundled space)")
    cal.add_argument("--budget", type=int, default=2000)
    cal.add_argument("--seed", type=int, default=0, help="search seed")
    cal.add_argument("--params", help="base params for dimensions outside the box")
    cal.add_argument("--out", default="out")
    cal.set_defaults(func=cmd_calibrate)
    return parser


def _configure_logging() -> None:
    level = os.environ.get("GRAINSCHED_LOG", "error").lower()
    if level not in LOG_LEVELS:
        raise ConfigError(f"GRAINSCHED_LOG must be one of {sorted(LOG_LEVELS)}, got {level!r}")
    logging.basicConfig(level=LOG_LEVELS[level], format="%(levelname)s %(name)s: %(message)s",
                        stream=sys.stderr)


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        _configure_logging()
        return args.func(args)
    except GrainschedError as e:
        print(f"grainsched: error: {e}", file=sys.stderr)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
