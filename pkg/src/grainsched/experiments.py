"""Scenario-matrix comparison and random-search calibration of PerfParams."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import yaml

from grainsched.engine import SimReport, _num, fmt_seconds, run
from grainsched.errors import ConfigError
from grainsched.model import Profile
from grainsched.perf import PerfParams
from grainsched.workload import PRESET_MATRIX, ScenarioSpec, generate, preset

log = logging.getLogger(__name__)


def _mean(xs: Sequence[Fraction]) -> Optional[Fraction]:
    return sum(xs, Fraction(0)) / len(xs) if xs else None


def relative_delta(baseline: Fraction, value: Fraction) -> Fraction:
    """Positive when ``value`` improves on (is smaller than) ``baseline``."""
    if baseline == 0:
        raise ConfigError("baseline metric is zero; relative delta undefined")
    return (baseline - value) / baseline


# ---------------------------------------------------------------------------
# compare

@dataclass(frozen=True)
class CompareRow:
    scenario: str
    seed: Optional[int]          # None marks the per-scenario mean row
    overall_response_s: Fraction
    makespan_s: Fraction
    run_means: Tuple[Tuple[str, Optional[Fraction]], ...]
    delta_response: Optional[Fraction] = None
    delta_makespan: Optional[Fraction] = None

    @property
    def is_mean(self) -> bool:
        return self.seed is None

    def run_mean(self, benchmark: str) -> Optional[Fraction]:
        return dict(self.run_means)[benchmark]


@dataclass
class CompareTable:
    baseline: str
    scenarios: List[str]
    seeds: List[Optional[int]]
    benchmarks: List[str]
    rows: List[CompareRow]
    reports: Dict[Tuple[str, Optional[int]], SimReport] = field(default_factory=dict, repr=False)

    def mean_row(self, scenario: str) -> CompareRow:
        for r in self.rows:
            if r.is_mean and r.scenario == scenario:
                return r
        raise KeyError(scenario)

    def seed_rows(self) -> List[CompareRow]:
        return [r for r in self.rows if not r.is_mean]

    def _header(self) -> List[str]:
        return (["scenario", "seed", "overall_response_s", "makespan_s",
                 "delta_response", "delta_makespan"]
                + [f"run_s[{b}]" for b in self.benchmarks])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self._header())
        for r in self.rows:
            w.writerow([r.scenario, "mean" if r.is_mean else r.seed,
                        fmt_seconds(r.overall_response_s), fmt_seconds(r.makespan_s),
                        fmt_seconds(r.delta_response), fmt_seconds(r.delta_makespan)]
                       + ["" if v is None else fmt_seconds(v) for _, v in r.run_means])
        return buf.getvalue()

    def to_dict(self) -> dict:
        def row(r):
            return {
                "scenario": r.scenario,
                "seed": "mean" if r.is_mean else r.seed,
                "overall_response_s": _num(r.overall_response_s),
                "makespan_s": _num(r.makespan_s),
                "delta_response": _num(r.delta_response),
                "delta_makespan": _num(r.delta_makespan),
                "run_s": {b: None if v is None else _num(v) for b, v in r.run_means},
            }
        return {"baseline": self.baseline, "scenarios": self.scenarios, "seeds": self.seeds,
                "rows": [row(r) for r in self.rows]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def render(self) -> str:
        lines = [f"{'scenario':<10} {'seed':>5} {'response_s':>14} {'makespan_s':>12} "
                 f"{'d_resp':>7} {'d_mksp':>7}"]
        for r in self.rows:
            lines.append(f"{r.scenario:<10} {'mean' if r.is_mean else r.seed:>5} "
                         f"{float(r.overall_response_s):>14.1f} {float(r.makespan_s):>12.1f} "
                         f"{float(r.delta_response):>7.1%} {float(r.delta_makespan):>7.1%}")
        return "\n".join(lines)


def _workload_key(spec: ScenarioSpec, seed):
    return [(j.job_id, j.benchmark, j.submit_time_s, j.base_runtime_s) for j in generate(spec, seed)]


def compare(scenarios: Sequence[ScenarioSpec], seeds: Sequence[Optional[int]],
            baseline: Optional[str] = None) -> CompareTable:
    """Run every (scenario, seed) pair and tabulate metrics against ``baseline``.

    Scenarios must resolve to identical arrivals for each seed. The baseline
    defaults to NONE when present, else to the first scenario.
    """
    if len(scenarios) < 2:
        raise ConfigError("compare needs at least two scenarios")
    names = [s.name for s in scenarios]
    if len(set(names)) != len(names):
        raise ConfigError(f"duplicate scenario names: {names}")
    if baseline is None:
        baseline = "NONE" if "NONE" in names else names[0]
    elif baseline not in names:
        raise ConfigError(f"baseline {baseline!r} is not among the scenarios {names}")
    seeds = list(seeds) or [None]

    for seed in seeds:
        ref = _workload_key(scenarios[0], seed)
        for s in scenarios[1:]:
            if _workload_key(s, seed) != ref:
                raise ConfigError(f"scenario {s.name!r} has a different workload than "
                                  f"{scenarios[0].name!r} for seed {seed}")

    benchmarks = sorted({j.benchmark for seed in seeds for j in generate(scenarios[0], seed)})
    reports = {(s.name, seed): run(s, seed) for s in scenarios for seed in seeds}

    def runs(rep_list, b):
        return _mean([x for rep in rep_list for x in rep.run_times(b)])

    means = {}
    for s in scenarios:
        reps = [reports[(s.name, seed)] for seed in seeds]
        means[s.name] = (_mean([r.overall_response_s for r in reps]),
                         _mean([r.makespan_s for r in reps]),
                         tuple((b, runs(reps, b)) for b in benchmarks))

    rows = []
    for s in scenarios:
        for seed in seeds:
            rep, base = reports[(s.name, seed)], reports[(baseline, seed)]
            rows.append(CompareRow(s.name, seed, rep.overall_response_s, rep.makespan_s,
                                   tuple((b, runs([rep], b)) for b in benchmarks),
                                   relative_delta(base.overall_response_s, rep.overall_response_s),
                                   relative_delta(base.makespan_s, rep.makespan_s)))
    bresp, bmk, _ = means[baseline]
    for s in scenarios:
        resp, mk, rm = means[s.name]
        rows.append(CompareRow(s.name, None, resp, mk, rm,
                               relative_delta(bresp, resp), relative_delta(bmk, mk)))
    return CompareTable(baseline, names, seeds, benchmarks, rows, reports)


def matrix(preset_name: str, names: Optional[Sequence[str]] = None,
           perf: Optional[PerfParams] = None) -> List[ScenarioSpec]:
    """Scenario specs for ``names`` (default: the preset's matrix) on one preset."""
    template = preset(preset_name)
    if perf is not None:
        template = template.with_perf(perf)
    return [template.with_setting(n) for n in (names or PRESET_MATRIX[preset_name.lower()])]


# ---------------------------------------------------------------------------
# calibration targets and parameter space

METRICS = ("overall_response_s", "makespan_s", "run_s")


@dataclass(frozen=True)
class Target:
    """Desired relative improvement of ``scenario`` over ``baseline`` on ``metric``."""
    name: str
    metric: str
    scenario: str
    baseline: str
    improvement: float
    tolerance: float
    weight: float = 1.0
    benchmark: Optional[str] = None   # required for run_s

    def residual(self, achieved: float) -> float:
        return (achieved - self.improvement) / self.improvement

    def within(self, achieved: float) -> bool:
        return abs(achieved - self.improvement) <= self.tolerance + 1e-12


@dataclass(frozen=True)
class TargetSet:
    preset: str
    seeds: Tuple[int, ...]
    targets: Tuple[Target, ...]
    screen_seeds: int = 2
    keep_fraction: float = 0.05

    @property
    def scenarios(self) -> List[str]:
        out = []
        for t in self.targets:
            for s in (t.baseline, t.scenario):
                if s not in out:
                    out.append(s)
        return out


def _data_text(name: str) -> str:
    return resources.files("grainsched").joinpath("data", name).read_text()


def _read_yaml(path, bundled: str) -> object:
    """Parse ``path``, or the bundled data file when ``path`` is None."""
    try:
        text = _data_text(bundled) if path is None else Path(path).read_text()
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e}") from None
    try:
        return yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ConfigError(f"invalid YAML in {path}: {e}") from None


def parse_targets(data) -> TargetSet:
    if not isinstance(data, Mapping):
        raise ConfigError("targets file must be a mapping")
    raw = data.get("targets") or []
    if not raw:
        raise ConfigError("no calibration targets given")
    targets = []
    for i, t in enumerate(raw):
        try:
            target = Target(
                name=str(t.get("name", f"target{i}")),
                metric=str(t["metric"]),
                scenario=str(t["scenario"]).upper(),
                baseline=str(t["baseline"]).upper(),
                improvement=float(t["improvement"]),
                tolerance=float(t.get("tolerance", 0.10)),
                weight=float(t.get("weight", 1.0)),
                benchmark=t.get("benchmark"),
            )
        except (KeyError, TypeError, ValueError, AttributeError) as e:
            raise ConfigError(f"targets[{i}] is malformed: {e}") from None
        if target.metric not in METRICS:
            raise ConfigError(f"targets[{i}]: metric must be one of {METRICS}")
        if target.metric == "run_s" and not target.benchmark:
            raise ConfigError(f"targets[{i}]: run_s targets need a benchmark")
        if target.improvement == 0:
            raise ConfigError(f"targets[{i}]: improvement 0 has no relative residual")
        if target.tolerance < 0 or target.weight < 0:
            raise ConfigError(f"targets[{i}]: tolerance and weight must be >= 0")
        targets.append(target)
    seeds = tuple(int(s) for s in data.get("seeds", [1, 2, 3, 4, 5]))
    if not seeds:
        raise ConfigError("targets file lists no seeds")
    screen = int(data.get("screen_seeds", min(2, len(seeds))))
    keep = float(data.get("keep_fraction", 0.05))
    if not 1 <= screen <= len(seeds) or not 0 < keep <= 1:
        raise ConfigError("screen_seeds must be in [1, len(seeds)] and keep_fraction in (0, 1]")
    return TargetSet(str(data.get("preset", "exp2")), seeds, tuple(targets), screen, keep)


def load_targets(path=None) -> TargetSet:
    return parse_targets(_read_yaml(path, "targets.yaml"))


@dataclass(frozen=True)
class Dimension:
    path: Tuple[str, ...]     # ("alpha_net_other",) or ("beta_mig", "cpu")
    low: Fraction
    high: Fraction

    @property
    def label(self) -> str:
        return ".".join(self.path)


def parse_space(data) -> List[Dimension]:
    if not isinstance(data, Mapping) or not data:
        raise ConfigError("parameter space must be a non-empty mapping")
    known = PerfParams().to_dict()
    dims = []

    def bounds(label, value):
        if not isinstance(value, (list, tuple)) or len(value) != 2:
            raise ConfigError(f"space.{label} must be [low, high]")
        lo, hi = (Fraction(str(v)) for v in value)
        if lo > hi:
            raise ConfigError(f"space.{label}: low {lo} exceeds high {hi}")
        return lo, hi

    for name, value in data.items():
        if name not in known:
            raise ConfigError(f"space: unknown parameter {name!r}")
        if isinstance(known[name], dict):
            if not isinstance(value, Mapping):
                raise ConfigError(f"space.{name} must map profile -> [low, high]")
            for prof, rng in value.items():
                Profile.parse(prof)
                dims.append(Dimension((name, str(prof)), *bounds(f"{name}.{prof}", rng)))
        else:
            dims.append(Dimension((name,), *bounds(name, value)))
    return dims


def load_space(path=None) -> List[Dimension]:
    return parse_space(_read_yaml(path, "space.yaml"))


def sample_params(dims: Sequence[Dimension], rng: random.Random, base: PerfParams,
                  places: int = 3) -> PerfParams:
    """One uniform draw from the box, each value rounded to ``places`` decimals."""
    data: Dict[str, object] = {}
    for d in dims:
        u = Fraction(rng.randint(0, 10 ** places), 10 ** places)
        v = d.low + u * (d.high - d.low)
        v = Fraction(round(v * 10 ** places), 10 ** places)
        if len(d.path) == 1:
            data[d.path[0]] = v
        else:
            data.setdefault(d.path[0], {})[d.path[1]] = v
    if data.get("domain_bandwidth_gbps", 1) == 0 or data.get("runtime_scale", 1) == 0:
        # rounding can land on the excluded zero end of a box
        for k in ("domain_bandwidth_gbps", "runtime_scale"):
            if data.get(k) == 0:
                data[k] = Fraction(1, 10 ** places)
    return PerfParams.from_dict(data, base)


# ---------------------------------------------------------------------------
# evaluation

def measure(perf: PerfParams, targets: TargetSet, seeds: Sequence[int]) -> Dict[str, float]:
    """Achieved relative improvement for every target, on means over ``seeds``."""
    template = preset(targets.preset).with_perf(perf)
    wanted = {}
    for t in targets.targets:
        for s in (t.scenario, t.baseline):
            wanted.setdefault(s, set()).add((t.metric, t.benchmark))
    values: Dict[Tuple[str, str, Optional[str]], Fraction] = {}
    for name, keys in wanted.items():
        spec = template.with_setting(name)
        reps = [run(spec, seed) for seed in seeds]
        for metric, bench in keys:
            if metric == "run_s":
                v = _mean([x for r in reps for x in r.run_times(bench)])
                if v is None:
                    raise ConfigError(f"no {bench} jobs in preset {targets.preset}")
            else:
                v = _mean([getattr(r, metric) for r in reps])
            values[(name, metric, bench)] = v
    return {t.name: float(relative_delta(values[(t.baseline, t.metric, t.benchmark)],
                                         values[(t.scenario, t.metric, t.benchmark)]))
            for t in targets.targets}


def objective(targets: TargetSet, achieved: Mapping[str, float]) -> float:
    return sum(t.weight * t.residual(achieved[t.name]) ** 2 for t in targets.targets)


@dataclass
class CalibrationResult:
    params: PerfParams
    objective: float
    achieved: Dict[str, float]
    targets: TargetSet
    budget: int
    seed: int
    evaluated_full: int

    @property
    def residuals(self) -> Dict[str, float]:
        return {t.name: t.residual(self.achieved[t.name]) for t in self.targets.targets}

    @property
    def warning(self) -> bool:
        """True when some target is outside its tolerance (best-effort result)."""
        return not all(t.within(self.achieved[t.name]) for t in self.targets.targets)

    def report(self) -> dict:
        return {
            "budget": self.budget,
            "search_seed": self.seed,
            "preset": self.targets.preset,
            "seeds": list(self.targets.seeds),
            "objective": round(self.objective, 9),
            "warning": self.warning,
            "targets": [{
                "name": t.name,
                "metric": t.metric + (f"[{t.benchmark}]" if t.benchmark else ""),
                "scenario": t.scenario,
                "baseline": t.baseline,
                "target": t.improvement,
                "tolerance": t.tolerance,
                "achieved": round(self.achieved[t.name], 6),
                "residual": round(t.residual(self.achieved[t.name]), 6),
                "within_tolerance": t.within(self.achieved[t.name]),
            } for t in self.targets.targets],
        }

    def params_yaml(self) -> str:
        return yaml.safe_dump({"perf": self.params.to_dict(), "calibration": self.report()},
                              sort_keys=False)

    def render(self) -> str:
        lines = [f"objective={self.objective:.6f} warning={str(self.warning).lower()}"]
        for row in self.report()["targets"]:
            mark = "ok " if row["within_tolerance"] else "OFF"
            lines.append(f"  [{mark}] {row['name']:<28} target={row['target']:+.3f} "
                         f"achieved={row['achieved']:+.3f} residual={row['residual']:+.3f}")
        return "\n".join(lines)


def calibrate(targets: TargetSet, dims: Sequence[Dimension], budget: int, seed: int = 0,
              base: Optional[PerfParams] = None) -> CalibrationResult:
    """Seeded random search minimizing the weighted sum of squared relative residuals.

    Every sample is scored on the first ``screen_seeds`` seeds; the best
    ``keep_fraction`` of them (at least one) is re-scored on all seeds and the
    winner is picked on that full score.
    """
    if budget < 1:
        raise ConfigError("budget must be >= 1")
    if not targets.targets:
        raise ConfigError("no calibration targets given")
    base = base or PerfParams()
    rng = random.Random(seed)
    screen = targets.seeds[:targets.screen_seeds]
    scored = []
    for i in range(budget):
        p = sample_params(dims, rng, base)
        scored.append((objective(targets, measure(p, targets, screen)), i, p))
        if (i + 1) % 500 == 0:
            log.info("calibrate: %d/%d samples, best screen objective %.4f",
                     i + 1, budget, min(scored)[0])
    scored.sort(key=lambda x: (x[0], x[1]))
    keep = max(1, math.ceil(budget * targets.keep_fraction))
    best = None
    for _, i, p in scored[:keep]:
        achieved = measure(p, targets, targets.seeds)
        obj = objective(targets, achieved)
        if best is None or (obj, i) < (best[0], best[1]):
            best = (obj, i, p, achieved)
    obj, _, params, achieved = best
    return CalibrationResult(params, obj, achieved, targets, budget, seed, keep)


__all__ = ["CompareRow", "CompareTable", "compare", "matrix", "relative_delta", "Target",
           "TargetSet", "Dimension", "parse_targets", "load_targets", "parse_space",
           "load_space", "sample_params", "measure", "objective", "CalibrationResult",
           "calibrate"]
