"""Benchmark catalog, experiment presets and scenario files."""

from __future__ import annotations

import functools
import random
from dataclasses import dataclass, field, replace
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Tuple

import yaml

from grainsched.allocator import AFFINITY_KUBELET, DEFAULT_KUBELET, KubeletPolicy
from grainsched.errors import ConfigError
from grainsched.model import GiB, ClusterConfig, JobSpec, Profile, ResourceQuantity
from grainsched.perf import PerfParams, render_fraction, to_fraction
from grainsched.planner import GranularityPolicy
from grainsched.scheduler import SchedulerMode


@functools.lru_cache(maxsize=1)
def calibrated_perf() -> PerfParams:
    """Parameters shipped in ``data/calibrated.yaml``; the default for every scenario."""
    text = resources.files("grainsched").joinpath("data", "calibrated.yaml").read_text()
    return PerfParams.from_dict(yaml.safe_load(text)["perf"])


@dataclass(frozen=True)
class BenchmarkDef:
    name: str
    profile: Profile
    base_runtime_s: Fraction
    per_process_bandwidth_gbps: Fraction
    n_tasks: int = 16
    total_resources: ResourceQuantity = ResourceQuantity(16_000, 32 * GiB)

    def to_dict(self) -> dict:
        return {
            "profile": self.profile.value,
            "base_runtime_s": render_fraction(self.base_runtime_s),
            "per_process_bandwidth_gbps": render_fraction(self.per_process_bandwidth_gbps),
            "n_tasks": self.n_tasks,
            "cpu_millicores": self.total_resources.cpu_millicores,
            "memory_bytes": self.total_resources.memory_bytes,
        }


# Base runtimes are calibration placeholders, not measurements. Network-bound
# benchmarks draw no memory bandwidth in the model.
CATALOG: Dict[str, BenchmarkDef] = {b.name: b for b in [
    BenchmarkDef("EP-DGEMM", Profile.CPU, Fraction(240), Fraction("0.5")),
    BenchmarkDef("EP-STREAM", Profile.MEMORY, Fraction(180), Fraction("4")),
    BenchmarkDef("G-FFT", Profile.NETWORK, Fraction(150), Fraction(0)),
    BenchmarkDef("G-RandomRing", Profile.NETWORK, Fraction(120), Fraction(0)),
    BenchmarkDef("MiniFE", Profile.CPU_MEMORY, Fraction(300), Fraction("2")),
]}


@dataclass(frozen=True)
class Arrival:
    benchmark: str
    submit_time_s: Fraction
    job_id: Optional[str] = None


@dataclass(frozen=True)
class GeneratorSpec:
    preset: str
    seed: Optional[int] = None


@dataclass(frozen=True)
class Setting:
    kubelet: KubeletPolicy
    planner: GranularityPolicy
    scheduler: SchedulerMode


SETTINGS: Dict[str, Setting] = {
    "NONE": Setting(DEFAULT_KUBELET, GranularityPolicy.NONE, SchedulerMode.BASELINE),
    "CM": Setting(AFFINITY_KUBELET, GranularityPolicy.NONE, SchedulerMode.BASELINE),
    "CM_S": Setting(AFFINITY_KUBELET, GranularityPolicy.SCALE, SchedulerMode.BASELINE),
    "CM_G": Setting(AFFINITY_KUBELET, GranularityPolicy.GRANULARITY, SchedulerMode.BASELINE),
    "CM_S_TG": Setting(AFFINITY_KUBELET, GranularityPolicy.SCALE, SchedulerMode.TASKGROUP),
    "CM_G_TG": Setting(AFFINITY_KUBELET, GranularityPolicy.GRANULARITY, SchedulerMode.TASKGROUP),
    "KUBEFLOW": Setting(AFFINITY_KUBELET, GranularityPolicy.KUBEFLOW_SINGLE, SchedulerMode.BASELINE),
    "VOLCANO": Setting(AFFINITY_KUBELET, GranularityPolicy.VOLCANO_NATIVE, SchedulerMode.BASELINE),
}
_SETTING_ALIASES = {"kubeflow": "KUBEFLOW", "volcano-native": "VOLCANO", "volcano": "VOLCANO"}

CORE_SCENARIOS = ["NONE", "CM", "CM_S", "CM_G", "CM_S_TG", "CM_G_TG"]
PRESET_MATRIX = {
    "exp1": CORE_SCENARIOS,
    "exp2": CORE_SCENARIOS,
    "exp3": ["KUBEFLOW", "VOLCANO", "CM", "CM_S_TG", "CM_G_TG"],
}


def setting_name(name: str) -> str:
    key = _SETTING_ALIASES.get(name.lower(), name.upper())
    if key not in SETTINGS:
        raise ConfigError(f"unknown scenario setting {name!r}; expected one of {sorted(SETTINGS)}")
    return key


@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    cluster: ClusterConfig = ClusterConfig()
    kubelet: KubeletPolicy = AFFINITY_KUBELET
    planner: GranularityPolicy = GranularityPolicy.GRANULARITY
    scheduler: SchedulerMode = SchedulerMode.TASKGROUP
    perf: PerfParams = field(default_factory=calibrated_perf)
    arrivals: Optional[Tuple[Arrival, ...]] = None
    generator: Optional[GeneratorSpec] = None
    benchmarks: Mapping[str, BenchmarkDef] = field(default_factory=lambda: dict(CATALOG))
    workload: str = ""

    def with_setting(self, name: str) -> ScenarioSpec:
        key = setting_name(name)
        s = SETTINGS[key]
        return replace(self, name=key, kubelet=s.kubelet, planner=s.planner, scheduler=s.scheduler)

    def with_perf(self, perf: PerfParams) -> ScenarioSpec:
        return replace(self, perf=perf)


def preset(name: str, seed: Optional[int] = None) -> ScenarioSpec:
    """Scenario template for a named experiment, under the CM_G_TG setting.

    Use ``ScenarioSpec.with_setting`` to switch to another row of the matrix.
    """
    key = name.lower()
    if key not in PRESET_MATRIX:
        raise ConfigError(f"unknown preset {name!r}; expected one of {sorted(PRESET_MATRIX)}")
    # exp3 replays the exp2 arrivals
    gen = GeneratorSpec("exp1" if key == "exp1" else "exp2", seed)
    return ScenarioSpec(name=key, generator=gen, workload=key).with_setting("CM_G_TG")


def _exp1_arrivals() -> List[Arrival]:
    return [Arrival("EP-DGEMM", Fraction(60 * i)) for i in range(10)]


def _exp2_arrivals(seed: int) -> List[Arrival]:
    rng = random.Random(seed)
    kinds = [name for name in CATALOG for _ in range(4)]
    rng.shuffle(kinds)
    # millisecond resolution keeps submit times exact rationals
    times = sorted(Fraction(rng.randint(0, 1_200_000), 1000) for _ in kinds)
    return [Arrival(k, t) for k, t in zip(kinds, times)]


GENERATORS = {"exp1": _exp1_arrivals, "exp2": _exp2_arrivals, "none": lambda: []}


def resolve_arrivals(spec: ScenarioSpec, seed: Optional[int]) -> List[Arrival]:
    if spec.arrivals is not None:
        return list(spec.arrivals)
    if spec.generator is None:
        return []
    gen = spec.generator
    if gen.preset == "exp2":
        s = gen.seed if gen.seed is not None else seed
        if s is None:
            raise ConfigError("the exp2 generator needs a seed")
        return _exp2_arrivals(s)
    if gen.preset in GENERATORS:
        return GENERATORS[gen.preset]()
    raise ConfigError(f"unknown generator preset {gen.preset!r}")


def generate(spec: ScenarioSpec, seed: Optional[int] = None) -> List[JobSpec]:
    """Concrete jobs sorted by submit time, with ids ``<benchmark>-<k>``."""
    arrivals = sorted(resolve_arrivals(spec, seed), key=lambda a: a.submit_time_s)
    counters: Dict[str, int] = {}
    jobs = []
    for a in arrivals:
        try:
            b = spec.benchmarks[a.benchmark]
        except KeyError:
            raise ConfigError(f"unknown benchmark {a.benchmark!r}; known: {sorted(spec.benchmarks)}") from None
        counters[b.name] = counters.get(b.name, 0) + 1
        jobs.append(JobSpec(
            job_id=a.job_id or f"{b.name}-{counters[b.name]}",
            n_tasks=b.n_tasks,
            total_resources=b.total_resources,
            profile=b.profile,
            submit_time_s=a.submit_time_s,
            base_runtime_s=b.base_runtime_s * spec.perf.runtime_scale,
            per_process_bandwidth_gbps=b.per_process_bandwidth_gbps,
            benchmark=b.name,
        ))
    ids = [j.job_id for j in jobs]
    if len(set(ids)) != len(ids):
        raise ConfigError("duplicate job ids in arrival list")
    return jobs


# ---------------------------------------------------------------------------
# scenario files

def _section(data, name, kind=dict):
    value = data.get(name)
    if value is not None and not isinstance(value, kind):
        raise ConfigError(f"'{name}' must be a {kind.__name__}")
    return value


def _parse_cluster(data: Mapping, base: ClusterConfig) -> ClusterConfig:
    allowed = {"worker_nodes", "sockets", "cores_per_socket", "reserved_per_socket",
               "memory_gib", "domain_bandwidth_gbps"}
    unknown = set(data) - allowed
    if unknown:
        raise ConfigError(f"unknown cluster keys: {sorted(unknown)}")
    kw = {}
    for k, v in data.items():
        if k == "domain_bandwidth_gbps":
            kw[k] = to_fraction(v, f"cluster.{k}")
        elif not isinstance(v, int) or isinstance(v, bool):
            raise ConfigError(f"cluster.{k} must be an integer")
        else:
            kw[k] = v
    return replace(base, **kw)


def _parse_benchmark(name: str, data: Mapping, base: Optional[BenchmarkDef]) -> BenchmarkDef:
    if base is None and not {"profile", "base_runtime_s"} <= set(data):
        raise ConfigError(f"new benchmark {name!r} needs profile and base_runtime_s")
    b = base or BenchmarkDef(name, Profile.CPU, Fraction(1), Fraction(0))
    res = b.total_resources
    return BenchmarkDef(
        name=name,
        profile=Profile.parse(data.get("profile", b.profile)),
        base_runtime_s=to_fraction(data.get("base_runtime_s", b.base_runtime_s), f"{name}.base_runtime_s"),
        per_process_bandwidth_gbps=to_fraction(
            data.get("per_process_bandwidth_gbps", b.per_process_bandwidth_gbps),
            f"{name}.per_process_bandwidth_gbps"),
        n_tasks=int(data.get("n_tasks", b.n_tasks)),
        total_resources=ResourceQuantity(int(data.get("cpu_millicores", res.cpu_millicores)),
                                         int(data.get("memory_bytes", res.memory_bytes))),
    )


SCENARIO_KEYS = {"name", "preset", "setting", "cluster", "kubelet", "planner", "scheduler",
                 "perf", "benchmarks", "arrivals", "generator"}


def scenario_from_dict(data: Mapping) -> ScenarioSpec:
    if not isinstance(data, Mapping):
        raise ConfigError("scenario must be a mapping")
    unknown = set(data) - SCENARIO_KEYS
    if unknown:
        raise ConfigError(f"unknown scenario keys: {sorted(unknown)}")
    spec = preset(str(data["preset"])) if "preset" in data else ScenarioSpec(name="custom")
    if "setting" in data:
        spec = spec.with_setting(str(data["setting"]))
    kw = {}
    if "name" in data:
        kw["name"] = str(data["name"])
    if _section(data, "cluster"):
        kw["cluster"] = _parse_cluster(data["cluster"], spec.cluster)
    if "kubelet" in data:
        kw["kubelet"] = KubeletPolicy.parse(data["kubelet"])
    if "planner" in data:
        kw["planner"] = GranularityPolicy.parse(data["planner"])
    if "scheduler" in data:
        kw["scheduler"] = SchedulerMode.parse(data["scheduler"])
    if _section(data, "perf"):
        kw["perf"] = PerfParams.from_dict(data["perf"], spec.perf)
    if _section(data, "benchmarks"):
        benches = dict(spec.benchmarks)
        for name, b in data["benchmarks"].items():
            if not isinstance(b, Mapping):
                raise ConfigError(f"benchmark {name!r} must be a mapping")
            benches[name] = _parse_benchmark(name, b, benches.get(name))
        kw["benchmarks"] = benches
    arrivals = _section(data, "arrivals", list)
    if arrivals is not None:
        out = []
        for i, a in enumerate(arrivals):
            if not isinstance(a, Mapping) or "benchmark" not in a:
                raise ConfigError(f"arrivals[{i}] needs a benchmark")
            out.append(Arrival(str(a["benchmark"]),
                               to_fraction(a.get("submit_time_s", 0), f"arrivals[{i}].submit_time_s"),
                               a.get("job_id")))
        kw["arrivals"] = tuple(out)
        kw["generator"] = None
    gen = _section(data, "generator")
    if gen is not None:
        if "preset" not in gen:
            raise ConfigError("generator needs a preset")
        kw["generator"] = GeneratorSpec(str(gen["preset"]), gen.get("seed"))
        kw["arrivals"] = None
    spec = replace(spec, **kw)
    bad = [a.benchmark for a in spec.arrivals or () if a.benchmark not in spec.benchmarks]
    if bad:
        raise ConfigError(f"unknown benchmark(s) in arrivals: {bad}")
    return spec


def load_scenario(path) -> ScenarioSpec:
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text())
    except OSError as e:
        raise ConfigError(f"cannot read scenario {path}: {e}") from None
    except yaml.YAMLError as e:
        raise ConfigError(f"invalid YAML in {path}: {e}") from None
    return scenario_from_dict(data or {})


def load_perf(path, base: Optional[PerfParams] = None) -> PerfParams:
    """Read a params file: either a bare perf mapping or one nested under ``perf``."""
    try:
        data = yaml.safe_load(Path(path).read_text()) or {}
    except OSError as e:
        raise ConfigError(f"cannot read params file {path}: {e}") from None
    except yaml.YAMLError as e:
        raise ConfigError(f"invalid YAML in {path}: {e}") from None
    if isinstance(data, Mapping) and "perf" in data:
        data = data["perf"]
    return PerfParams.from_dict(data, base)
