"""Parametric slowdown model for MPI jobs sharing a cluster.

A job's slowdown is the product of four factors:

* network span: ``1 + alpha * (nodes_spanned - 1)``
* CPU migration: ``1 + beta * max_i (ppc_i - 1) / ppc_i`` for pinned workers,
  ``1 + beta`` for shared ones (ppc = processes per container)
* memory bandwidth: worst ``demand / capacity`` over the NUMA domains the job
  draws bandwidth from, floored at 1
* remote access: ``1 + rho`` when any worker is unpinned or straddles domains

Everything is exact rational arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from fractions import Fraction
from typing import Dict, Iterable, Mapping, NamedTuple, Tuple

from grainsched.errors import ConfigError
from grainsched.model import CpuAssignment, CpuMode, JobSpec, Profile

DomainKey = Tuple[str, int]   # (node_id, domain_id)
ONE = Fraction(1)


def to_fraction(value, name="value") -> Fraction:
    """Parse a config number as an exact decimal (``0.1`` -> ``1/10``)."""
    if isinstance(value, bool):
        raise ConfigError(f"{name}: expected a number, got {value!r}")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    try:
        return Fraction(str(value))
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"{name}: expected a number, got {value!r}") from None


def render_fraction(x: Fraction):
    """Inverse of ``to_fraction``: int, float when that round-trips exactly, else ``"p/q"``."""
    if x.denominator == 1:
        return int(x)
    f = float(x)
    if Fraction(repr(f)) == x:
        return f
    return f"{x.numerator}/{x.denominator}"


def _profile_map(defaults: Mapping[str, str]) -> Dict[Profile, Fraction]:
    return {p: Fraction(defaults.get(p.value, "0")) for p in Profile}


@dataclass(frozen=True)
class PerfParams:
    alpha_net_network: Fraction = Fraction("12.0")
    alpha_net_other: Fraction = Fraction("0.02")
    beta_mig: Dict[Profile, Fraction] = field(default_factory=lambda: _profile_map(
        {"cpu": "0.25", "memory": "0.10", "cpu-memory": "0.15", "network": "0.05"}))
    rho_remote: Dict[Profile, Fraction] = field(default_factory=lambda: _profile_map(
        {"memory": "0.15", "cpu-memory": "0.10"}))
    domain_bandwidth_gbps: Fraction = Fraction(40)
    # multiplies every catalog benchmark's base runtime when a workload is resolved
    runtime_scale: Fraction = Fraction(1)

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            values = v.values() if isinstance(v, dict) else [v]
            if any(x < 0 for x in values):
                raise ConfigError(f"perf.{f.name} must be >= 0")
        if self.domain_bandwidth_gbps <= 0:
            raise ConfigError("perf.domain_bandwidth_gbps must be > 0")
        if self.runtime_scale <= 0:
            raise ConfigError("perf.runtime_scale must be > 0")

    def alpha_net(self, profile: Profile) -> Fraction:
        return self.alpha_net_network if profile is Profile.NETWORK else self.alpha_net_other

    @classmethod
    def from_dict(cls, data: Mapping | None, base: PerfParams | None = None) -> PerfParams:
        """Overlay ``data`` (the ``perf`` config section) on ``base`` or the defaults."""
        base = base or cls()
        if not data:
            return base
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown perf parameters: {sorted(unknown)}")
        updates = {}
        for name, value in data.items():
            if name in ("beta_mig", "rho_remote"):
                if not isinstance(value, Mapping):
                    raise ConfigError(f"perf.{name} must map profile -> value")
                merged = dict(getattr(base, name))
                for k, v in value.items():
                    merged[Profile.parse(k)] = to_fraction(v, f"perf.{name}.{k}")
                updates[name] = merged
            else:
                updates[name] = to_fraction(value, f"perf.{name}")
        return replace(base, **updates)

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, dict):
                out[f.name] = {p.value: render_fraction(v[p]) for p in Profile}
            else:
                out[f.name] = render_fraction(v)
        return out


@dataclass(frozen=True)
class SlowdownBreakdown:
    s_net: Fraction
    s_cpu: Fraction
    s_mem: Fraction
    s_remote: Fraction

    @property
    def total(self) -> Fraction:
        return self.s_net * self.s_cpu * self.s_mem * self.s_remote

    def render(self) -> str:
        return (f"total={self.total} net={self.s_net} cpu={self.s_cpu} "
                f"mem={self.s_mem} remote={self.s_remote}")


class WorkerPlacement(NamedTuple):
    node_id: str
    assignment: CpuAssignment
    n_tasks: int


@dataclass
class DomainLoad:
    """Memory-bandwidth demand and capacity per NUMA domain."""
    demand: Dict[DomainKey, Fraction] = field(default_factory=dict)
    capacity: Dict[DomainKey, Fraction] = field(default_factory=dict)
    node_domains: Dict[str, Tuple[int, ...]] = field(default_factory=dict)

    @classmethod
    def for_cluster(cls, cluster) -> DomainLoad:
        load = cls()
        for node in [*cluster.nodes.values(), cluster.control_plane]:
            load.node_domains[node.node_id] = tuple(d.domain_id for d in node.domains)
            for d in node.domains:
                load.capacity[(node.node_id, d.domain_id)] = d.bandwidth_capacity_gbps
        return load

    def add(self, contribution: Mapping[DomainKey, Fraction], sign: int = 1):
        for k, v in contribution.items():
            self.demand[k] = self.demand.get(k, Fraction(0)) + sign * v
            if self.demand[k] == 0:
                del self.demand[k]


def demand_contribution(job: JobSpec, placement: Iterable[WorkerPlacement],
                        node_domains: Mapping[str, Tuple[int, ...]]) -> Dict[DomainKey, Fraction]:
    """Bandwidth this job draws from each domain.

    Pinned workers spread their tasks in proportion to the CPUs held in each
    domain; unpinned workers spread evenly over all of the node's domains.
    """
    bw = job.per_process_bandwidth_gbps
    out: Dict[DomainKey, Fraction] = {}
    if bw == 0:
        return out
    for w in placement:
        if w.n_tasks == 0:
            continue
        if w.assignment.mode is CpuMode.SHARED:
            doms = node_domains[w.node_id]
            share = Fraction(w.n_tasks, len(doms)) * bw
            for d in doms:
                out[(w.node_id, d)] = out.get((w.node_id, d), Fraction(0)) + share
        else:
            k = len(w.assignment.cpu_ids)
            for d, n in w.assignment.domain_spread:
                key = (w.node_id, d)
                out[key] = out.get(key, Fraction(0)) + Fraction(w.n_tasks * n, k) * bw
    return out


def placement_factors(job: JobSpec, placement, params: PerfParams) -> Tuple[Fraction, Fraction, Fraction]:
    """(s_net, s_cpu, s_remote): the factors that depend only on the job's own placement."""
    placement = [w for w in placement if w.n_tasks > 0]
    nodes = {w.node_id for w in placement}
    s_net = 1 + params.alpha_net(job.profile) * (len(nodes) - 1)

    worst = Fraction(0)
    remote = False
    for w in placement:
        if w.assignment.mode is CpuMode.SHARED:
            worst = ONE
            remote = True
        else:
            worst = max(worst, Fraction(w.n_tasks - 1, w.n_tasks))
            if len(w.assignment.domain_spread) > 1:
                remote = True
    s_cpu = 1 + params.beta_mig[job.profile] * worst
    s_remote = 1 + params.rho_remote[job.profile] if remote else ONE
    return s_net, s_cpu, s_remote


def memory_factor(touched: Iterable[DomainKey], load: DomainLoad) -> Fraction:
    s = ONE
    for key in touched:
        ratio = load.demand.get(key, 0) / load.capacity[key]
        if ratio > s:
            s = ratio
    return s


def job_slowdown(job: JobSpec, placement, cluster_load: DomainLoad,
                 params: PerfParams) -> SlowdownBreakdown:
    """Slowdown of ``job`` given its placement and the total demand per domain.

    ``cluster_load.demand`` must already include this job's own contribution.
    A job with zero bandwidth demand is not bandwidth-bound and gets s_mem = 1.
    """
    placement = list(placement)
    total_tasks = sum(w.n_tasks for w in placement)
    if total_tasks != job.n_tasks:
        raise ConfigError(f"{job.job_id}: placement covers {total_tasks} of {job.n_tasks} tasks")
    s_net, s_cpu, s_remote = placement_factors(job, placement, params)
    own = demand_contribution(job, placement, cluster_load.node_domains)
    s_mem = memory_factor(own, cluster_load)
    return SlowdownBreakdown(s_net, s_cpu, s_mem, s_remote)
