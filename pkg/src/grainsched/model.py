"""Domain types shared by the planner, controller, scheduler, allocator and simulator.

CPU is tracked in millicores and memory in bytes so every resource sum stays
an exact integer.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, FrozenSet, List, Optional, Tuple

from grainsched.errors import ConfigError, InvariantError

GiB = 1024 ** 3
MILLI = 1000


@dataclass(frozen=True, order=True)
class ResourceQuantity:
    cpu_millicores: int = 0
    memory_bytes: int = 0

    def __post_init__(self):
        if self.cpu_millicores < 0 or self.memory_bytes < 0:
            raise InvariantError(f"negative resource quantity {self}")

    def __add__(self, other: ResourceQuantity) -> ResourceQuantity:
        return ResourceQuantity(self.cpu_millicores + other.cpu_millicores,
                                self.memory_bytes + other.memory_bytes)

    def __sub__(self, other: ResourceQuantity) -> ResourceQuantity:
        cpu = self.cpu_millicores - other.cpu_millicores
        mem = self.memory_bytes - other.memory_bytes
        if cpu < 0 or mem < 0:
            raise InvariantError(f"resource subtraction below zero: {self} - {other}")
        return ResourceQuantity(cpu, mem)

    def scale(self, factor: int) -> ResourceQuantity:
        if factor < 0:
            raise InvariantError(f"negative scale factor {factor}")
        return ResourceQuantity(self.cpu_millicores * factor, self.memory_bytes * factor)

    def fits_in(self, other: ResourceQuantity) -> bool:
        """Componentwise ``self <= other``."""
        return (self.cpu_millicores <= other.cpu_millicores
                and self.memory_bytes <= other.memory_bytes)

    @property
    def whole_cpus(self) -> Optional[int]:
        """Whole CPU count, or None when the request is fractional."""
        q, r = divmod(self.cpu_millicores, MILLI)
        return None if r else q


ZERO = ResourceQuantity(0, 0)


def resource_scale(r: ResourceQuantity, n_tasks_in_pod: int, n_total_tasks: int) -> ResourceQuantity:
    """Share of ``r`` owned by ``n_tasks_in_pod`` out of ``n_total_tasks`` tasks."""
    if n_total_tasks < 1:
        raise ConfigError(f"n_total_tasks must be >= 1, got {n_total_tasks}")
    if not 0 <= n_tasks_in_pod <= n_total_tasks:
        raise ConfigError(f"n_tasks_in_pod={n_tasks_in_pod} outside [0, {n_total_tasks}]")
    if r.cpu_millicores % n_total_tasks:
        raise ConfigError(f"cpu_millicores={r.cpu_millicores} not divisible by n_tasks={n_total_tasks}")
    if r.memory_bytes % n_total_tasks:
        raise ConfigError(f"memory_bytes={r.memory_bytes} not divisible by n_tasks={n_total_tasks}")
    return ResourceQuantity(r.cpu_millicores // n_total_tasks * n_tasks_in_pod,
                            r.memory_bytes // n_total_tasks * n_tasks_in_pod)


class Profile(enum.Enum):
    NETWORK = "network"
    CPU = "cpu"
    MEMORY = "memory"
    CPU_MEMORY = "cpu-memory"

    @classmethod
    def parse(cls, value) -> Profile:
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ConfigError(f"unknown profile {value!r}; expected one of "
                              f"{[p.value for p in cls]}") from None


@dataclass(frozen=True)
class JobSpec:
    job_id: str
    n_tasks: int
    total_resources: ResourceQuantity
    profile: Profile
    submit_time_s: Fraction
    base_runtime_s: Fraction
    per_process_bandwidth_gbps: Fraction = Fraction(0)
    default_n_workers: int = 1
    benchmark: str = ""

    def __post_init__(self):
        if not self.job_id:
            raise ConfigError("job_id must be non-empty")
        if self.n_tasks < 1:
            raise ConfigError(f"{self.job_id}: n_tasks must be >= 1")
        if self.default_n_workers < 1:
            raise ConfigError(f"{self.job_id}: default_n_workers must be >= 1")
        if self.submit_time_s < 0:
            raise ConfigError(f"{self.job_id}: submit_time_s must be >= 0")
        if self.base_runtime_s <= 0:
            raise ConfigError(f"{self.job_id}: base_runtime_s must be > 0")
        if self.per_process_bandwidth_gbps < 0:
            raise ConfigError(f"{self.job_id}: per_process_bandwidth_gbps must be >= 0")
        if self.total_resources.cpu_millicores % self.n_tasks:
            raise ConfigError(f"{self.job_id}: total_resources.cpu_millicores "
                              f"not divisible by n_tasks={self.n_tasks}")
        if self.total_resources.memory_bytes % self.n_tasks:
            raise ConfigError(f"{self.job_id}: total_resources.memory_bytes "
                              f"not divisible by n_tasks={self.n_tasks}")
        if not self.benchmark:
            object.__setattr__(self, "benchmark", self.job_id)


@dataclass(frozen=True)
class GranularityPlan:
    n_nodes: int
    n_workers: int
    n_groups: int

    def __post_init__(self):
        if min(self.n_nodes, self.n_workers, self.n_groups) < 1:
            raise InvariantError(f"granularity values must be >= 1: {self}")
        if self.n_groups > self.n_workers:
            raise InvariantError(f"n_groups > n_workers: {self}")


class PodRole(enum.Enum):
    LAUNCHER = "launcher"
    WORKER = "worker"


@dataclass(frozen=True)
class PodSpec:
    pod_id: str
    job_id: str
    role: PodRole
    n_tasks_in_pod: int
    resources: ResourceQuantity
    worker_index: Optional[int] = None

    @staticmethod
    def worker_name(job_id: str, i: int) -> str:
        return f"{job_id}-worker-{i}"

    @staticmethod
    def launcher_name(job_id: str) -> str:
        return f"{job_id}-launcher"


class CpuMode(enum.Enum):
    SHARED = "shared"
    EXCLUSIVE = "exclusive"


@dataclass(frozen=True)
class CpuAssignment:
    mode: CpuMode
    cpu_ids: FrozenSet[int] = frozenset()
    domain_spread: Tuple[Tuple[int, int], ...] = ()   # sorted (domain_id, count)

    def __post_init__(self):
        if self.mode is CpuMode.SHARED and (self.cpu_ids or self.domain_spread):
            raise InvariantError("shared assignment cannot carry CPU ids")
        if sum(c for _, c in self.domain_spread) != len(self.cpu_ids):
            raise InvariantError("domain_spread does not match cpu_ids")

    @property
    def spread(self) -> Dict[int, int]:
        return dict(self.domain_spread)

    def render(self) -> str:
        if self.mode is CpuMode.SHARED:
            return "shared"
        ids = ",".join(str(c) for c in sorted(self.cpu_ids))
        spread = ",".join(f"{d}:{n}" for d, n in self.domain_spread)
        return f"exclusive cpus={ids} numa={spread}"


@dataclass
class NumaDomain:
    domain_id: int
    allocatable_cpus: Tuple[int, ...]
    free_exclusive_cpus: set
    bandwidth_capacity_gbps: Fraction

    def __post_init__(self):
        if not self.free_exclusive_cpus <= set(self.allocatable_cpus):
            raise InvariantError(f"domain {self.domain_id}: free CPUs not a subset of allocatable")
        if self.bandwidth_capacity_gbps <= 0:
            raise ConfigError("domain bandwidth capacity must be > 0")


@dataclass
class NodeState:
    node_id: str
    domains: List[NumaDomain]
    allocatable: ResourceQuantity
    allocated: ResourceQuantity = ZERO
    # pod_id -> (requested resources, assignment)
    bindings: Dict[str, Tuple[ResourceQuantity, CpuAssignment]] = field(default_factory=dict)

    @property
    def free(self) -> ResourceQuantity:
        return self.allocatable - self.allocated

    def free_exclusive_count(self) -> int:
        return sum(len(d.free_exclusive_cpus) for d in self.domains)

    def domain(self, domain_id: int) -> NumaDomain:
        for d in self.domains:
            if d.domain_id == domain_id:
                return d
        raise InvariantError(f"{self.node_id}: no NUMA domain {domain_id}")


@dataclass(frozen=True)
class Binding:
    pod_id: str
    node_id: str


@dataclass(frozen=True)
class ClusterConfig:
    """Homogeneous worker nodes plus one control-plane node for launchers."""
    worker_nodes: int = 4
    sockets: int = 2
    cores_per_socket: int = 18
    reserved_per_socket: int = 2
    memory_gib: int = 256
    domain_bandwidth_gbps: Optional[Fraction] = None

    def __post_init__(self):
        if self.worker_nodes < 1 or self.sockets < 1:
            raise ConfigError("cluster needs at least one worker node and one socket")
        if not 0 <= self.reserved_per_socket < self.cores_per_socket:
            raise ConfigError("reserved_per_socket must be in [0, cores_per_socket)")
        if self.memory_gib < 1:
            raise ConfigError("memory_gib must be >= 1")

    @property
    def allocatable_cpus_per_node(self) -> int:
        return self.sockets * (self.cores_per_socket - self.reserved_per_socket)

    def node_ids(self) -> List[str]:
        width = len(str(self.worker_nodes))
        return [f"node-{i:0{width}d}" for i in range(1, self.worker_nodes + 1)]


CONTROL_PLANE = "control-plane"


def build_node(node_id: str, config: ClusterConfig, bandwidth: Fraction) -> NodeState:
    domains = []
    for s in range(config.sockets):
        first = s * config.cores_per_socket
        # reserved system cores are the lowest ids of each socket
        cpus = tuple(range(first + config.reserved_per_socket, first + config.cores_per_socket))
        domains.append(NumaDomain(s, cpus, set(cpus), Fraction(bandwidth)))
    allocatable = ResourceQuantity(config.allocatable_cpus_per_node * MILLI, config.memory_gib * GiB)
    return NodeState(node_id, domains, allocatable)


@dataclass
class ClusterState:
    nodes: Dict[str, NodeState]
    control_plane: NodeState
    bindings: Dict[str, Binding] = field(default_factory=dict)
    # node_id -> {(job_id, group_id): bound worker count}
    node_groups: Dict[str, Dict[Tuple[str, int], int]] = field(default_factory=dict)
    pod_groups: Dict[str, Tuple[str, int]] = field(default_factory=dict)

    @classmethod
    def from_config(cls, config: ClusterConfig, bandwidth: Fraction) -> ClusterState:
        if config.domain_bandwidth_gbps is not None:
            bandwidth = config.domain_bandwidth_gbps
        nodes = {nid: build_node(nid, config, bandwidth) for nid in config.node_ids()}
        cp = build_node(CONTROL_PLANE, config, bandwidth)
        return cls(nodes, cp, node_groups={nid: {} for nid in nodes})

    def node(self, node_id: str) -> NodeState:
        if node_id == CONTROL_PLANE:
            return self.control_plane
        try:
            return self.nodes[node_id]
        except KeyError:
            raise InvariantError(f"unknown node {node_id}") from None

    def worker_node_ids(self) -> List[str]:
        return sorted(self.nodes)

    def groups_on_node(self, node_id: str) -> set:
        return {g for g, n in self.node_groups.get(node_id, {}).items() if n > 0}

    def record_binding(self, pod_id: str, node_id: str, group: Optional[Tuple[str, int]] = None):
        if pod_id in self.bindings:
            raise InvariantError(f"pod {pod_id} already bound to {self.bindings[pod_id].node_id}")
        self.node(node_id)
        self.bindings[pod_id] = Binding(pod_id, node_id)
        if group is not None:
            self.pod_groups[pod_id] = group
            counts = self.node_groups.setdefault(node_id, {})
            counts[group] = counts.get(group, 0) + 1

    def drop_binding(self, pod_id: str) -> Binding:
        try:
            b = self.bindings.pop(pod_id)
        except KeyError:
            raise InvariantError(f"pod {pod_id} is not bound") from None
        group = self.pod_groups.pop(pod_id, None)
        if group is not None:
            counts = self.node_groups[b.node_id]
            counts[group] -= 1
            if counts[group] == 0:
                del counts[group]
        return b
