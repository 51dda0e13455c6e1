"""Node-level CPU assignment, emulating the kubelet CPU and topology managers."""

from __future__ import annotations

import enum
from dataclasses import dataclass

from grainsched.errors import ConfigError, InvariantError
from grainsched.model import CpuAssignment, CpuMode, NodeState, PodSpec


class CpuManager(enum.Enum):
    NONE = "none"
    STATIC = "static"


class TopologyManager(enum.Enum):
    NONE = "none"
    BEST_EFFORT = "best-effort"


@dataclass(frozen=True)
class KubeletPolicy:
    cpu_manager: CpuManager = CpuManager.NONE
    topology_manager: TopologyManager = TopologyManager.NONE

    @classmethod
    def parse(cls, data) -> KubeletPolicy:
        if isinstance(data, cls):
            return data
        if not isinstance(data, dict):
            raise ConfigError(f"kubelet must be a mapping, got {data!r}")
        try:
            cpu = CpuManager(str(data.get("cpu_manager", "none")))
            topo = TopologyManager(str(data.get("topology_manager", "none")))
        except ValueError as e:
            raise ConfigError(f"bad kubelet policy: {e}") from None
        return cls(cpu, topo)

    def to_dict(self) -> dict:
        return {"cpu_manager": self.cpu_manager.value, "topology_manager": self.topology_manager.value}

    @property
    def exclusive(self) -> bool:
        return self.cpu_manager is CpuManager.STATIC


DEFAULT_KUBELET = KubeletPolicy()
AFFINITY_KUBELET = KubeletPolicy(CpuManager.STATIC, TopologyManager.BEST_EFFORT)


def _take(domain, n):
    ids = sorted(domain.free_exclusive_cpus)[:n]
    domain.free_exclusive_cpus.difference_update(ids)
    return ids


def admit_pod(pod: PodSpec, node: NodeState, policy: KubeletPolicy) -> CpuAssignment:
    """Reserve ``pod``'s resources on ``node`` and return its CPU assignment.

    The scheduler is expected to have checked capacity already; running out
    here raises InvariantError.
    """
    if pod.pod_id in node.bindings:
        raise InvariantError(f"{pod.pod_id} already admitted on {node.node_id}")
    if not pod.resources.fits_in(node.free):
        raise InvariantError(f"{pod.pod_id} does not fit on {node.node_id}")

    k = pod.resources.whole_cpus
    if policy.cpu_manager is CpuManager.NONE or k == 0:
        assignment = CpuAssignment(CpuMode.SHARED)
    else:
        if k is None:
            raise InvariantError(f"{pod.pod_id}: fractional CPU request under static policy")
        if node.free_exclusive_count() < k:
            raise InvariantError(f"{pod.pod_id}: {k} exclusive CPUs unavailable on {node.node_id}")
        taken = {}
        if policy.topology_manager is TopologyManager.BEST_EFFORT:
            fitting = [d for d in node.domains if len(d.free_exclusive_cpus) >= k]
            if fitting:
                best = min(fitting, key=lambda d: (-len(d.free_exclusive_cpus), d.domain_id))
                taken[best.domain_id] = _take(best, k)
            else:
                left = k
                while left:
                    d = min((d for d in node.domains if d.free_exclusive_cpus),
                            key=lambda d: (-len(d.free_exclusive_cpus), d.domain_id))
                    got = _take(d, min(left, len(d.free_exclusive_cpus)))
                    taken.setdefault(d.domain_id, []).extend(got)
                    left -= len(got)
        else:
            owner = {c: d for d in node.domains for c in d.free_exclusive_cpus}
            for c in sorted(owner)[:k]:
                owner[c].free_exclusive_cpus.discard(c)
                taken.setdefault(owner[c].domain_id, []).append(c)
        assignment = CpuAssignment(
            CpuMode.EXCLUSIVE,
            frozenset(c for ids in taken.values() for c in ids),
            tuple(sorted((d, len(ids)) for d, ids in taken.items())),
        )

    node.allocated = node.allocated + pod.resources
    node.bindings[pod.pod_id] = (pod.resources, assignment)
    return assignment


def release_pod(pod_id: str, node: NodeState) -> None:
    try:
        resources, assignment = node.bindings.pop(pod_id)
    except KeyError:
        raise InvariantError(f"{pod_id} is not admitted on {node.node_id}") from None
    for c in assignment.cpu_ids:
        for d in node.domains:
            if c in d.allocatable_cpus:
                if c in d.free_exclusive_cpus:
                    raise InvariantError(f"cpu {c} on {node.node_id} released twice")
                d.free_exclusive_cpus.add(c)
                break
        else:
            raise InvariantError(f"cpu {c} does not belong to {node.node_id}")
    node.allocated = node.allocated - resources
