"""Gang admission, task-group placement and the least-requested baseline."""

from __future__ import annotations

import enum
import logging
import random
from collections import deque
from dataclasses import dataclass, field
from typing import Deque, Dict, Iterable, List, Mapping, Optional, Tuple

from grainsched.allocator import KubeletPolicy, admit_pod, release_pod
from grainsched.controller import PodSet
from grainsched.errors import ConfigError, InvariantError
from grainsched.model import (CONTROL_PLANE, ZERO, Binding, ClusterState, CpuAssignment,
                              GranularityPlan, JobSpec, NodeState, PodSpec, ResourceQuantity)

log = logging.getLogger(__name__)


class CpuPolicy(enum.Enum):
    SHARED_CPUS = "shared"
    STATIC_EXCLUSIVE = "static"

    @classmethod
    def for_kubelet(cls, kubelet: KubeletPolicy) -> CpuPolicy:
        return cls.STATIC_EXCLUSIVE if kubelet.exclusive else cls.SHARED_CPUS


class SchedulerMode(enum.Enum):
    BASELINE = "baseline"
    TASKGROUP = "taskgroup"

    @classmethod
    def parse(cls, value) -> SchedulerMode:
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ConfigError(f"unknown scheduler mode {value!r}; expected "
                              f"'baseline' or 'taskgroup'") from None


@dataclass
class TaskGroup:
    group_id: int
    job_id: str = ""
    members: List[str] = field(default_factory=list)
    total_request: ResourceQuantity = ZERO
    bound_nodes: List[str] = field(default_factory=list)

    @property
    def key(self) -> Tuple[str, int]:
        return (self.job_id, self.group_id)


@dataclass(frozen=True)
class SchedulingOutcome:
    bindings: Tuple[Binding, ...] = ()
    unschedulable: Optional[str] = None
    groups: Tuple[Tuple[str, int], ...] = ()   # (pod_id, group_id) for task-group pods

    @property
    def ok(self) -> bool:
        return self.unschedulable is None


@dataclass
class PendingJob:
    job: JobSpec
    plan: GranularityPlan
    pod_set: PodSet
    forced: Optional[Mapping[str, str]] = None   # replay: pod_id -> node_id


def build_groups(n_groups: int, workers: Iterable[PodSpec]) -> List[TaskGroup]:
    """Spread workers over ``n_groups`` groups, always feeding the lightest group."""
    if n_groups < 1:
        raise ValueError("n_groups must be >= 1")
    workers = sorted(workers, key=lambda w: w.worker_index)
    if not workers:
        raise ValueError("workers must be non-empty")
    groups = [TaskGroup(g, workers[0].job_id) for g in range(n_groups)]
    for w in workers:
        target = min(groups, key=lambda g: (g.total_request.cpu_millicores,
                                            g.total_request.memory_bytes, g.group_id))
        target.members.append(w.pod_id)
        target.total_request = target.total_request + w.resources
    return groups


def worker_order(groups: Iterable[TaskGroup]) -> List[str]:
    return [m for g in sorted(groups, key=lambda g: g.group_id) for m in g.members]


def _fits(resources: ResourceQuantity, free: ResourceQuantity, free_cpus: int,
          cpu_policy: CpuPolicy) -> bool:
    if not resources.fits_in(free):
        return False
    if cpu_policy is CpuPolicy.STATIC_EXCLUSIVE:
        k = resources.whole_cpus
        if k is None or k > free_cpus:
            return False
    return True


def predicate(pod: PodSpec, node: NodeState, cpu_policy: CpuPolicy) -> bool:
    return _fits(pod.resources, node.free, node.free_exclusive_count(), cpu_policy)


def node_score(worker: str, group: TaskGroup, node: NodeState,
               binding_state: Mapping[str, str], groups_on_node) -> int:
    bound_here = sum(1 for m in group.members if binding_state.get(m) == node.node_id)
    remaining = sum(1 for m in group.members if m not in binding_state)
    foreign = sum(1 for g in groups_on_node if g != group.key)
    return bound_here + remaining - foreign


class _Shadow:
    """Cluster free capacity plus this pass's tentative bindings."""

    def __init__(self, cluster: ClusterState):
        self.cluster = cluster
        self.free = {nid: n.free for nid, n in cluster.nodes.items()}
        self.cpus = {nid: n.free_exclusive_count() for nid, n in cluster.nodes.items()}

    def fits(self, pod: PodSpec, node_id: str, cpu_policy: CpuPolicy) -> bool:
        return _fits(pod.resources, self.free[node_id], self.cpus[node_id], cpu_policy)

    def take(self, pod: PodSpec, node_id: str, cpu_policy: CpuPolicy):
        self.free[node_id] = self.free[node_id] - pod.resources
        if cpu_policy is CpuPolicy.STATIC_EXCLUSIVE:
            self.cpus[node_id] -= pod.resources.whole_cpus or 0


def _unschedulable(pod: PodSpec) -> SchedulingOutcome:
    return SchedulingOutcome(unschedulable=f"no feasible node for {pod.pod_id} "
                                           f"(cpu={pod.resources.cpu_millicores}m, "
                                           f"mem={pod.resources.memory_bytes})")


def schedule_job_taskgroup(pod_set: PodSet, plan: GranularityPlan, cluster: ClusterState,
                           cpu_policy: CpuPolicy) -> SchedulingOutcome:
    groups = build_groups(min(plan.n_groups, len(pod_set.workers)), pod_set.workers)
    group_of = {m: g for g in groups for m in g.members}
    pods = {w.pod_id: w for w in pod_set.workers}
    shadow = _Shadow(cluster)
    tentative: Dict[str, str] = {}
    node_groups = {nid: cluster.groups_on_node(nid) for nid in cluster.nodes}
    bindings = []
    for pod_id in worker_order(groups):
        pod, group = pods[pod_id], group_of[pod_id]
        feasible = [nid for nid in cluster.worker_node_ids() if shadow.fits(pod, nid, cpu_policy)]
        if not feasible:
            return _unschedulable(pod)
        # max() keeps the first maximum, i.e. the smallest node_id on ties
        best = max(feasible, key=lambda nid: node_score(pod_id, group, cluster.nodes[nid],
                                                        tentative, node_groups[nid]))
        shadow.take(pod, best, cpu_policy)
        tentative[pod_id] = best
        group.bound_nodes.append(best)
        node_groups[best].add(group.key)
        bindings.append(Binding(pod_id, best))
    bindings.append(Binding(pod_set.launcher.pod_id, CONTROL_PLANE))
    return SchedulingOutcome(tuple(bindings),
                             groups=tuple((m, g.group_id) for g in groups for m in g.members))


def least_requested_score(free_after: ResourceQuantity, allocatable: ResourceQuantity) -> int:
    ac, am = allocatable.cpu_millicores, allocatable.memory_bytes
    return (1000 * (free_after.cpu_millicores * am + free_after.memory_bytes * ac)) // (2 * ac * am)


def schedule_job_baseline(pod_set: PodSet, cluster: ClusterState, cpu_policy: CpuPolicy,
                          rng: random.Random) -> SchedulingOutcome:
    shadow = _Shadow(cluster)
    bindings = []
    for pod in sorted(pod_set.workers, key=lambda w: w.worker_index):
        scored = []
        for nid in cluster.worker_node_ids():
            if shadow.fits(pod, nid, cpu_policy):
                after = shadow.free[nid] - pod.resources
                scored.append((least_requested_score(after, cluster.nodes[nid].allocatable), nid))
        if not scored:
            return _unschedulable(pod)
        top = max(s for s, _ in scored)
        tied = [nid for s, nid in scored if s == top]
        best = tied[0] if len(tied) == 1 else rng.choice(tied)
        shadow.take(pod, best, cpu_policy)
        bindings.append(Binding(pod.pod_id, best))
    bindings.append(Binding(pod_set.launcher.pod_id, CONTROL_PLANE))
    return SchedulingOutcome(tuple(bindings))


def schedule_job_forced(pod_set: PodSet, forced: Mapping[str, str], cluster: ClusterState,
                        cpu_policy: CpuPolicy) -> SchedulingOutcome:
    """Replay previously recorded worker placements, still all-or-nothing."""
    shadow = _Shadow(cluster)
    bindings = []
    for pod in sorted(pod_set.workers, key=lambda w: w.worker_index):
        nid = forced.get(pod.pod_id)
        if nid not in cluster.nodes:
            raise ConfigError(f"replay has no worker node for {pod.pod_id}")
        if not shadow.fits(pod, nid, cpu_policy):
            return SchedulingOutcome(unschedulable=f"replayed node {nid} full for {pod.pod_id}")
        shadow.take(pod, nid, cpu_policy)
        bindings.append(Binding(pod.pod_id, nid))
    bindings.append(Binding(pod_set.launcher.pod_id, CONTROL_PLANE))
    return SchedulingOutcome(tuple(bindings))


def commit(outcome: SchedulingOutcome, pod_set: PodSet, cluster: ClusterState,
           kubelet: KubeletPolicy) -> Dict[str, Tuple[str, CpuAssignment]]:
    """Apply a successful outcome: record bindings and admit every pod on its node."""
    if not outcome.ok:
        raise InvariantError(f"cannot commit unschedulable outcome for {pod_set.job_id}")
    pods = {p.pod_id: p for p in pod_set.pods}
    if {b.pod_id for b in outcome.bindings} != set(pods):
        raise InvariantError(f"outcome for {pod_set.job_id} does not cover every pod")
    groups = dict(outcome.groups)
    placed = {}
    for b in outcome.bindings:
        node = cluster.node(b.node_id)
        group = (pod_set.job_id, groups[b.pod_id]) if b.pod_id in groups else None
        placed[b.pod_id] = (b.node_id, admit_pod(pods[b.pod_id], node, kubelet))
        cluster.record_binding(b.pod_id, b.node_id, group)
    return placed


def release_job(pod_set: PodSet, cluster: ClusterState) -> None:
    for pod in pod_set.pods:
        b = cluster.drop_binding(pod.pod_id)
        release_pod(pod.pod_id, cluster.node(b.node_id))


def gang_admit(pending: Deque[PendingJob], cluster: ClusterState, mode: SchedulerMode,
               kubelet: KubeletPolicy, rng: random.Random) -> List[Tuple[str, SchedulingOutcome]]:
    """Admit jobs from the head of ``pending`` until one does not fit.

    Admitted jobs are popped and committed. The returned list holds every
    admitted job followed, if the queue is not empty, by the blocked head.
    """
    cpu_policy = CpuPolicy.for_kubelet(kubelet)
    results = []
    while pending:
        head = pending[0]
        if head.forced is not None:
            outcome = schedule_job_forced(head.pod_set, head.forced, cluster, cpu_policy)
        elif mode is SchedulerMode.TASKGROUP:
            outcome = schedule_job_taskgroup(head.pod_set, head.plan, cluster, cpu_policy)
        else:
            outcome = schedule_job_baseline(head.pod_set, cluster, cpu_policy, rng)
        results.append((head.job.job_id, outcome))
        if not outcome.ok:
            log.debug("head %s blocked: %s", head.job.job_id, outcome.unschedulable)
            break
        commit(outcome, head.pod_set, cluster, kubelet)
        pending.popleft()
    return results


def new_queue(items: Iterable[PendingJob] = ()) -> Deque[PendingJob]:
    return deque(sorted(items, key=lambda p: (p.job.submit_time_s, p.job.job_id)))
