"""MPI-aware job controller: task distribution, per-worker resources, hostfile."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List

from grainsched.model import (ZERO, GranularityPlan, JobSpec, PodRole, PodSpec,
                              resource_scale)


@dataclass(frozen=True)
class PodSet:
    job_id: str
    launcher: PodSpec
    workers: tuple
    hostfile_text: str

    @property
    def pods(self) -> List[PodSpec]:
        return [*self.workers, self.launcher]


def allocate_tasks(n_tasks: int, n_workers: int) -> List[int]:
    """Deal ``n_tasks`` round-robin over ``n_workers``, starting at worker 0."""
    if n_tasks < 1 or n_workers < 1:
        raise ValueError("n_tasks and n_workers must be >= 1")
    base, extra = divmod(n_tasks, n_workers)
    return [base + (1 if i < extra else 0) for i in range(n_workers)]


def render_hostfile(workers) -> str:
    return "".join(f"{w.pod_id} slots={w.n_tasks_in_pod}\n" for w in workers)


def build_pod_set(job: JobSpec, plan: GranularityPlan) -> PodSet:
    counts = allocate_tasks(job.n_tasks, plan.n_workers)
    workers = []
    for i, n in enumerate(counts):
        if n == 0:
            continue
        workers.append(PodSpec(
            pod_id=PodSpec.worker_name(job.job_id, i),
            job_id=job.job_id,
            role=PodRole.WORKER,
            n_tasks_in_pod=n,
            resources=resource_scale(job.total_resources, n, job.n_tasks),
            worker_index=i,
        ))
    launcher = PodSpec(PodSpec.launcher_name(job.job_id), job.job_id, PodRole.LAUNCHER, 0, ZERO)
    return PodSet(job.job_id, launcher, tuple(workers), render_hostfile(workers))
