"""Application-layer granularity selection."""

from __future__ import annotations

import enum

from grainsched.errors import ConfigError
from grainsched.model import GranularityPlan, JobSpec, Profile


class GranularityPolicy(enum.Enum):
    SCALE = "scale"
    GRANULARITY = "granularity"
    NONE = "none"
    VOLCANO_NATIVE = "volcano-native"   # one process per container, every profile
    KUBEFLOW_SINGLE = "kubeflow"        # all processes in one worker container

    @classmethod
    def parse(cls, value) -> GranularityPolicy:
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ConfigError(f"unknown planner policy {value!r}; expected one of "
                              f"{[p.value for p in cls]}") from None


def select_granularity(job: JobSpec, max_nodes: int, policy: GranularityPolicy) -> GranularityPlan:
    """Pick (nodes, workers, groups) for ``job``.

    ``max_nodes`` is the number of worker nodes in the cluster.
    """
    if max_nodes < 1:
        raise ConfigError(f"max_nodes must be >= 1, got {max_nodes}")
    n_t = job.n_tasks
    network = job.profile is Profile.NETWORK

    if policy is GranularityPolicy.SCALE:
        if network:
            return GranularityPlan(1, 1, 1)
        n_n = min(max_nodes, n_t)
        return GranularityPlan(n_n, n_n, n_n)
    if policy is GranularityPolicy.GRANULARITY:
        if network:
            return GranularityPlan(1, 1, 1)
        n_n = min(max_nodes, n_t)
        return GranularityPlan(n_n, n_t, n_n)
    if policy is GranularityPolicy.VOLCANO_NATIVE:
        n_n = min(max_nodes, n_t)
        return GranularityPlan(n_n, n_t, n_n)
    if policy is GranularityPolicy.KUBEFLOW_SINGLE:
        return GranularityPlan(1, 1, 1)
    # no policy: keep the user's worker count
    return GranularityPlan(1, job.default_n_workers, 1)
