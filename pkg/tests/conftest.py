from fractions import Fraction

import pytest
from hypothesis import HealthCheck, settings

from grainsched.model import GiB, ClusterConfig, ClusterState, JobSpec, Profile, ResourceQuantity

settings.register_profile("default", deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def make_job(job_id="j", n_tasks=16, cpu=None, mem=None, profile=Profile.CPU, submit=0,
             runtime=100, bw=0, n_workers=1):
    cpu = 1000 * n_tasks if cpu is None else cpu
    mem = 2 * GiB * n_tasks if mem is None else mem
    return JobSpec(job_id, n_tasks, ResourceQuantity(cpu, mem), profile, Fraction(submit),
                   Fraction(runtime), Fraction(bw), default_n_workers=n_workers)


def make_cluster(nodes=4, bandwidth=40, **kw) -> ClusterState:
    return ClusterState.from_config(ClusterConfig(worker_nodes=nodes, **kw), Fraction(bandwidth))


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
