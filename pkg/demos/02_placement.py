"""Where the workers of two overlapping jobs land: task groups vs. least-requested.

Two fine-grained DGEMM jobs arrive back to back on an empty four-node
cluster. On an empty cluster both schedulers end up with four workers per
node, but only the task-group scheduler places whole groups (one group of
each job per node) and records them, which is what later scoring uses.
"""

import random
from collections import Counter
from fractions import Fraction

from grainsched import ClusterConfig, ClusterState, GranularityPolicy, select_granularity
from grainsched.allocator import AFFINITY_KUBELET
from grainsched.controller import build_pod_set
from grainsched.model import GiB, JobSpec, Profile, ResourceQuantity
from grainsched.scheduler import PendingJob, SchedulerMode, gang_admit, new_queue

jobs = [JobSpec(f"dgemm-{k}", 16, ResourceQuantity(16_000, 32 * GiB), Profile.CPU,
                Fraction(k), Fraction(240)) for k in (1, 2)]

for mode in SchedulerMode:
    cluster = ClusterState.from_config(ClusterConfig(), Fraction(40))
    pending = []
    for job in jobs:
        plan = select_granularity(job, 4, GranularityPolicy.GRANULARITY)
        pending.append(PendingJob(job, plan, build_pod_set(job, plan)))
    gang_admit(new_queue(pending), cluster, mode, AFFINITY_KUBELET, random.Random(1))
    print(f"== {mode.value}")
    for job in jobs:
        nodes = Counter(b.node_id for pid, b in cluster.bindings.items()
                        if pid.startswith(job.job_id + "-worker"))
        print(f"  {job.job_id}: " + ", ".join(f"{n}x{c}" for n, c in sorted(nodes.items())))
    for nid in cluster.worker_node_ids():
        print(f"  {nid} groups={sorted(cluster.groups_on_node(nid))} "
              f"free cpus={cluster.nodes[nid].free_exclusive_count()}")
