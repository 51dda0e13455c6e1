"""How one 16-process job is carved up under each granularity policy.

Prints the (nodes, workers, groups) plan, the per-worker resources and the
MPI hostfile the controller would hand to the launcher.
"""

from fractions import Fraction

from grainsched import GranularityPolicy, JobSpec, Profile, ResourceQuantity, select_granularity
from grainsched.controller import build_pod_set
from grainsched.model import GiB

stream = JobSpec("stream", 16, ResourceQuantity(16_000, 32 * GiB), Profile.MEMORY,
                 Fraction(0), Fraction(180), Fraction(4))
fft = JobSpec("fft", 16, ResourceQuantity(16_000, 32 * GiB), Profile.NETWORK,
              Fraction(0), Fraction(150))

for job in (stream, fft):
    print(f"== {job.job_id} ({job.profile.value})")
    for policy in GranularityPolicy:
        plan = select_granularity(job, max_nodes=4, policy=policy)
        pods = build_pod_set(job, plan)
        w = pods.workers[0]
        print(f"  {policy.value:<15} nodes={plan.n_nodes} workers={plan.n_workers} "
              f"groups={plan.n_groups}  first worker: {w.n_tasks_in_pod} tasks, "
              f"{w.resources.cpu_millicores}m CPU")

plan = select_granularity(stream, 4, GranularityPolicy.SCALE)
print("\nhostfile for stream under 'scale':")
print(build_pod_set(stream, plan).hostfile_text, end="")
