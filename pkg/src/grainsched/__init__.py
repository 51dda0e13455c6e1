"""Fine-grained scheduling of containerized MPI jobs: planner, MPI-aware
controller, task-group gang scheduler, kubelet CPU/NUMA emulation and a
deterministic cluster simulator."""

from grainsched.allocator import KubeletPolicy, admit_pod, release_pod
from grainsched.controller import PodSet, allocate_tasks, build_pod_set
from grainsched.engine import SimReport, compute_metrics, run
from grainsched.experiments import (CompareTable, calibrate, compare, load_space, load_targets,
                                    matrix)
from grainsched.errors import ConfigError, GrainschedError, InvariantError
from grainsched.model import (ClusterConfig, ClusterState, GranularityPlan, JobSpec, Profile,
                              ResourceQuantity, resource_scale)
from grainsched.perf import PerfParams, job_slowdown
from grainsched.planner import GranularityPolicy, select_granularity
from grainsched.scheduler import (SchedulerMode, build_groups, gang_admit, node_score,
                                  predicate, schedule_job_baseline, schedule_job_taskgroup,
                                  worker_order)
from grainsched.workload import (ScenarioSpec, calibrated_perf, generate, load_perf,
                                 load_scenario, preset)

__version__ = "0.1.0"
