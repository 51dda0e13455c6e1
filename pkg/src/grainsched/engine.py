"""Deterministic discrete-event simulation of arrivals, gang admission and execution.

Time is an exact ``Fraction``. Job progress is piecewise constant: every
event recomputes all running jobs' slowdowns, and a job whose slowdown
changed gets its completion rescheduled. Work is measured in base-runtime seconds, so a job running at
slowdown ``s`` for ``dt`` seconds completes ``dt / s`` of it.
"""

from __future__ import annotations

import csv
import functools
import heapq
import io
import json
import logging
import random
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterable, List, Mapping, NamedTuple, Optional, Tuple

from grainsched.controller import PodSet, build_pod_set
from grainsched.errors import ConfigError, InvariantError
from grainsched.model import ClusterState, JobSpec, PodRole
from grainsched.perf import (DomainLoad, WorkerPlacement, demand_contribution, memory_factor,
                             placement_factors)
from grainsched.planner import select_granularity
from grainsched.scheduler import PendingJob, gang_admit, new_queue, release_job
from grainsched.workload import ScenarioSpec, generate

log = logging.getLogger(__name__)

COMPLETION, ARRIVAL = 0, 1   # completion sorts first at equal times


class SimEvent(NamedTuple):
    """Heap entry; ``sequence`` is unique so ordering never reaches ``job_id``."""
    time_s: Fraction
    kind: int
    sequence: int
    job_id: str
    version: int = 0


def fmt_seconds(x: Fraction, places: int = 6) -> str:
    q = round(x * 10 ** places)
    sign = "-" if q < 0 else ""
    whole, frac = divmod(abs(q), 10 ** places)
    return f"{sign}{whole}.{frac:0{places}d}"


def _num(x: Fraction) -> float:
    return float(round(x, 6))


@dataclass(frozen=True)
class TraceEntry:
    t: Fraction
    event: str
    job: str = "-"
    pod: str = "-"
    node: str = "-"
    detail: str = "-"

    def render(self) -> str:
        return (f"t={fmt_seconds(self.t)} event={self.event} job={self.job} "
                f"pod={self.pod} node={self.node} detail={self.detail}")


@dataclass
class JobRecord:
    job_id: str
    benchmark: str
    profile: str
    submit_time_s: Fraction
    start_time_s: Optional[Fraction] = None
    finish_time_s: Optional[Fraction] = None
    # (start, end, slowdown) execution intervals
    intervals: List[Tuple[Fraction, Fraction, Fraction]] = field(default_factory=list)
    # pod_id -> (node_id, rendered cpu assignment)
    placement: Dict[str, Tuple[str, str]] = field(default_factory=dict)

    @property
    def complete(self) -> bool:
        return self.start_time_s is not None and self.finish_time_s is not None

    @property
    def wait_s(self) -> Fraction:
        return self.start_time_s - self.submit_time_s

    @property
    def run_s(self) -> Fraction:
        return self.finish_time_s - self.start_time_s

    @property
    def response_s(self) -> Fraction:
        return self.wait_s + self.run_s


def compute_metrics(records: Iterable[JobRecord]) -> Tuple[Fraction, Fraction]:
    """(overall response time, makespan) of a finished run."""
    records = list(records)
    if not records:
        raise ValueError("no job records")
    for r in records:
        if not r.complete:
            raise ValueError(f"job {r.job_id} has not finished")
    overall = sum((r.response_s for r in records), Fraction(0))
    makespan = max(r.finish_time_s for r in records) - min(r.submit_time_s for r in records)
    return overall, makespan


@dataclass
class SimReport:
    scenario_name: str
    seed: Optional[int]
    records: List[JobRecord]
    overall_response_s: Fraction
    makespan_s: Fraction
    event_trace: List[TraceEntry]

    def placements(self) -> Dict[str, Dict[str, str]]:
        """job_id -> {worker pod_id: node_id}, the input of binding replay."""
        return {r.job_id: {p: n for p, (n, _) in r.placement.items() if "-worker-" in p}
                for r in self.records}

    def run_times(self, benchmark: Optional[str] = None) -> List[Fraction]:
        return [r.run_s for r in self.records if benchmark in (None, r.benchmark)]

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario_name,
            "seed": self.seed,
            "metrics": {
                "overall_response_s": _num(self.overall_response_s),
                "makespan_s": _num(self.makespan_s),
                "jobs": len(self.records),
            },
            "jobs": [{
                "job_id": r.job_id,
                "benchmark": r.benchmark,
                "profile": r.profile,
                "submit_s": _num(r.submit_time_s),
                "start_s": _num(r.start_time_s),
                "finish_s": _num(r.finish_time_s),
                "wait_s": _num(r.wait_s),
                "run_s": _num(r.run_s),
                "response_s": _num(r.response_s),
                "pods": [{"pod": p, "node": n, "cpus": a} for p, (n, a) in r.placement.items()],
            } for r in self.records],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["job_id", "benchmark", "profile", "submit_s", "start_s", "finish_s",
                    "wait_s", "run_s", "response_s"])
        for r in self.records:
            w.writerow([r.job_id, r.benchmark, r.profile] + [fmt_seconds(x) for x in (
                r.submit_time_s, r.start_time_s, r.finish_time_s, r.wait_s, r.run_s, r.response_s)])
        return buf.getvalue()

    def trace_text(self) -> str:
        return "".join(e.render() + "\n" for e in self.event_trace)

    def gantt_rows(self) -> List[Tuple[str, str, str, Fraction, Fraction]]:
        return [(r.job_id, p, n, r.start_time_s, r.finish_time_s)
                for r in self.records for p, (n, _) in r.placement.items()]

    def gantt_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["job", "pod", "node", "start_s", "end_s"])
        for job, pod, node, start, end in self.gantt_rows():
            w.writerow([job, pod, node, fmt_seconds(start), fmt_seconds(end)])
        return buf.getvalue()

    def summary(self) -> str:
        return (f"scenario={self.scenario_name} seed={self.seed} jobs={len(self.records)} "
                f"overall_response_s={fmt_seconds(self.overall_response_s)} "
                f"makespan_s={fmt_seconds(self.makespan_s)}")


@dataclass
class _Running:
    job: JobSpec
    pod_set: PodSet
    remaining: Fraction
    static: Fraction                  # s_net * s_cpu * s_remote
    factors: Tuple[Fraction, Fraction, Fraction]
    contribution: Dict[Tuple[str, int], Fraction]
    last: Fraction
    slowdown: Optional[Fraction] = None
    version: int = 0


@functools.lru_cache(maxsize=1024)
def _never_fits(shape, cluster_config, planner, scheduler, kubelet) -> Optional[str]:
    n_tasks, resources, profile, n_workers = shape
    job = JobSpec("probe", n_tasks, resources, profile, Fraction(0), Fraction(1),
                  default_n_workers=n_workers)
    cluster = ClusterState.from_config(cluster_config, Fraction(1))
    plan = select_granularity(job, len(cluster.nodes), planner)
    queue = new_queue([PendingJob(job, plan, build_pod_set(job, plan))])
    (_, outcome), = gang_admit(queue, cluster, scheduler, kubelet, random.Random(0))
    return outcome.unschedulable


def _check_fits_empty(jobs, scenario: ScenarioSpec):
    """Reject jobs that could never be placed, before the clock starts."""
    for job in jobs:
        shape = (job.n_tasks, job.total_resources, job.profile, job.default_n_workers)
        reason = _never_fits(shape, scenario.cluster, scenario.planner, scenario.scheduler,
                             scenario.kubelet)
        if reason is not None:
            raise ConfigError(f"job {job.job_id} can never be scheduled on this cluster: "
                              f"{reason.replace('probe', job.job_id)}")


def run(scenario: ScenarioSpec, seed: Optional[int] = None,
        replay: Optional[Mapping[str, Mapping[str, str]]] = None) -> SimReport:
    """Simulate ``scenario`` to completion.

    ``replay`` pins worker placements (job_id -> pod_id -> node_id), typically
    taken from ``SimReport.placements()`` of an earlier run.
    """
    jobs = generate(scenario, seed)
    if not jobs:
        raise ConfigError(f"scenario {scenario.name!r} has no jobs")
    cluster = ClusterState.from_config(scenario.cluster, scenario.perf.domain_bandwidth_gbps)
    max_nodes = len(cluster.nodes)
    _check_fits_empty(jobs, scenario)

    params = scenario.perf
    load = DomainLoad.for_cluster(cluster)
    rng = random.Random(f"scheduler:{seed}")
    by_id = {j.job_id: j for j in jobs}
    records = {j.job_id: JobRecord(j.job_id, j.benchmark, j.profile.value, j.submit_time_s)
               for j in jobs}
    trace: List[TraceEntry] = []
    events: List[SimEvent] = []
    seq = 0
    for j in jobs:
        heapq.heappush(events, SimEvent(j.submit_time_s, ARRIVAL, seq, j.job_id))
        seq += 1
    pending = new_queue()
    running: Dict[str, _Running] = {}
    queued: Dict[str, PendingJob] = {}
    blocked_reported = set()

    while events:
        ev = heapq.heappop(events)
        t = ev.time_s
        if ev.kind == COMPLETION:
            r = running.get(ev.job_id)
            if r is None or r.version != ev.version:
                continue   # superseded by a later reschedule

        if ev.kind == COMPLETION:
            r = running.pop(ev.job_id)
            left = r.remaining - (t - r.last) / r.slowdown
            if left != 0:
                raise InvariantError(f"{ev.job_id} completed with {left} work left")
            rec = records[ev.job_id]
            rec.finish_time_s = t
            start, _, s = rec.intervals[-1]
            rec.intervals[-1] = (start, t, s)
            load.add(r.contribution, -1)
            release_job(r.pod_set, cluster)
            trace.append(TraceEntry(t, "complete", ev.job_id, detail=f"at={t}"))
        else:
            job = by_id[ev.job_id]
            plan = select_granularity(job, max_nodes, scenario.planner)
            pod_set = build_pod_set(job, plan)
            forced = None if replay is None else replay[job.job_id]
            queued[job.job_id] = PendingJob(job, plan, pod_set, forced)
            pending.append(queued[job.job_id])
            trace.append(TraceEntry(t, "arrival", job.job_id,
                                    detail=f"nodes={plan.n_nodes} workers={plan.n_workers} "
                                           f"groups={plan.n_groups} pods={len(pod_set.workers)}"))

        for job_id, outcome in gang_admit(pending, cluster, scenario.scheduler, scenario.kubelet, rng):
            if not outcome.ok:
                if job_id not in blocked_reported:
                    blocked_reported.add(job_id)
                    trace.append(TraceEntry(t, "wait", job_id, detail=outcome.unschedulable))
                continue
            entry = queued.pop(job_id)
            job, pod_set = entry.job, entry.pod_set
            rec = records[job_id]
            rec.start_time_s = t
            placement = []
            for pod in pod_set.pods:
                node_id = cluster.bindings[pod.pod_id].node_id
                assignment = cluster.node(node_id).bindings[pod.pod_id][1]
                rec.placement[pod.pod_id] = (node_id, assignment.render())
                trace.append(TraceEntry(t, "bind", job_id, pod.pod_id, node_id, assignment.render()))
                if pod.role is PodRole.WORKER:
                    placement.append(WorkerPlacement(node_id, assignment, pod.n_tasks_in_pod))
            factors = placement_factors(job, placement, params)
            contribution = demand_contribution(job, placement, load.node_domains)
            load.add(contribution)
            running[job_id] = _Running(job, pod_set, job.base_runtime_s,
                                       factors[0] * factors[1] * factors[2], factors,
                                       contribution, t)
            trace.append(TraceEntry(t, "start", job_id, detail=f"at={t} wait={t - job.submit_time_s}"))

        for job_id, r in running.items():
            s_mem = memory_factor(r.contribution, load)
            slowdown = r.static * s_mem
            if slowdown == r.slowdown:
                continue   # same rate, so the pending completion event still holds
            if r.slowdown is not None:
                r.remaining -= (t - r.last) / r.slowdown
            r.last = t
            rec = records[job_id]
            if rec.intervals:
                start, _, s = rec.intervals[-1]
                rec.intervals[-1] = (start, t, s)
            rec.intervals.append((t, None, slowdown))
            r.slowdown = slowdown
            net, cpu, remote = r.factors
            trace.append(TraceEntry(t, "rate", job_id, detail=(
                f"at={t} slowdown={slowdown} net={net} cpu={cpu} mem={s_mem} remote={remote}")))
            r.version += 1
            heapq.heappush(events, SimEvent(t + r.remaining * slowdown, COMPLETION, seq,
                                            job_id, r.version))
            seq += 1

    if pending or running:
        raise InvariantError(f"simulation ended with jobs left: pending={[p.job.job_id for p in pending]}")

    ordered = [records[j.job_id] for j in jobs]
    overall, makespan = compute_metrics(ordered)
    log.debug("%s seed=%s overall=%s makespan=%s", scenario.name, seed,
             fmt_seconds(overall), fmt_seconds(makespan))
    return SimReport(scenario.name, seed, ordered, overall, makespan, trace)


_FIELD = re.compile(r"(\w+)=(\S+)")


def audit_work_conservation(trace_text: str, base_runtimes: Mapping[str, Fraction]) -> Dict[str, Fraction]:
    """Relative error of ``sum(interval / slowdown)`` against base runtime, per job.

    Reads only the rendered trace: ``rate`` lines open intervals and
    ``complete`` lines close them, both carrying exact times.
    """
    open_at: Dict[str, Tuple[Fraction, Fraction]] = {}
    done: Dict[str, Fraction] = {}
    work: Dict[str, Fraction] = {}
    for line in trace_text.splitlines():
        head, _, detail = line.partition(" detail=")
        f = dict(_FIELD.findall(head))
        event, job = f.get("event"), f.get("job")
        if event not in ("rate", "complete"):
            continue
        d = dict(_FIELD.findall(detail))
        at = Fraction(d["at"])
        if job in open_at:
            start, s = open_at.pop(job)
            work[job] = work.get(job, Fraction(0)) + (at - start) / s
        if event == "rate":
            open_at[job] = (at, Fraction(d["slowdown"]))
        else:
            done[job] = work.get(job, Fraction(0))
    if open_at:
        raise InvariantError(f"unterminated intervals in trace: {sorted(open_at)}")
    return {job: abs(done.get(job, Fraction(0)) - base) / base for job, base in base_runtimes.items()}
