"""Discrete-event engine for the two-class single-server system.

Each replication derives four RNG streams (update/query arrivals, update/query
service draws) deterministically from (base_seed, rep_index), so rerunning a
different policy on the same seed replays identical randomness (common random
numbers). Service requirements are drawn at arrival time for the same reason.
"""
from __future__ import annotations

import math
import statistics
from collections import deque
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .model import Fcfs, JobClass, JobRecord, ModelParams, ReplicationMetrics
from .policy import SchedulerState, ServerPosition, Trigger, decide


@dataclass(frozen=True)
class SimConfig:
    horizon: float
    warmup: float = 0.0
    replications: int = 10
    base_seed: int = 12345

    def __post_init__(self):
        if not (self.horizon > self.warmup >= 0):
            raise ValueError(f"need horizon > warmup >= 0, got {self.horizon}, {self.warmup}")
        if self.replications < 1:
            raise ValueError("replications must be >= 1")


class OutOfOrderDeparture(RuntimeError):
    """An update departed with an older generation time than one already delivered."""


def sample_exponential(rate: float, stream) -> float:
    """Inverse-transform draw -ln(u)/rate with u uniform on (0, 1)."""
    if rate <= 0:
        raise ValueError("rate must be positive")
    u = stream.random()
    while u <= 0.0:
        u = stream.random()
    return -math.log(u) / rate


def _rng_streams(base_seed: int, rep_index: int):
    root = np.random.SeedSequence(entropy=base_seed, spawn_key=(rep_index,))
    return [np.random.Generator(np.random.PCG64(child)) for child in root.spawn(4)]


class AoiTracker:
    """Age process bookkeeping: integral of the age over the measurement window
    and one peak-age sample per delivered update.

    The age starts at 0 with a phantom previous update arrival at t=0, so the
    first peak sample spans from time 0. Peak samples are stored as
    (inter-arrival) + (system time) from the raw timestamps, which is the
    defining decomposition of a peak.
    """

    def __init__(self, warmup: float = 0.0, horizon: float = math.inf):
        self.freshest_delivered_generation = 0.0
        self.previous_update_arrival = 0.0
        self.last_event_time = 0.0
        self.age_integral = 0.0
        self.paoi_samples: List[float] = []
        self._warmup = warmup
        self._horizon = horizon

    def _accumulate(self, upto: float) -> None:
        a = max(self.last_event_time, self._warmup)
        b = min(upto, self._horizon)
        if b > a:
            g = self.freshest_delivered_generation
            self.age_integral += ((b - g) ** 2 - (a - g) ** 2) / 2.0

    def record_update_departure(self, generation_time: float, now: float) -> None:
        if generation_time > now:
            raise ValueError("generation_time after departure time")
        if generation_time < self.freshest_delivered_generation:
            raise OutOfOrderDeparture(
                f"update generated at {generation_time} delivered after one from "
                f"{self.freshest_delivered_generation}")
        self._accumulate(now)
        if self._warmup < now <= self._horizon:
            inter_arrival = generation_time - self.previous_update_arrival
            system_time = now - generation_time
            self.paoi_samples.append(inter_arrival + system_time)
        self.previous_update_arrival = generation_time
        self.freshest_delivered_generation = generation_time
        self.last_event_time = now

    def finalize(self, horizon: float) -> None:
        self._accumulate(horizon)
        self.last_event_time = horizon

    @property
    def current_age_start(self) -> float:
        return self.freshest_delivered_generation


class _Job:
    __slots__ = ("arrival", "remaining", "requirement", "job_class")

    def __init__(self, arrival, requirement, job_class):
        self.arrival = arrival
        self.remaining = requirement
        self.requirement = requirement
        self.job_class = job_class


@dataclass
class ReplicationDetail:
    """Extra per-run data for invariant checks (not part of the metrics)."""

    jobs: List[JobRecord]
    paoi_samples: List[float]
    busy_time: float
    arrived_service: float
    completed_service: float
    residual_work: float
    tracker: AoiTracker


def run_replication(params: ModelParams, policy, config: SimConfig,
                    rep_index: int) -> ReplicationMetrics:
    metrics, _ = _simulate(params, policy, config, rep_index, collect_jobs=False)
    return metrics


def run_replication_detailed(params: ModelParams, policy, config: SimConfig,
                             rep_index: int) -> Tuple[ReplicationMetrics, ReplicationDetail]:
    return _simulate(params, policy, config, rep_index, collect_jobs=True)


def _simulate(params, policy, config, rep_index, collect_jobs):
    if not 0 <= rep_index < config.replications:
        raise ValueError(f"rep_index {rep_index} outside 0..{config.replications - 1}")
    u_arr, q_arr, u_svc, q_svc = _rng_streams(config.base_seed, rep_index)
    lam_u, lam_q = params.lambda_u, params.lambda_q
    mu_u, mu_q = params.mu_u, params.mu_q
    horizon, warmup = config.horizon, config.warmup
    is_fcfs = isinstance(policy, Fcfs)

    SQ, SU, IDLE = (ServerPosition.SERVING_QUERY, ServerPosition.SERVING_UPDATE,
                    ServerPosition.IDLE)
    q_queue: deque = deque()
    u_queue: deque = deque()
    line: deque = deque()  # merged arrival order, FCFS only
    n_q = n_u = 0
    pos = IDLE
    emptying = False
    in_service = None
    completion = math.inf
    next_u = sample_exponential(lam_u, u_arr)
    next_q = sample_exponential(lam_q, q_arr)
    t = 0.0

    nq_integral = nu_integral = 0.0
    busy_time = arrived_service = completed_service = 0.0
    resp_sum = 0.0
    resp_n = 0
    usys_sum = 0.0
    completed_updates = 0
    tracker = AoiTracker(warmup, horizon)
    jobs: "List[JobRecord] | None" = [] if collect_jobs else None

    while True:
        if completion <= next_u and completion <= next_q:
            te, kind = completion, 0
        elif next_u <= next_q:  # simultaneous arrivals serve the update first
            te, kind = next_u, 1
        else:
            te, kind = next_q, 2
        cut = te if te <= horizon else horizon
        if cut > warmup:
            dt = cut - (t if t > warmup else warmup)
            if dt > 0:
                nq_integral += n_q * dt
                nu_integral += n_u * dt
        if in_service is not None:
            busy_time += cut - t
        if te > horizon:
            break
        t = te

        if kind == 1:
            job = _Job(t, sample_exponential(mu_u, u_svc), JobClass.UPDATE)
            arrived_service += job.requirement
            if is_fcfs:
                n_u += 1
                if pos is IDLE:
                    pos = SU
            else:
                n_q, n_u, pos, emptying = decide(
                    policy, SchedulerState(n_q, n_u, pos, emptying), Trigger.ARRIVAL_UPDATE)
            u_queue.append(job)
            if is_fcfs:
                line.append(job)
            next_u = t + sample_exponential(lam_u, u_arr)
        elif kind == 2:
            job = _Job(t, sample_exponential(mu_q, q_svc), JobClass.QUERY)
            arrived_service += job.requirement
            if is_fcfs:
                n_q += 1
                if pos is IDLE:
                    pos = SQ
            else:
                n_q, n_u, pos, emptying = decide(
                    policy, SchedulerState(n_q, n_u, pos, emptying), Trigger.ARRIVAL_QUERY)
            q_queue.append(job)
            if is_fcfs:
                line.append(job)
            next_q = t + sample_exponential(lam_q, q_arr)
        else:
            job = in_service
            in_service = None
            completion = math.inf
            cls = job.job_class
            if is_fcfs:
                if cls is JobClass.UPDATE:
                    n_u -= 1
                else:
                    n_q -= 1
                line.popleft()
            else:
                trigger = (Trigger.DEPARTURE_UPDATE if cls is JobClass.UPDATE
                           else Trigger.DEPARTURE_QUERY)
                n_q, n_u, pos, emptying = decide(
                    policy, SchedulerState(n_q, n_u, pos, emptying), trigger)
            if cls is JobClass.UPDATE:
                u_queue.popleft()
                tracker.record_update_departure(job.arrival, t)
                if t > warmup:
                    completed_updates += 1
                    usys_sum += t - job.arrival
            else:
                q_queue.popleft()
                if t > warmup:
                    resp_n += 1
                    resp_sum += t - job.arrival
            completed_service += job.requirement
            if jobs is not None:
                jobs.append(JobRecord(cls, job.arrival, job.requirement, t))

        # (re)assign the server
        if is_fcfs:
            if in_service is None:
                if line:
                    nxt = line[0]
                    in_service = nxt
                    completion = t + nxt.remaining
                    pos = SU if nxt.job_class is JobClass.UPDATE else SQ
                else:
                    pos = IDLE
        else:
            if pos is SQ:
                target = q_queue[0]
            elif pos is SU:
                target = u_queue[0]
            else:
                target = None
            if target is not in_service:
                if in_service is not None:  # preempt-resume: bank the remaining work
                    in_service.remaining = completion - t
                in_service = target
                completion = math.inf if target is None else t + target.remaining

    tracker.finalize(horizon)
    residual_work = 0.0
    for job in q_queue:
        residual_work += (completion - horizon) if job is in_service else job.remaining
    for job in u_queue:
        residual_work += (completion - horizon) if job is in_service else job.remaining

    duration = horizon - warmup
    metrics = ReplicationMetrics(
        mean_response_time=resp_sum / resp_n if resp_n else None,
        mean_paoi=(statistics.fmean(tracker.paoi_samples) if tracker.paoi_samples else None),
        mean_aoi=tracker.age_integral / duration,
        mean_nq=nq_integral / duration,
        mean_nu=nu_integral / duration,
        mean_update_system_time=usys_sum / completed_updates if completed_updates else None,
        completed_queries=resp_n,
        completed_updates=completed_updates,
        horizon=duration,
    )
    detail = None
    if collect_jobs:
        detail = ReplicationDetail(jobs, list(tracker.paoi_samples), busy_time,
                                   arrived_service, completed_service, residual_work, tracker)
    return metrics, detail


def finalize_metrics(tracker: AoiTracker, completed_jobs: Sequence[JobRecord],
                     horizon: float, warmup: float,
                     nq_integral: float, nu_integral: float) -> ReplicationMetrics:
    """Assemble per-run metrics from a finalized tracker and the completed jobs."""
    duration = horizon - warmup
    if duration <= 0:
        raise ValueError("horizon must exceed warmup")
    resp = [j.system_time for j in completed_jobs
            if j.job_class is JobClass.QUERY and warmup < j.completion_time <= horizon]
    usys = [j.system_time for j in completed_jobs
            if j.job_class is JobClass.UPDATE and warmup < j.completion_time <= horizon]
    return ReplicationMetrics(
        mean_response_time=statistics.fmean(resp) if resp else None,
        mean_paoi=(statistics.fmean(tracker.paoi_samples) if tracker.paoi_samples else None),
        mean_aoi=tracker.age_integral / duration,
        mean_nq=nq_integral / duration,
        mean_nu=nu_integral / duration,
        mean_update_system_time=statistics.fmean(usys) if usys else None,
        completed_queries=len(resp),
        completed_updates=len(usys),
        horizon=duration,
    )


@dataclass(frozen=True)
class SummaryStats:
    mean: "float | None"
    stddev: "float | None"
    half_width: "float | None"
    n: int


METRIC_FIELDS = {
    "response_time": "mean_response_time",
    "paoi": "mean_paoi",
    "aoi": "mean_aoi",
    "nq": "mean_nq",
    "nu": "mean_nu",
    "update_system_time": "mean_update_system_time",
}


def aggregate(runs: Sequence[ReplicationMetrics]) -> Dict[str, SummaryStats]:
    """Per-metric mean, sample stddev, and 95% normal half-width over replications."""
    if not runs:
        raise ValueError("need at least one replication")
    out = {}
    for name, field in METRIC_FIELDS.items():
        values = [getattr(r, field) for r in runs if getattr(r, field) is not None]
        n = len(values)
        if n == 0:
            out[name] = SummaryStats(None, None, None, 0)
        elif n == 1:
            out[name] = SummaryStats(values[0], None, None, 1)
        else:
            s = statistics.stdev(values)
            out[name] = SummaryStats(statistics.fmean(values), s,
                                     1.96 * s / math.sqrt(n), n)
    return out


def littles_law_residual(metrics: ReplicationMetrics,
                         params: ModelParams) -> Tuple[float, float]:
    """Relative L = lambda*W mismatch for the query and update sides."""
    if metrics.mean_nq == 0 or metrics.mean_response_time is None:
        res_q = 0.0
    else:
        res_q = abs(metrics.mean_nq
                    - params.lambda_q * metrics.mean_response_time) / metrics.mean_nq
    if metrics.mean_nu == 0 or metrics.mean_update_system_time is None:
        res_u = 0.0
    else:
        res_u = abs(metrics.mean_nu
                    - params.lambda_u * metrics.mean_update_system_time) / metrics.mean_nu
    return res_q, res_u
