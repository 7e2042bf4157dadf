"""Discrete-event simulation of the job/task life cycle.

Jobs arrive by an exponential inter-arrival process (mean = ``scale``)
into a capacity-bounded job queue; arrivals finding the queue full wait
outside and enter, oldest first, as completions free slots.  Tasks of a
queued job move through waiting -> ready -> executable -> running ->
completed.  Whenever the ready queue gains tasks, a scheduling point
fires: every not-yet-started assignment is pulled back into the ready
queue, the scheduler callback orders the ready tasks, and the PE manager
maps the ordering onto PEs by earliest finish time with gap insertion.
A PE picks up its earliest planned assignment as soon as it is idle and
the task's inputs have arrived.

Time is a continuous clock driven by an event heap.  Events at one
timestamp are processed completions first, then arrivals, then wake-ups;
ties among tasks break by ascending (job_seq, task_id).  Given equal
(config, scheduler) a run is bit-for-bit reproducible.
"""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .profiles import JobProfile, PeSpec, ResourceProfile, TaskSpec, mean_exec_time, validate_dag, validate_pair
from .record import ScheduleRecord
from .timelines import PeTimeline, PredFinish, data_ready_time, eft_select

WAITING = "waiting"
READY = "ready"
EXECUTABLE = "executable"
RUNNING = "running"
COMPLETED = "completed"

_EV_COMPLETE = 0
_EV_ARRIVAL = 1
_EV_WAKE = 2


class SchedulerContractError(RuntimeError):
    """The scheduler callback violated its contract."""


@dataclass
class NoiseModel:
    """Gaussian perturbation of execution times.

    ``sigma_fraction`` scales the per-task mean execution time into the
    standard deviation of the added noise; draws are clamped to ``floor``
    so execution times stay positive.
    """

    sigma_fraction: float = 0.0
    floor: float = 1e-3


def draw_exec_time(
    task: TaskSpec,
    pe: PeSpec,
    noise: NoiseModel,
    rng: np.random.Generator,
    res: ResourceProfile | None = None,
    mean_time: float | None = None,
) -> float:
    """Nominal time plus Gaussian(0, (sigma * mean)^2), clamped to the floor.

    With sigma_fraction == 0 the nominal time is returned exactly and the
    RNG is not consumed.
    """
    nominal = task.exec_times.get(pe.type_id)
    if nominal is None:
        raise ValueError(f"task {task.task_id} cannot run on pe {pe.pe_id} (type {pe.type_id})")
    if noise.sigma_fraction == 0.0:
        return float(nominal)
    if mean_time is None:
        if res is None:
            raise ValueError("need res or mean_time to scale the noise")
        mean_time = mean_exec_time(task, res)
    drawn = nominal + rng.normal(0.0, noise.sigma_fraction * mean_time)
    return max(noise.floor, float(drawn))


@dataclass
class SimConfig:
    scale: float | None = 50.0  # mean inter-arrival gap; None disables injection
    sim_length: float = 10_000.0
    warmup: float = 0.0
    capacity: int = 12
    sigma: float = 0.0
    noise_floor: float = 1e-3
    prefill: bool = False  # fill the job queue at time 0 (pseudo steady state)
    seed: int = 0
    arrival_seed: int | None = None  # defaults to seed; pin to pair arrival sequences
    record_events: bool = False

    def validate(self):
        if self.capacity < 1:
            raise ValueError("capacity must be >= 1")
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")
        if self.warmup < 0:
            raise ValueError("warmup must be >= 0")
        if self.sim_length < 0:
            raise ValueError("sim_length must be >= 0")
        if self.scale is not None and not self.scale > 0:
            raise ValueError("scale must be > 0 (or None to disable injection)")


class JobInstance:
    __slots__ = ("job_seq", "profile", "injected_at", "completed_at", "remaining", "tasks")

    def __init__(self, job_seq: int, profile: JobProfile):
        self.job_seq = job_seq
        self.profile = profile
        self.injected_at: float | None = None
        self.completed_at: float | None = None
        self.remaining = len(profile.tasks)
        self.tasks: dict[int, TaskInstance] = {
            t.task_id: TaskInstance(self, t.task_id) for t in profile.tasks
        }


class TaskInstance:
    __slots__ = ("job", "task_id", "status", "pe_id", "start", "finish", "drawn", "planned_start", "planned_finish")

    def __init__(self, job: JobInstance, task_id: int):
        self.job = job
        self.task_id = task_id
        self.status = WAITING
        self.pe_id: int | None = None
        self.start: float | None = None
        self.finish: float | None = None
        self.drawn: float | None = None
        self.planned_start: float | None = None
        self.planned_finish: float | None = None

    @property
    def job_seq(self) -> int:
        return self.job.job_seq

    @property
    def key(self) -> tuple[int, int]:
        return (self.job.job_seq, self.task_id)

    @property
    def spec(self) -> TaskSpec:
        return self.job.profile.by_id[self.task_id]


def _stream(*keys: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(list(keys))))


class Simulator:
    """One simulation episode; single-threaded and deterministic."""

    def __init__(self, job: JobProfile, res: ResourceProfile, config: SimConfig, scheduler):
        config.validate()
        validate_dag(job)
        validate_pair(job, res)
        self.job_profile = job
        self.res = res
        self.config = config
        self.scheduler = scheduler
        self.noise = NoiseModel(config.sigma, config.noise_floor)
        self.mean_exec = {t.task_id: mean_exec_time(t, res) for t in job.tasks}

        arrival_seed = config.seed if config.arrival_seed is None else config.arrival_seed
        self._rng_arrival = _stream(arrival_seed, 11)
        self._rng_noise = _stream(config.seed, 13)

        self.clock = 0.0
        self._events: list[tuple[float, int, int, int, int]] = []
        self._event_seq = 0
        self.job_queue: list[JobInstance] = []
        self.deferred: list[JobInstance] = []
        self.completed_jobs: list[JobInstance] = []
        self.ready: dict[tuple[int, int], TaskInstance] = {}
        self._ready_dirty = False
        self.pe_ids = [pe.pe_id for pe in res.pes]
        self.pe_by_id = {pe.pe_id: pe for pe in res.pes}
        self.pe_running: dict[int, TaskInstance | None] = {p: None for p in self.pe_ids}
        self.pe_queue: dict[int, list[TaskInstance]] = {p: [] for p in self.pe_ids}
        self.record = ScheduleRecord()
        self.events_log: list[tuple[float, str, int | None, int | None, int | None]] = []

        self._job_seq = 0
        self.arrivals_drawn = 0
        self.prefilled = 0
        self.entered = 0

        if config.prefill:
            for _ in range(config.capacity):
                self._enter_job(self._new_job(), 0.0)
            self.prefilled = config.capacity
        if config.scale is not None:
            gap = self._rng_arrival.exponential(config.scale)
            self._push(gap, _EV_ARRIVAL, -1, -1)

    # ------------------------------------------------------------------ events

    def _push(self, time: float, kind: int, job_seq: int, task_id: int):
        self._event_seq += 1
        heapq.heappush(self._events, (time, kind, job_seq, task_id, self._event_seq))

    def _log(self, kind: str, job=None, task=None, pe=None):
        if self.config.record_events:
            self.events_log.append((self.clock, kind, job, task, pe))

    def _new_job(self) -> JobInstance:
        ji = JobInstance(self._job_seq, self.job_profile)
        self._job_seq += 1
        return ji

    def _enter_job(self, ji: JobInstance, time: float):
        ji.injected_at = time
        self.job_queue.append(ji)
        self.entered += 1
        self._log("inject", job=ji.job_seq)
        for tid in sorted(self.job_profile.entry_ids):
            self._make_ready(ji.tasks[tid])

    def _make_ready(self, ti: TaskInstance):
        ti.status = READY
        self.ready[ti.key] = ti
        self._ready_dirty = True
        self._log("ready", job=ti.job_seq, task=ti.task_id)

    # ------------------------------------------------------------------ stepping

    def step(self) -> bool:
        """Process every event at the next timestamp; False when finished."""
        if not self._events:
            return False
        t = self._events[0][0]
        if t > self.config.sim_length:
            return False
        self.clock = t
        completed_any = False
        while self._events and self._events[0][0] == t:
            _, kind, job_seq, task_id, _ = heapq.heappop(self._events)
            if kind == _EV_COMPLETE:
                self._complete(job_seq, task_id)
                completed_any = True
            elif kind == _EV_ARRIVAL:
                self._arrive()
        self._post_event_phases(completed_any)
        return True

    def begin(self) -> None:
        """Run the time-zero scheduling pass (for prefilled queues)."""
        self._post_event_phases(completed_any=False)

    def run(self) -> None:
        self.begin()
        while self.step():
            pass
        end = getattr(self.scheduler, "episode_end", None)
        if end is not None:
            end(self)

    def _post_event_phases(self, completed_any: bool):
        if completed_any and not self.ready:
            self._log("noop")
            hook = getattr(self.scheduler, "notify_noop", None)
            if hook is not None:
                hook(self)
        if self.ready and self._ready_dirty:
            self._scheduling_point()
        self._start_phase()

    def _arrive(self):
        self.arrivals_drawn += 1
        ji = self._new_job()
        if len(self.job_queue) < self.config.capacity:
            self._enter_job(ji, self.clock)
        else:
            self.deferred.append(ji)
            self._log("defer", job=ji.job_seq)
        gap = self._rng_arrival.exponential(self.config.scale)
        self._push(self.clock + gap, _EV_ARRIVAL, -1, -1)

    def _complete(self, job_seq: int, task_id: int):
        ji = next(j for j in self.job_queue if j.job_seq == job_seq)
        ti = ji.tasks[task_id]
        assert ti.status == RUNNING
        ti.status = COMPLETED
        ti.finish = self.clock
        self.pe_running[ti.pe_id] = None
        self.record.add(job_seq, task_id, ti.pe_id, ti.start, ti.finish)
        self._log("complete", job=job_seq, task=task_id, pe=ti.pe_id)
        ji.remaining -= 1
        for succ, _cost in self.job_profile.successors[task_id]:
            sti = ji.tasks[succ]
            if sti.status == WAITING and all(
                ji.tasks[p].status == COMPLETED for p in self.job_profile.by_id[succ].pred_ids
            ):
                self._make_ready(sti)
        if ji.remaining == 0:
            ji.completed_at = self.clock
            self.job_queue.remove(ji)
            self.completed_jobs.append(ji)
            self._log("job-done", job=job_seq)
            if self.deferred:
                self._enter_job(self.deferred.pop(0), self.clock)
        hook = getattr(self.scheduler, "notify_completion", None)
        if hook is not None:
            hook(self, ti)

    # ------------------------------------------------------------------ scheduling

    def _pred_finishes(self, ti: TaskInstance) -> list[PredFinish]:
        out = []
        for pred, cost in ti.spec.predecessors:
            pti = ti.job.tasks[pred]
            out.append(PredFinish(finish=pti.finish, pe_id=pti.pe_id, comm_cost=cost))
        return out

    def _scheduling_point(self):
        self._ready_dirty = False
        # Reload: planned but not started assignments return to the ready set.
        for pe_id in self.pe_ids:
            for ti in self.pe_queue[pe_id]:
                ti.status = READY
                ti.pe_id = None
                ti.planned_start = None
                ti.planned_finish = None
                self.ready[ti.key] = ti
            self.pe_queue[pe_id].clear()
        ready_list = [self.ready[k] for k in sorted(self.ready)]
        ordering = self.scheduler.order(self, ready_list)
        self._check_permutation(ordering, ready_list)
        self._log("decision")
        timelines = {p: PeTimeline() for p in self.pe_ids}
        for pe_id, running in self.pe_running.items():
            if running is not None:
                timelines[pe_id].insert(self.clock, running.start + running.drawn)
        for ti in ordering:
            pe_id, start, finish = eft_select(
                ti.spec, self._pred_finishes(ti), timelines, self.res, ref_time=self.clock
            )
            ti.status = EXECUTABLE
            ti.pe_id = pe_id
            ti.planned_start = start
            ti.planned_finish = finish
            self.pe_queue[pe_id].append(ti)
            self._log("assign", job=ti.job_seq, task=ti.task_id, pe=pe_id)
        for pe_id in self.pe_ids:
            self.pe_queue[pe_id].sort(key=lambda x: (x.planned_start, x.job_seq, x.task_id))
        self.ready.clear()

    @staticmethod
    def _check_permutation(ordering, ready_list):
        if len(ordering) != len(ready_list) or {t.key for t in ordering} != {
            t.key for t in ready_list
        }:
            raise SchedulerContractError(
                "scheduler did not return a permutation of the ready queue"
            )

    def _start_phase(self):
        for pe_id in self.pe_ids:
            if self.pe_running[pe_id] is not None:
                continue
            q = self.pe_queue[pe_id]
            if not q:
                continue
            ti = q[0]
            ready_at = data_ready_time(self._pred_finishes(ti), pe_id, ref_time=self.clock)
            if ready_at <= self.clock:
                q.pop(0)
                self._start_task(pe_id, ti)
            else:
                self._push(ready_at, _EV_WAKE, ti.job_seq, ti.task_id)

    def _start_task(self, pe_id: int, ti: TaskInstance):
        drawn = draw_exec_time(
            ti.spec,
            self.pe_by_id[pe_id],
            self.noise,
            self._rng_noise,
            mean_time=self.mean_exec[ti.task_id],
        )
        ti.status = RUNNING
        ti.pe_id = pe_id
        ti.start = self.clock
        ti.drawn = drawn
        self.pe_running[pe_id] = ti
        self._push(self.clock + drawn, _EV_COMPLETE, ti.job_seq, ti.task_id)
        self._log("start", job=ti.job_seq, task=ti.task_id, pe=pe_id)

    # ------------------------------------------------------------------ metrics

    def jobs_in_flight(self) -> list[JobInstance]:
        return list(self.job_queue)

    def compute_latency(self) -> float:
        """Mean completed-job duration over jobs injected once the warm-up
        has elapsed (inclusive, so prefilled jobs count when warmup is 0).

        Returns math.inf when no such job completed (reported as null in
        the JSON export).
        """
        done = [
            j
            for j in self.completed_jobs
            if j.injected_at >= self.config.warmup
        ]
        if not done:
            return math.inf
        return sum(j.completed_at - j.injected_at for j in done) / len(done)

    def metrics(self) -> dict:
        done = [j for j in self.completed_jobs if j.injected_at >= self.config.warmup]
        injected = sum(
            1
            for j in self.job_queue + self.completed_jobs
            if j.injected_at is not None and j.injected_at >= self.config.warmup
        )
        latency = self.compute_latency()
        return {
            "completed": len(done),
            "latency": None if math.isinf(latency) else latency,
            "injected": injected,
            "sim_length": self.config.sim_length,
            "warmup": self.config.warmup,
            "scale": self.config.scale,
            "seed": self.config.seed,
        }


def metrics_json(metrics: dict) -> str:
    return json.dumps(metrics, sort_keys=True) + "\n"


def event_log_text(sim: Simulator) -> str:
    """One line per event: ``<clock> <event-kind> <job> <task> <pe>``."""

    def cell(v):
        return "-" if v is None else str(v)

    lines = [
        f"{t:.6f} {kind} {cell(j)} {cell(task)} {cell(pe)}"
        for (t, kind, j, task, pe) in sim.events_log
    ]
    return "\n".join(lines) + ("\n" if lines else "")


def init_pseudo_steady_state(job, res, config: SimConfig, scheduler) -> Simulator:
    """A fresh simulator whose job queue is filled to capacity at time 0."""
    cfg = SimConfig(**{**config.__dict__, "prefill": True})
    return Simulator(job, res, cfg, scheduler)


def run_episode(job, res, config: SimConfig, scheduler) -> tuple[ScheduleRecord, dict]:
    """Run one episode to its horizon; jobs not completed are not counted."""
    sim = Simulator(job, res, config, scheduler)
    sim.run()
    return sim.record, sim.metrics()
