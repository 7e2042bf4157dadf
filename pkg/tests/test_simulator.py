import math

import numpy as np
import pytest

from socsched.profiles import JobProfile, PeSpec, ResourceProfile, TaskSpec
from socsched.record import gantt_csv
from socsched.schedulers import FifoScheduler, HeftScheduler, RandomScheduler
from socsched.simulator import (
    EXECUTABLE,
    NoiseModel,
    SchedulerContractError,
    SimConfig,
    Simulator,
    draw_exec_time,
    event_log_text,
    init_pseudo_steady_state,
    metrics_json,
    run_episode,
)
from socsched.validity import verify_schedule

from conftest import random_instance


def one_task_job(time=10.0):
    return JobProfile("single", (TaskSpec(0, (), {1: float(time)}),))


def one_pe():
    return ResourceProfile(pes=(PeSpec(0, 1),))


def injected_map(sim):
    return {
        j.job_seq: j.injected_at
        for j in sim.job_queue + sim.completed_jobs
        if j.injected_at is not None
    }


# ---------------------------------------------------------------------------
# injection


def test_interarrival_gaps_match_exponential_mean():
    job, res = one_task_job(1.0), one_pe()
    cfg = SimConfig(scale=50.0, sim_length=1e9, capacity=100_000, seed=2)
    sim = Simulator(job, res, cfg, FifoScheduler())
    sim.begin()
    while sim.arrivals_drawn < 10_001:
        sim.step()
    times = sorted(injected_map(sim).values())[: 10_001]
    assert len(times) == 10_001
    gaps = np.diff(times)
    assert abs(gaps.mean() - 50.0) / 50.0 < 0.05


def test_full_queue_defers_arrivals():
    job = one_task_job(1e6)  # tasks never finish, queue stays full
    res = one_pe()
    cfg = SimConfig(scale=10.0, sim_length=500.0, capacity=12, seed=0)
    sim = Simulator(job, res, cfg, FifoScheduler())
    sim.run()
    assert len(sim.job_queue) == 12
    assert len(sim.deferred) > 0
    assert sim.entered == 12


def test_injection_disabled():
    job, res = one_task_job(), one_pe()
    cfg = SimConfig(scale=None, sim_length=1000.0, capacity=12, seed=0)
    sim = Simulator(job, res, cfg, FifoScheduler())
    sim.run()
    assert sim.arrivals_drawn == 0
    assert sim.entered == 0


def test_deferred_job_enters_on_completion_with_entry_stamp():
    job = one_task_job(30.0)
    res = one_pe()
    cfg = SimConfig(scale=5.0, sim_length=120.0, capacity=1, seed=1)
    sim = Simulator(job, res, cfg, FifoScheduler())
    sim.run()
    stamps = sorted(injected_map(sim).values())
    assert len(stamps) > 2
    # With capacity 1 and 30-unit service, entries after the first happen
    # exactly at completions: first entry time plus multiples of 30.
    for t in stamps[1:]:
        assert (t - stamps[0]) % 30.0 == pytest.approx(0.0, abs=1e-9)


# ---------------------------------------------------------------------------
# stepping and the executable queue


def test_single_task_single_pe_schedule():
    job, res = one_task_job(10.0), one_pe()
    cfg = SimConfig(scale=None, sim_length=100.0, capacity=1, prefill=True, seed=0)
    sim = Simulator(job, res, cfg, FifoScheduler())
    sim.run()
    assert [(e.job_seq, e.task_id, e.pe_id, e.start, e.finish) for e in sim.record.entries] == [
        (0, 0, 0, 0.0, 10.0)
    ]


def test_second_task_waits_in_executable_queue():
    job = JobProfile("two", (TaskSpec(0, (), {1: 5.0}), TaskSpec(1, (), {1: 5.0})))
    res = one_pe()
    cfg = SimConfig(scale=None, sim_length=100.0, capacity=1, prefill=True, seed=0)
    sim = Simulator(job, res, cfg, FifoScheduler())
    sim.begin()
    ti1 = sim.job_queue[0].tasks[1]
    assert sim.pe_running[0] is sim.job_queue[0].tasks[0]
    assert ti1.status == EXECUTABLE
    assert sim.pe_queue[0] == [ti1]
    sim.step()  # completion of task 0 at t=5 starts task 1
    assert sim.pe_running[0] is ti1
    sim.run()
    entries = sim.record.sorted_entries()
    assert [(e.task_id, e.start, e.finish) for e in entries] == [(0, 0.0, 5.0), (1, 5.0, 10.0)]


def test_canonical_single_job_heft_episode(canonical):
    job, res = canonical
    cfg = SimConfig(scale=None, sim_length=1000.0, capacity=1, prefill=True, seed=0)
    sim = Simulator(job, res, cfg, HeftScheduler(job, res))
    sim.run()
    assert len(sim.record) == 10
    verify_schedule(sim.record, job, res, injected_at=injected_map(sim), require_complete_jobs=True)


def test_scheduler_contract_violation():
    class Broken:
        def order(self, sim, ready):
            return ready[:-1]

    job = JobProfile("two", (TaskSpec(0, (), {1: 5.0}), TaskSpec(1, (), {1: 5.0})))
    cfg = SimConfig(scale=None, sim_length=100.0, capacity=1, prefill=True, seed=0)
    sim = Simulator(job, one_pe(), cfg, Broken())
    with pytest.raises(SchedulerContractError):
        sim.run()


def test_cross_pe_communication_delays_start():
    # Chain 0 -> 1 with comm 7; task 1 only runs on type 2, task 0 on type 1.
    job = JobProfile(
        "c",
        (TaskSpec(0, (), {1: 5.0}), TaskSpec(1, ((0, 7.0),), {2: 3.0})),
    )
    res = ResourceProfile(pes=(PeSpec(0, 1), PeSpec(1, 2)))
    cfg = SimConfig(scale=None, sim_length=100.0, capacity=1, prefill=True, seed=0)
    sim = Simulator(job, res, cfg, FifoScheduler())
    sim.run()
    entries = {e.task_id: e for e in sim.record.entries}
    assert entries[0].finish == 5.0
    assert entries[1].start == 12.0  # 5 + comm 7, despite pe 1 being idle
    verify_schedule(sim.record, job, res)


# ---------------------------------------------------------------------------
# noise


def test_draw_exec_time_zero_sigma_exact(wifi):
    job, res = wifi
    pe_type6 = next(pe for pe in res.pes if pe.type_id == 6)
    rng = np.random.default_rng(0)
    t = draw_exec_time(job.by_id[4], pe_type6, NoiseModel(0.0), rng, res)
    assert t == 2.0


def test_draw_exec_time_statistics(canonical):
    job, res = canonical
    task = job.by_id[0]
    pe = res.pes[0]
    rng = np.random.default_rng(4)
    noise = NoiseModel(sigma_fraction=0.25)
    mean = (14 + 16 + 9) / 3
    draws = np.array([draw_exec_time(task, pe, noise, rng, res) for _ in range(10_000)])
    assert abs(draws.std(ddof=1) - 0.25 * mean) / (0.25 * mean) < 0.10
    assert draws.min() >= noise.floor


def test_draw_exec_time_floor_clamps():
    task = TaskSpec(0, (), {1: 1.0})
    res = ResourceProfile(pes=(PeSpec(0, 1),))
    rng = np.random.default_rng(1)
    noise = NoiseModel(sigma_fraction=5.0, floor=0.5)
    draws = [draw_exec_time(task, res.pes[0], noise, rng, res) for _ in range(2000)]
    assert min(draws) == 0.5


def test_draw_exec_time_unsupported_pair():
    task = TaskSpec(0, (), {1: 1.0})
    with pytest.raises(ValueError):
        draw_exec_time(task, PeSpec(9, 3), NoiseModel(), np.random.default_rng(0))


def test_noise_free_single_job_makespan_stable(canonical):
    job, res = canonical
    makespans = set()
    for seed in range(5):
        cfg = SimConfig(scale=None, sim_length=1000.0, capacity=1, prefill=True, seed=seed)
        rec, _ = run_episode(job, res, cfg, HeftScheduler(job, res))
        makespans.add(rec.makespan())
    assert len(makespans) == 1


# ---------------------------------------------------------------------------
# pseudo steady state


def test_prefill_fills_to_capacity(canonical):
    job, res = canonical
    for cap in (12, 1):
        cfg = SimConfig(scale=None, sim_length=0.0, capacity=cap, prefill=True, seed=0)
        sim = init_pseudo_steady_state(job, res, cfg, FifoScheduler())
        assert len(sim.job_queue) == cap
        assert all(j.injected_at == 0.0 for j in sim.job_queue)
        assert len(sim.ready) == cap * len(job.entry_ids)


def test_prefill_ready_count_multi_entry():
    job = JobProfile(
        "fan",
        (
            TaskSpec(0, (), {1: 2.0}),
            TaskSpec(1, (), {1: 2.0}),
            TaskSpec(2, ((0, 0.0), (1, 0.0)), {1: 2.0}),
        ),
    )
    cfg = SimConfig(scale=None, sim_length=0.0, capacity=3, prefill=True, seed=0)
    sim = init_pseudo_steady_state(job, one_pe(), cfg, FifoScheduler())
    assert len(sim.ready) == 3 * 2


# ---------------------------------------------------------------------------
# episodes and metrics


def test_latency_arithmetic(canonical):
    job, res = canonical
    cfg = SimConfig(scale=None, sim_length=1.0, capacity=2, seed=0)
    sim = Simulator(job, res, cfg, FifoScheduler())
    a = sim._new_job()
    a.injected_at, a.completed_at = 10.0, 110.0
    b = sim._new_job()
    b.injected_at, b.completed_at = 20.0, 320.0
    sim.completed_jobs.extend([a, b])
    assert sim.compute_latency() == pytest.approx(200.0)


def test_latency_no_completions_reported_distinctly(canonical):
    job, res = canonical
    cfg = SimConfig(scale=None, sim_length=0.0, capacity=1, seed=0)
    sim = Simulator(job, res, cfg, FifoScheduler())
    sim.run()
    assert math.isinf(sim.compute_latency())
    m = sim.metrics()
    assert m["completed"] == 0
    assert m["latency"] is None


def test_sim_length_zero_completes_nothing(canonical):
    job, res = canonical
    cfg = SimConfig(scale=50.0, sim_length=0.0, capacity=12, prefill=True, seed=0)
    record, metrics = run_episode(job, res, cfg, FifoScheduler())
    assert metrics["completed"] == 0
    assert metrics["latency"] is None


def test_warmup_window_excludes_early_jobs(canonical):
    job, res = canonical
    cfg = SimConfig(scale=60.0, sim_length=4000.0, warmup=1000.0, capacity=12, seed=5)
    sim = Simulator(job, res, cfg, HeftScheduler(job, res))
    sim.run()
    m = sim.metrics()
    counted = [j for j in sim.completed_jobs if j.injected_at >= 1000.0]
    assert m["completed"] == len(counted)
    assert 0 < m["completed"] < len(sim.completed_jobs)


def test_unfinished_jobs_discarded_from_metrics(canonical):
    job, res = canonical
    cfg = SimConfig(scale=30.0, sim_length=800.0, capacity=12, seed=7)
    sim = Simulator(job, res, cfg, HeftScheduler(job, res))
    sim.run()
    assert len(sim.job_queue) > 0  # some jobs in flight at the horizon
    m = sim.metrics()
    assert m["completed"] == len(sim.completed_jobs)


def test_same_seed_bitwise_identical_episode(canonical):
    job, res = canonical
    outs = []
    for _ in range(2):
        cfg = SimConfig(
            scale=50.0, sim_length=2000.0, warmup=400.0, capacity=12, sigma=0.25,
            seed=9, record_events=True,
        )
        sim = Simulator(job, res, cfg, HeftScheduler(job, res))
        sim.run()
        outs.append((gantt_csv(sim.record), metrics_json(sim.metrics()), event_log_text(sim)))
    assert outs[0] == outs[1]


def test_different_schedulers_share_arrival_sequence(canonical):
    job, res = canonical
    stamps = {}
    for name, sched in [
        ("heft", HeftScheduler(job, res)),
        ("rand", RandomScheduler(0)),
        ("fifo", FifoScheduler()),
    ]:
        cfg = SimConfig(scale=40.0, sim_length=1500.0, capacity=200, seed=3, arrival_seed=3)
        sim = Simulator(job, res, cfg, sched)
        sim.run()
        stamps[name] = sorted(injected_map(sim).values())
    assert stamps["heft"] == stamps["rand"] == stamps["fifo"]


def test_conservation_and_clock_monotonicity(canonical):
    job, res = canonical
    cfg = SimConfig(
        scale=40.0, sim_length=2500.0, capacity=6, prefill=True, sigma=0.1,
        seed=11, record_events=True,
    )
    sim = Simulator(job, res, cfg, HeftScheduler(job, res))
    sim.begin()
    checks = 0
    last_clock = 0.0
    while sim.step():
        assert sim.clock >= last_clock
        last_clock = sim.clock
        assert len(sim.job_queue) <= cfg.capacity
        assert sim.entered == len(sim.job_queue) + len(sim.completed_jobs)
        assert sim.prefilled + sim.arrivals_drawn == sim.entered + len(sim.deferred)
        checks += 1
    assert checks > 100
    times = [t for t, *_ in sim.events_log]
    assert times == sorted(times)


def test_random_episodes_pass_validity(canonical):
    rng = np.random.default_rng(19)
    job, res = canonical
    for _ in range(10):
        cfg = SimConfig(
            scale=float(rng.choice([500.0, 100.0, 50.0])),
            sim_length=600.0,
            capacity=12,
            sigma=float(rng.choice([0.0, 0.25])),
            prefill=bool(rng.random() < 0.5),
            seed=int(rng.integers(0, 1_000_000)),
        )
        sched = [HeftScheduler(job, res), FifoScheduler(), RandomScheduler(cfg.seed)][
            int(rng.integers(0, 3))
        ]
        sim = Simulator(job, res, cfg, sched)
        sim.run()
        verify_schedule(sim.record, job, res, injected_at=injected_map(sim))


def test_random_profile_episodes_pass_validity():
    rng = np.random.default_rng(29)
    for _ in range(10):
        job, res = random_instance(rng, n_tasks=8, n_pes=4)
        cfg = SimConfig(
            scale=60.0, sim_length=700.0, capacity=5,
            sigma=float(rng.choice([0.0, 0.25])), seed=int(rng.integers(0, 10**6)),
        )
        sim = Simulator(job, res, cfg, FifoScheduler())
        sim.run()
        verify_schedule(sim.record, job, res, injected_at=injected_map(sim))


def test_event_log_format(canonical):
    job, res = canonical
    cfg = SimConfig(scale=None, sim_length=200.0, capacity=1, prefill=True, seed=0,
                    record_events=True)
    sim = Simulator(job, res, cfg, HeftScheduler(job, res))
    sim.run()
    text = event_log_text(sim)
    lines = text.strip().splitlines()
    assert lines, "event log should not be empty"
    for ln in lines:
        clock, kind, job_f, task_f, pe_f = ln.split(" ")
        float(clock)
        assert kind in {"inject", "ready", "decision", "assign", "start",
                        "complete", "job-done", "noop", "defer"}
