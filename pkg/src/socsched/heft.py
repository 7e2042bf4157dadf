"""List scheduling: upward ranks, HEFT ordering, and a brute-force oracle.

The upward rank of a task is the length of the critical path from the
task to an exit node, measured with mean execution times over the PE
inventory and the per-edge communication costs.  Scheduling tasks in
descending upward rank and mapping each onto the PE that finishes it
earliest (with gap insertion) is the HEFT algorithm.
"""

from __future__ import annotations

from .profiles import JobProfile, ResourceProfile, mean_exec_time
from .record import ScheduleRecord
from .timelines import PredFinish, data_ready_time, eft_select, fresh_timelines


def compute_upward_ranks(job: JobProfile, res: ResourceProfile) -> dict[int, float]:
    """rank(i) = mean_exec(i) + max over successors j of (comm(i,j) + rank(j)).

    Exit tasks get their mean execution time.  Computed over a reverse
    topological order, so each successor's rank is final before use.
    """
    ranks: dict[int, float] = {}
    means = {t.task_id: mean_exec_time(t, res) for t in job.tasks}
    for tid in reversed(job.topological_order()):
        succ = job.successors[tid]
        tail = max((cost + ranks[s] for s, cost in succ), default=0.0)
        ranks[tid] = means[tid] + tail
    return ranks


def heft_order(ready, ranks: dict[int, float]) -> list:
    """Sort ready items by descending rank, ties by ascending identity.

    Items may be plain task ids (static mode), (job_seq, task_id) pairs,
    or task-instance objects with job_seq/task_id attributes (simulation
    mode); the rank lookup uses the task id either way.
    """

    def key(item):
        if isinstance(item, tuple):
            job_seq, task_id = item
        elif isinstance(item, int):
            job_seq, task_id = 0, item
        else:
            job_seq, task_id = item.job_seq, item.task_id
        return (-ranks[task_id], job_seq, task_id)

    return sorted(ready, key=key)


def heft_static_schedule(
    job: JobProfile, res: ResourceProfile, insertion: bool = True
) -> tuple[ScheduleRecord, float]:
    """Schedule one whole job statically; returns the record and makespan."""
    ranks = compute_upward_ranks(job, res)
    order = heft_order([t.task_id for t in job.tasks], ranks)
    timelines = fresh_timelines(res)
    placed: dict[int, tuple[float, int]] = {}  # task -> (finish, pe)
    record = ScheduleRecord()
    for tid in order:
        spec = job.by_id[tid]
        preds = [
            PredFinish(finish=placed[p][0], pe_id=placed[p][1], comm_cost=c)
            for p, c in spec.predecessors
        ]
        pe, start, finish = eft_select(
            spec, preds, timelines, res, ref_time=0.0, insertion=insertion
        )
        placed[tid] = (finish, pe)
        record.add(0, tid, pe, start, finish)
    return record, record.makespan()


class InstanceTooLarge(ValueError):
    pass


def brute_force_optimal(job: JobProfile, res: ResourceProfile, limit: int = 8) -> float:
    """Exact minimum makespan over every (topological order, PE assignment).

    Each candidate pair is executed under the same insertion-based
    placement semantics the schedulers use, so any list schedule in this
    class is dominated.  Exhaustive with branch-and-bound pruning; meant
    for test oracles on small instances only.
    """
    n = len(job.tasks)
    if n > limit:
        raise InstanceTooLarge(f"{n} tasks exceeds the brute-force limit of {limit}")

    _, heft_makespan = heft_static_schedule(job, res)
    best = heft_makespan

    succ = job.successors
    specs = job.by_id
    indeg = {t.task_id: len(t.predecessors) for t in job.tasks}
    ready = sorted(tid for tid, d in indeg.items() if d == 0)
    timelines = fresh_timelines(res)
    placed: dict[int, tuple[float, int]] = {}

    def dfs(remaining: int, cur_max: float):
        nonlocal best
        if remaining == 0:
            if cur_max < best:
                best = cur_max
            return
        # Snapshot the ready list; mutations below are undone before return.
        for tid in list(ready):
            spec = specs[tid]
            preds = [
                PredFinish(finish=placed[p][0], pe_id=placed[p][1], comm_cost=c)
                for p, c in spec.predecessors
            ]
            ready.remove(tid)
            opened = []
            for s, _ in succ[tid]:
                indeg[s] -= 1
                if indeg[s] == 0:
                    ready.append(s)
                    opened.append(s)
            tried: set[tuple[int, tuple]] = set()
            for pe in res.pes:
                w = spec.exec_times.get(pe.type_id)
                if w is None:
                    continue
                tl = timelines[pe.pe_id]
                # PEs of one type with identical occupancy are symmetric.
                sig = (pe.type_id, tl.snapshot())
                if sig in tried:
                    continue
                tried.add(sig)
                start = tl.earliest_start(w, data_ready_time(preds, pe.pe_id))
                finish = start + w
                if max(cur_max, finish) >= best:
                    continue
                tl.insert(start, finish)
                placed[tid] = (finish, pe.pe_id)
                dfs(remaining - 1, max(cur_max, finish))
                del placed[tid]
                tl.remove(start, finish)
            for s in opened:
                ready.remove(s)
            for s, _ in succ[tid]:
                indeg[s] += 1
            ready.append(tid)
        ready.sort()

    dfs(n, 0.0)
    return best
