"""Independent schedule validity verifier.

Checks a ScheduleRecord directly against the profile data, with no code
shared with either the simulator or the list schedulers, so it can serve
as an oracle for both.  Checked properties:

  * non-preemption: each (job, task) appears exactly once,
  * positive-length intervals on supporting PEs only,
  * per-PE non-overlap of intervals,
  * precedence: a task starts no earlier than each predecessor's finish,
    plus the edge communication cost when the two run on different PEs,
  * optionally, no task starts before its job was injected.
"""

from __future__ import annotations

from .profiles import JobProfile, ResourceProfile
from .record import ScheduleRecord


class ScheduleInvalid(AssertionError):
    pass


def verify_schedule(
    record: ScheduleRecord,
    job: JobProfile,
    res: ResourceProfile,
    injected_at: dict[int, float] | None = None,
    require_complete_jobs: bool = False,
    eps: float = 1e-9,
) -> None:
    """Raise ScheduleInvalid with a description of the first violation.

    ``injected_at`` maps job_seq to injection time; when given, tasks of a
    job must not start before it.  ``require_complete_jobs`` additionally
    demands that every job present in the record has all profile tasks
    scheduled (single-job static schedules want this, simulation episodes
    truncated by the horizon do not).
    """
    seen: dict[tuple[int, int], tuple[int, float, float]] = {}
    by_pe: dict[int, list[tuple[float, float, tuple[int, int]]]] = {}
    pe_types = {pe.pe_id: pe.type_id for pe in res.pes}

    for e in record.entries:
        key = (e.job_seq, e.task_id)
        if key in seen:
            raise ScheduleInvalid(f"task {key} scheduled more than once")
        if e.task_id not in job.by_id:
            raise ScheduleInvalid(f"task {key} not part of job profile '{job.name}'")
        if e.pe_id not in pe_types:
            raise ScheduleInvalid(f"task {key} placed on unknown pe {e.pe_id}")
        spec = job.by_id[e.task_id]
        if pe_types[e.pe_id] not in spec.exec_times:
            raise ScheduleInvalid(
                f"task {key} placed on pe {e.pe_id} of unsupporting type "
                f"{pe_types[e.pe_id]}"
            )
        if not e.finish > e.start:
            raise ScheduleInvalid(f"task {key} has empty or inverted interval")
        if injected_at is not None:
            st = injected_at.get(e.job_seq)
            if st is None:
                raise ScheduleInvalid(f"job {e.job_seq} has no injection time")
            if e.start < st - eps:
                raise ScheduleInvalid(
                    f"task {key} starts at {e.start} before job injection {st}"
                )
        seen[key] = (e.pe_id, e.start, e.finish)
        by_pe.setdefault(e.pe_id, []).append((e.start, e.finish, key))

    for pe_id, intervals in by_pe.items():
        intervals.sort()
        for (s0, f0, k0), (s1, f1, k1) in zip(intervals, intervals[1:]):
            if s1 < f0 - eps:
                raise ScheduleInvalid(
                    f"pe {pe_id}: tasks {k0} [{s0}, {f0}) and {k1} [{s1}, {f1}) overlap"
                )

    for (job_seq, task_id), (pe_id, start, _finish) in seen.items():
        spec = job.by_id[task_id]
        for pred, cost in spec.predecessors:
            pkey = (job_seq, pred)
            if pkey not in seen:
                raise ScheduleInvalid(
                    f"task {(job_seq, task_id)} scheduled but predecessor {pred} is not"
                )
            ppe, _pstart, pfinish = seen[pkey]
            bound = pfinish + (cost if ppe != pe_id else 0.0)
            if start < bound - eps:
                raise ScheduleInvalid(
                    f"task {(job_seq, task_id)} starts at {start} before "
                    f"predecessor {pred} allows ({bound})"
                )

    if require_complete_jobs:
        jobs_present = {e.job_seq for e in record.entries}
        want = {t.task_id for t in job.tasks}
        for js in jobs_present:
            have = {tid for (seq, tid) in seen if seq == js}
            if have != want:
                raise ScheduleInvalid(
                    f"job {js} incomplete: missing tasks {sorted(want - have)}"
                )
