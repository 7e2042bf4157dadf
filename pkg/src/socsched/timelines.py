"""Per-PE occupancy timelines and earliest-finish-time task placement.

This is the PE manager shared by every scheduler in the package: given a
task ordering, each task is mapped to the supporting PE that minimizes
its finish time, with insertion into idle gaps between already placed
intervals when a gap is long enough.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass

from .profiles import ResourceProfile, TaskSpec


class PeTimeline:
    """Sorted, non-overlapping occupied intervals [start, finish) on one PE."""

    __slots__ = ("intervals",)

    def __init__(self):
        self.intervals: list[tuple[float, float]] = []

    def avail(self) -> float:
        """End of the last occupied interval (0 when empty)."""
        return self.intervals[-1][1] if self.intervals else 0.0

    def earliest_start(self, length: float, lower_bound: float, insertion: bool = True) -> float:
        """Earliest start >= lower_bound for a task of the given length.

        With insertion enabled the first idle gap that fits is used; finish
        time is monotone in start for a fixed PE, so first fit is also
        best finish.  Without insertion the task goes after the last
        interval.
        """
        if not insertion or not self.intervals:
            return max(self.avail(), lower_bound)
        prev_end = 0.0
        for s, f in self.intervals:
            gap_start = max(prev_end, lower_bound)
            if gap_start + length <= s:
                return gap_start
            prev_end = f
        return max(prev_end, lower_bound)

    def insert(self, start: float, finish: float) -> None:
        i = bisect.bisect_left(self.intervals, (start, finish))
        self.intervals.insert(i, (start, finish))

    def remove(self, start: float, finish: float) -> None:
        self.intervals.remove((start, finish))

    def snapshot(self) -> tuple[tuple[float, float], ...]:
        return tuple(self.intervals)


@dataclass(frozen=True)
class PredFinish:
    """A completed predecessor as the PE manager sees it."""

    finish: float
    pe_id: int
    comm_cost: float


def data_ready_time(preds: list[PredFinish], pe_id: int, ref_time: float = 0.0) -> float:
    """Earliest moment the task's inputs are available on the given PE.

    Communication cost is paid only across distinct PEs.  With no
    predecessors this is the reference time (0 for static scheduling, the
    current clock inside the simulator).
    """
    t = ref_time
    for p in preds:
        arrival = p.finish + (p.comm_cost if p.pe_id != pe_id else 0.0)
        if arrival > t:
            t = arrival
    return t


def est(
    preds: list[PredFinish],
    pe_id: int,
    timelines: dict[int, PeTimeline],
    ref_time: float = 0.0,
) -> float:
    """Earliest start on a PE ignoring gap insertion: max(avail, data ready)."""
    return max(timelines[pe_id].avail(), data_ready_time(preds, pe_id, ref_time))


def eft_select(
    task: TaskSpec,
    preds: list[PredFinish],
    timelines: dict[int, PeTimeline],
    res: ResourceProfile,
    ref_time: float = 0.0,
    insertion: bool = True,
    commit: bool = True,
) -> tuple[int, float, float]:
    """Place a task on the supporting PE with the earliest finish time.

    Ties go to the lowest PE id.  When ``commit`` is set the chosen
    interval is recorded on that PE's timeline.
    """
    best = None
    for pe in res.pes:
        w = task.exec_times.get(pe.type_id)
        if w is None:
            continue
        ready = data_ready_time(preds, pe.pe_id, ref_time)
        start = timelines[pe.pe_id].earliest_start(w, ready, insertion)
        finish = start + w
        if best is None or finish < best[2]:
            best = (pe.pe_id, start, finish)
    if best is None:
        raise ValueError(f"task {task.task_id} is supported by no PE")
    if commit:
        timelines[best[0]].insert(best[1], best[2])
    return best


def fresh_timelines(res: ResourceProfile) -> dict[int, PeTimeline]:
    return {pe.pe_id: PeTimeline() for pe in res.pes}
