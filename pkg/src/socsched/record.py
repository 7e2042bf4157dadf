"""Schedule records: per-task placement entries and their export formats."""

from __future__ import annotations

import json
from dataclasses import dataclass, field


@dataclass(frozen=True)
class RecordEntry:
    job_seq: int
    task_id: int
    pe_id: int
    start: float
    finish: float


@dataclass
class ScheduleRecord:
    """The realized schedule: one (job, task, pe, start, finish) per task."""

    entries: list[RecordEntry] = field(default_factory=list)

    def add(self, job_seq, task_id, pe_id, start, finish):
        self.entries.append(RecordEntry(job_seq, task_id, pe_id, float(start), float(finish)))

    def sorted_entries(self) -> list[RecordEntry]:
        return sorted(
            self.entries, key=lambda e: (e.start, e.pe_id, e.job_seq, e.task_id)
        )

    def makespan(self) -> float:
        return max((e.finish for e in self.entries), default=0.0)

    def __len__(self):
        return len(self.entries)


GANTT_HEADER = "job,task,pe,start,finish"


def gantt_csv(record: ScheduleRecord) -> str:
    """CSV with fixed 6-decimal times; deterministic row order."""
    lines = [GANTT_HEADER]
    for e in record.sorted_entries():
        lines.append(
            f"{e.job_seq},{e.task_id},{e.pe_id},{e.start:.6f},{e.finish:.6f}"
        )
    return "\n".join(lines) + "\n"


def parse_gantt_csv(text: str) -> ScheduleRecord:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != GANTT_HEADER:
        raise ValueError(f"bad gantt CSV header, expected {GANTT_HEADER!r}")
    record = ScheduleRecord()
    for ln in lines[1:]:
        job, task, pe, start, finish = ln.split(",")
        record.add(int(job), int(task), int(pe), float(start), float(finish))
    return record


def gantt_plot_json(record: ScheduleRecord) -> str:
    """Plot-ready JSON: entries grouped per PE, sorted by start time."""
    by_pe: dict[int, list[dict]] = {}
    for e in record.sorted_entries():
        by_pe.setdefault(e.pe_id, []).append(
            {
                "job": e.job_seq,
                "task": e.task_id,
                "start": round(e.start, 6),
                "finish": round(e.finish, 6),
            }
        )
    payload = {"pes": [{"pe": pe, "tasks": by_pe[pe]} for pe in sorted(by_pe)]}
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"
