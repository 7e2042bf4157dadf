"""Workload (job DAG) and platform (PE inventory) profile definitions.

A job profile is a directed acyclic graph of tasks.  Each task carries a
map from resource-type id to execution time; a missing entry means that
resource type cannot run the task at all.  Each edge carries a
communication cost that is paid only when producer and consumer run on
different processing elements (PEs).  A resource profile lists the PE
inventory, one PE per line, each an instance of a resource type.

Profiles are immutable after construction and safe to share between
threads.

File format (whitespace separated, ``#`` starts a comment, UTF-8):

  job file:       job <name>
                  task <id> exec <type>:<time> [<type>:<time> ...]
                  edge <src> <dst> <comm_cost>
  resource file:  pe <id> type <type-id>

Unknown directives are rejected with the offending line number.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources as _importlib_resources


class ProfileError(ValueError):
    """Malformed or inconsistent profile data.

    ``line`` is the 1-based line number in the source text when the
    problem is tied to a specific line, else None.
    """

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class TaskSpec:
    """One task: predecessors with communication costs, per-type times."""

    task_id: int
    predecessors: tuple[tuple[int, float], ...]  # (pred id, comm cost)
    exec_times: dict[int, float] = field(default_factory=dict)

    def supports(self, type_id: int) -> bool:
        return type_id in self.exec_times

    @property
    def pred_ids(self) -> tuple[int, ...]:
        return tuple(p for p, _ in self.predecessors)


@dataclass(frozen=True)
class PeSpec:
    pe_id: int
    type_id: int


@dataclass(frozen=True)
class ResourceProfile:
    """The PE inventory of the simulated platform."""

    pes: tuple[PeSpec, ...]

    @property
    def type_count(self) -> int:
        return len({pe.type_id for pe in self.pes})

    @cached_property
    def by_id(self) -> dict[int, PeSpec]:
        return {pe.pe_id: pe for pe in self.pes}

    def supporting_pes(self, task: TaskSpec) -> list[PeSpec]:
        return [pe for pe in self.pes if task.supports(pe.type_id)]


@dataclass(frozen=True)
class JobProfile:
    """A named DAG of tasks."""

    name: str
    tasks: tuple[TaskSpec, ...]

    @cached_property
    def by_id(self) -> dict[int, TaskSpec]:
        return {t.task_id: t for t in self.tasks}

    @cached_property
    def successors(self) -> dict[int, tuple[tuple[int, float], ...]]:
        """Map task id -> ((successor id, comm cost), ...), ids ascending."""
        succ: dict[int, list[tuple[int, float]]] = {t.task_id: [] for t in self.tasks}
        for t in self.tasks:
            for pred, cost in t.predecessors:
                succ[pred].append((t.task_id, cost))
        return {k: tuple(sorted(v)) for k, v in succ.items()}

    @cached_property
    def entry_ids(self) -> frozenset[int]:
        return frozenset(t.task_id for t in self.tasks if not t.predecessors)

    @cached_property
    def exit_ids(self) -> frozenset[int]:
        return frozenset(tid for tid, succ in self.successors.items() if not succ)

    @cached_property
    def comm_cost(self) -> dict[tuple[int, int], float]:
        """Edge (src, dst) -> communication cost."""
        out = {}
        for t in self.tasks:
            for pred, cost in t.predecessors:
                out[(pred, t.task_id)] = cost
        return out

    def topological_order(self) -> list[int]:
        """Kahn's algorithm; ties broken by ascending task id."""
        import heapq

        indeg = {t.task_id: len(t.predecessors) for t in self.tasks}
        heap = sorted(tid for tid, d in indeg.items() if d == 0)
        heapq.heapify(heap)
        order = []
        while heap:
            tid = heapq.heappop(heap)
            order.append(tid)
            for succ, _ in self.successors[tid]:
                indeg[succ] -= 1
                if indeg[succ] == 0:
                    heapq.heappush(heap, succ)
        if len(order) != len(self.tasks):
            raise ProfileError(f"job '{self.name}' contains a cycle")
        return order


def validate_dag(job: JobProfile) -> None:
    """Check every JobProfile invariant; raise ProfileError on the first hit.

    Reported problems: empty task list, dangling predecessor ids, a cycle
    (reported as a task-id sequence), non-positive or non-finite times,
    negative or non-finite communication costs, and tasks supported by no
    resource type.
    """
    if not job.tasks:
        raise ProfileError(f"job '{job.name}' has no entry task (task list is empty)")
    ids = {t.task_id for t in job.tasks}
    if len(ids) != len(job.tasks):
        raise ProfileError(f"job '{job.name}' has duplicate task ids")
    for t in job.tasks:
        if not t.exec_times:
            raise ProfileError(
                f"task {t.task_id} is supported by no resource type"
            )
        for type_id, w in t.exec_times.items():
            if not (math.isfinite(w) and w > 0):
                raise ProfileError(
                    f"task {t.task_id}: execution time for type {type_id} "
                    f"must be finite and > 0, got {w}"
                )
        seen_preds = set()
        for pred, cost in t.predecessors:
            if pred not in ids:
                raise ProfileError(
                    f"task {t.task_id} references unknown predecessor {pred}"
                )
            if pred in seen_preds:
                raise ProfileError(
                    f"duplicate edge {pred} -> {t.task_id}"
                )
            seen_preds.add(pred)
            if not (math.isfinite(cost) and cost >= 0):
                raise ProfileError(
                    f"edge {pred} -> {t.task_id}: communication cost must be "
                    f"finite and >= 0, got {cost}"
                )
    _check_acyclic(job)
    # In a DAG every minimal node is an entry, so reachability from the
    # entry set is implied; keep the check anyway as a cheap safety net.
    reachable = set(job.entry_ids)
    frontier = list(job.entry_ids)
    while frontier:
        tid = frontier.pop()
        for succ, _ in job.successors[tid]:
            if succ not in reachable:
                reachable.add(succ)
                frontier.append(succ)
    missing = ids - reachable
    if missing:
        raise ProfileError(
            f"tasks {sorted(missing)} are unreachable from any entry task"
        )


def _check_acyclic(job: JobProfile) -> None:
    """Iterative three-color DFS; reports the first cycle as an id path."""
    WHITE, GRAY, BLACK = 0, 1, 2
    color = {t.task_id: WHITE for t in job.tasks}
    parent: dict[int, int] = {}
    for root in sorted(color):
        if color[root] != WHITE:
            continue
        stack = [(root, iter(job.successors[root]))]
        color[root] = GRAY
        while stack:
            tid, it = stack[-1]
            advanced = False
            for succ, _ in it:
                if color[succ] == GRAY:
                    cycle = [succ, tid]
                    cur = tid
                    while cur != succ:
                        cur = parent[cur]
                        cycle.append(cur)
                    cycle.reverse()
                    path = " -> ".join(str(c) for c in cycle)
                    raise ProfileError(f"cycle detected: {path}")
                if color[succ] == WHITE:
                    color[succ] = GRAY
                    parent[succ] = tid
                    stack.append((succ, iter(job.successors[succ])))
                    advanced = True
                    break
            if not advanced:
                color[tid] = BLACK
                stack.pop()


def validate_pair(job: JobProfile, res: ResourceProfile) -> None:
    """Cross-check a job against a PE inventory."""
    if not res.pes:
        raise ProfileError("resource profile lists no PEs")
    available = {pe.type_id for pe in res.pes}
    for t in job.tasks:
        missing = set(t.exec_times) - available
        if missing:
            raise ProfileError(
                f"task {t.task_id} references resource types {sorted(missing)} "
                f"with no PE in the inventory"
            )
        if not res.supporting_pes(t):
            raise ProfileError(
                f"task {t.task_id} is supported by no PE in the inventory"
            )


def mean_exec_time(task: TaskSpec, res: ResourceProfile) -> float:
    """Arithmetic mean of the task's execution time over all supporting PEs.

    PEs whose type cannot run the task are excluded, so a platform with
    several instances of one type weights that type accordingly.
    """
    times = [task.exec_times[pe.type_id] for pe in res.pes if task.supports(pe.type_id)]
    if not times:
        raise ProfileError(f"task {task.task_id} is supported by no PE")
    return sum(times) / len(times)


# ---------------------------------------------------------------------------
# parsing / serialization


def _tokens(text: str):
    """Yield (line_number, token_list) for non-empty, non-comment lines."""
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        yield lineno, line.split()


def _parse_num(token: str, lineno: int, what: str) -> float:
    try:
        value = float(token)
    except ValueError:
        raise ProfileError(f"{what}: expected a number, got {token!r}", lineno)
    if not math.isfinite(value):
        raise ProfileError(f"{what}: value must be finite, got {token!r}", lineno)
    return value


def _parse_int(token: str, lineno: int, what: str) -> int:
    try:
        return int(token)
    except ValueError:
        raise ProfileError(f"{what}: expected an integer, got {token!r}", lineno)


def parse_job_profile(text: str) -> JobProfile:
    """Parse and validate a job profile file."""
    name = None
    exec_by_task: dict[int, dict[int, float]] = {}
    order: list[int] = []
    edges: list[tuple[int, int, float, int]] = []  # src, dst, cost, lineno
    for lineno, toks in _tokens(text):
        kind = toks[0]
        if kind == "job":
            if name is not None:
                raise ProfileError("duplicate 'job' header", lineno)
            if len(toks) != 2:
                raise ProfileError("expected 'job <name>'", lineno)
            name = toks[1]
        elif kind == "task":
            if len(toks) < 4 or toks[2] != "exec":
                raise ProfileError(
                    "expected 'task <id> exec <type>:<time> ...'", lineno
                )
            tid = _parse_int(toks[1], lineno, "task id")
            if tid in exec_by_task:
                raise ProfileError(f"duplicate task id {tid}", lineno)
            times: dict[int, float] = {}
            for pair in toks[3:]:
                if ":" not in pair:
                    raise ProfileError(
                        f"expected '<type>:<time>', got {pair!r}", lineno
                    )
                ts, ws = pair.split(":", 1)
                type_id = _parse_int(ts, lineno, "resource type")
                w = _parse_num(ws, lineno, "execution time")
                if type_id in times:
                    raise ProfileError(
                        f"task {tid}: duplicate resource type {type_id}", lineno
                    )
                times[type_id] = w
            exec_by_task[tid] = times
            order.append(tid)
        elif kind == "edge":
            if len(toks) != 4:
                raise ProfileError("expected 'edge <src> <dst> <comm_cost>'", lineno)
            src = _parse_int(toks[1], lineno, "edge source")
            dst = _parse_int(toks[2], lineno, "edge destination")
            cost = _parse_num(toks[3], lineno, "communication cost")
            edges.append((src, dst, cost, lineno))
        else:
            raise ProfileError(f"unknown directive {kind!r}", lineno)
    if name is None:
        raise ProfileError("missing 'job <name>' header")
    preds: dict[int, list[tuple[int, float]]] = {tid: [] for tid in exec_by_task}
    for src, dst, cost, lineno in edges:
        if src not in exec_by_task:
            raise ProfileError(f"edge references unknown task {src}", lineno)
        if dst not in exec_by_task:
            raise ProfileError(f"edge references unknown task {dst}", lineno)
        preds[dst].append((src, cost))
    tasks = tuple(
        TaskSpec(
            task_id=tid,
            predecessors=tuple(sorted(preds[tid])),
            exec_times=exec_by_task[tid],
        )
        for tid in sorted(exec_by_task)
    )
    job = JobProfile(name=name, tasks=tasks)
    validate_dag(job)
    return job


def parse_resource_profile(text: str) -> ResourceProfile:
    """Parse and validate a resource profile file."""
    pes: list[PeSpec] = []
    seen: set[int] = set()
    for lineno, toks in _tokens(text):
        if toks[0] != "pe":
            raise ProfileError(f"unknown directive {toks[0]!r}", lineno)
        if len(toks) != 4 or toks[2] != "type":
            raise ProfileError("expected 'pe <id> type <type-id>'", lineno)
        pe_id = _parse_int(toks[1], lineno, "pe id")
        type_id = _parse_int(toks[3], lineno, "type id")
        if pe_id in seen:
            raise ProfileError(f"duplicate pe id {pe_id}", lineno)
        seen.add(pe_id)
        pes.append(PeSpec(pe_id=pe_id, type_id=type_id))
    if not pes:
        raise ProfileError("resource profile lists no PEs")
    return ResourceProfile(pes=tuple(sorted(pes, key=lambda p: p.pe_id)))


def parse_profiles(job_text: str, resource_text: str) -> tuple[JobProfile, ResourceProfile]:
    """Parse a (job, resource) file pair and cross-validate them."""
    job = parse_job_profile(job_text)
    res = parse_resource_profile(resource_text)
    validate_pair(job, res)
    return job, res


def _fmt_num(x: float) -> str:
    xf = float(x)
    if xf.is_integer() and abs(xf) < 1e15:
        return str(int(xf))
    return repr(xf)


def serialize_job_profile(job: JobProfile) -> str:
    """Canonical text form: tasks ascending, types ascending, edges sorted."""
    lines = [f"job {job.name}"]
    for t in sorted(job.tasks, key=lambda t: t.task_id):
        pairs = " ".join(
            f"{type_id}:{_fmt_num(w)}" for type_id, w in sorted(t.exec_times.items())
        )
        lines.append(f"task {t.task_id} exec {pairs}")
    edges = sorted(
        (pred, t.task_id, cost)
        for t in job.tasks
        for pred, cost in t.predecessors
    )
    for src, dst, cost in edges:
        lines.append(f"edge {src} {dst} {_fmt_num(cost)}")
    return "\n".join(lines) + "\n"


def serialize_resource_profile(res: ResourceProfile) -> str:
    lines = [f"pe {pe.pe_id} type {pe.type_id}" for pe in sorted(res.pes, key=lambda p: p.pe_id)]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# bundled profiles

BUNDLED = ("canonical", "wifi", "toy")


def bundled_profile_text(name: str, kind: str) -> str:
    """Return the raw text of a bundled profile file (kind: 'job' or 'res')."""
    fname = f"{name}.{kind}"
    ref = _importlib_resources.files("socsched").joinpath("data", fname)
    return ref.read_text(encoding="utf-8")


def load_bundled(name: str) -> tuple[JobProfile, ResourceProfile]:
    """Load one of the bundled (job, resource) pairs by name."""
    if name not in BUNDLED:
        raise ProfileError(f"no bundled profile named {name!r}; have {BUNDLED}")
    return parse_profiles(
        bundled_profile_text(name, "job"), bundled_profile_text(name, "res")
    )
