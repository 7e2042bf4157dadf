import numpy as np
import pytest

from socsched.profiles import (
    JobProfile,
    PeSpec,
    ResourceProfile,
    TaskSpec,
    load_bundled,
    validate_dag,
    validate_pair,
)


@pytest.fixture(scope="session")
def canonical():
    return load_bundled("canonical")


@pytest.fixture(scope="session")
def wifi():
    return load_bundled("wifi")


@pytest.fixture(scope="session")
def toy():
    return load_bundled("toy")


def make_resources(n_pes=3, n_types=3):
    return ResourceProfile(
        pes=tuple(PeSpec(i, (i % n_types) + 1) for i in range(n_pes))
    )


def random_instance(rng, n_tasks=6, n_pes=3, n_types=None, edge_prob=0.4, max_time=30):
    """A random valid (job, resources) pair for property tests.

    Every task gets a non-empty random subset of the platform's types, so
    the pair always validates.
    """
    if n_types is None:
        n_types = n_pes
    res = make_resources(n_pes, n_types)
    types = sorted({pe.type_id for pe in res.pes})
    tasks = []
    for tid in range(n_tasks):
        preds = tuple(
            (p, float(rng.integers(0, max_time)))
            for p in range(tid)
            if rng.random() < edge_prob
        )
        k = int(rng.integers(1, len(types) + 1))
        chosen = rng.choice(types, size=k, replace=False)
        exec_times = {int(t): float(rng.integers(1, max_time)) for t in chosen}
        tasks.append(TaskSpec(tid, preds, exec_times))
    job = JobProfile("rand", tuple(tasks))
    validate_dag(job)
    validate_pair(job, res)
    return job, res


def chain_job(times_by_task, comm=0.0, name="chain"):
    """A linear chain; times_by_task is a list of exec_times dicts."""
    tasks = []
    for tid, exec_times in enumerate(times_by_task):
        preds = ((tid - 1, float(comm)),) if tid > 0 else ()
        tasks.append(TaskSpec(tid, preds, dict(exec_times)))
    return JobProfile(name, tuple(tasks))
