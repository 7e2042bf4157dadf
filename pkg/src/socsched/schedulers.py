"""Task-ordering policies pluggable into the simulator.

A scheduler is any object with ``order(sim, ready) -> list`` returning a
permutation of ``ready``.  Optional hooks (``notify_completion``,
``notify_noop``, ``episode_end``) let stateful policies track the episode.
"""

from __future__ import annotations

import numpy as np

from .heft import compute_upward_ranks, heft_order
from .profiles import JobProfile, ResourceProfile


class HeftScheduler:
    """Orders the ready queue by descending upward rank."""

    def __init__(self, job: JobProfile, res: ResourceProfile):
        self.ranks = compute_upward_ranks(job, res)

    def order(self, sim, ready):
        return heft_order(ready, self.ranks)


class FifoScheduler:
    """Injection order: ascending (job_seq, task_id)."""

    def order(self, sim, ready):
        return sorted(ready, key=lambda t: (t.job_seq, t.task_id))


class RandomScheduler:
    """Uniformly random permutation from a dedicated stream."""

    def __init__(self, seed: int = 0):
        self.rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, 17])))

    def order(self, sim, ready):
        perm = self.rng.permutation(len(ready))
        return [ready[i] for i in perm]


def make_scheduler(name: str, job, res, seed: int = 0, **kwargs):
    """Factory used by the experiment harness; 'neural' needs extra kwargs."""
    if name == "heft":
        return HeftScheduler(job, res)
    if name == "fifo":
        return FifoScheduler()
    if name == "random":
        return RandomScheduler(seed)
    if name == "neural":
        from .agent import NeuralScheduler

        return NeuralScheduler.for_eval(job, res, seed=seed, **kwargs)
    raise ValueError(f"unknown scheduler {name!r}")
