"""Trainable task-ordering scheduler.

The agent observes the queued jobs as DAGs, embeds them with two levels
of message passing (per-node over descendants, then per-job and global
summaries), concatenates normalized per-task features, and scores every
ready task with a policy head.  An ordering is produced by sampling the
scored tasks without replacement; the shared PE manager then maps the
ordering onto PEs.  Training is policy gradient with an entropy bonus
and a baseline computed across rollouts that share one job-arrival
sequence.

Rewards follow the ongoing-duration form: at any instant the reward is
minus the summed durations of all injected jobs (completed ones frozen,
running ones measured up to the clock) divided by the completed count,
zero until the first completion.  Each decision's reward is read at the
earlier of its first own task completion and the next decision; when a
completion replenishes nothing the environment books a forced no-op and
overwrites the latest decision's reward at that instant.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field, replace

import numpy as np

from .autodiff import (
    Mlp,
    ParamSet,
    Tensor2,
    add,
    add_n,
    concat_cols,
    constant,
    masked_entropy,
    masked_log_softmax,
    mul,
    pick,
    sub,
)
from .profiles import JobProfile, ResourceProfile, mean_exec_time
from .simulator import SimConfig, Simulator


def _stream(*keys: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(list(keys))))


def _derive_seed(*keys: int) -> int:
    return int(np.random.SeedSequence(list(keys)).generate_state(1, np.uint64)[0] >> 1)


# ---------------------------------------------------------------------------
# configuration and normalization


@dataclass
class AgentConfig:
    embed_width: int = 8
    hidden: tuple[int, ...] = (32, 32)
    activation: str = "tanh"
    lr: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    beta_init: float = 1.0   # entropy weight at episode 0
    beta_decay: float = 1e-3  # per-episode linear decay
    beta_floor: float = 0.0
    rollouts: int = 2        # per update; >= 2 for the shared-arrival baseline
    reward_scale: float = 1.0
    critic: str = "rollout-mean"  # or "learned"
    seed: int = 0

    def validate(self):
        if self.embed_width < 4:
            raise ValueError("embed_width must be >= 4 (raw node features are 4-wide)")
        if self.critic not in ("rollout-mean", "learned"):
            raise ValueError(f"unknown critic {self.critic!r}")
        if self.rollouts < 2 and self.critic == "rollout-mean":
            raise ValueError("rollout-mean baseline needs >= 2 rollouts per update")


class FeatureScales:
    """Profile-derived constants used to keep every feature in [0, 1]."""

    def __init__(self, job: JobProfile, res: ResourceProfile):
        self.n_tasks = len(job.tasks)
        self.means = {t.task_id: mean_exec_time(t, res) for t in job.tasks}
        self.t_ref = max(self.means.values())
        self.job_time_ref = self.n_tasks * self.t_ref
        self.out_degree = {tid: len(s) for tid, s in job.successors.items()}
        self.max_outdeg = max(1, max(self.out_degree.values()))
        # Transitive descendant sets, used for the remaining-work feature.
        desc: dict[int, set[int]] = {}
        for tid in reversed(job.topological_order()):
            acc: set[int] = set()
            for s, _ in job.successors[tid]:
                acc.add(s)
                acc |= desc[s]
            desc[tid] = acc
        self.descendants = {tid: frozenset(v) for tid, v in desc.items()}


@dataclass(frozen=True)
class StateLayout:
    """Fixed flat-state geometry for one (profile, platform, capacity)."""

    phi_len: int
    width: int
    max_ready: int
    max_nodes: int
    max_jobs: int
    n_tasks: int

    @property
    def total(self) -> int:
        return self.phi_len * self.max_ready + self.width * (
            self.max_nodes + self.max_jobs + 1
        )

    @classmethod
    def build(cls, job: JobProfile, res: ResourceProfile, capacity: int, width: int):
        n = len(job.tasks)
        return cls(
            phi_len=len(res.pes) + capacity + 2,
            width=width,
            max_ready=capacity * n,
            max_nodes=capacity * n,
            max_jobs=capacity,
            n_tasks=n,
        )


def _squash(x: float, ref: float) -> float:
    return x / (x + ref) if x > 0 else 0.0


def node_features(sim_jobs, job: JobProfile, scales: FeatureScales, width: int):
    """Raw per-node features for every task of every queued job.

    Per node: mean execution time, out-degree, count of not-yet-completed
    descendants, and a ready flag, each normalized to [0, 1] and
    zero-padded to the embedding width.
    """
    feats: dict[tuple[int, int], np.ndarray] = {}
    for ji in sim_jobs:
        for t in job.tasks:
            tid = t.task_id
            ti = ji.tasks[tid]
            live_desc = sum(
                1 for d in scales.descendants[tid] if ji.tasks[d].status != "completed"
            )
            x = np.zeros((1, width))
            x[0, 0] = scales.means[tid] / scales.t_ref
            x[0, 1] = scales.out_degree[tid] / scales.max_outdeg
            x[0, 2] = live_desc / max(1, scales.n_tasks - 1)
            x[0, 3] = 1.0 if ti.status == "ready" else 0.0
            feats[(ji.job_seq, tid)] = x
    return feats


def task_features(sim: Simulator, ti, scales: FeatureScales, capacity: int) -> np.ndarray:
    """Normalized per-ready-task feature row (phi).

    Sections: per-PE remaining busy time (squashed), one-hot queue slot of
    the task's job, elapsed duration of that job (squashed), and the
    fraction of its tasks still incomplete.
    """
    n_pes = len(sim.pe_ids)
    phi = np.zeros(n_pes + capacity + 2)
    for i, pe_id in enumerate(sim.pe_ids):
        running = sim.pe_running[pe_id]
        if running is not None:
            rem = running.start + running.drawn - sim.clock
            phi[i] = _squash(max(0.0, rem), scales.t_ref)
    slot = next(i for i, j in enumerate(sim.job_queue) if j.job_seq == ti.job_seq)
    phi[n_pes + slot] = 1.0
    phi[n_pes + capacity] = _squash(sim.clock - ti.job.injected_at, scales.job_time_ref)
    phi[n_pes + capacity + 1] = ti.job.remaining / scales.n_tasks
    return phi


# ---------------------------------------------------------------------------
# networks and embeddings


class Networks:
    """All trainable parts: message passing, summaries, policy, critic."""

    def __init__(self, cfg: AgentConfig, layout: StateLayout, params: ParamSet | None = None):
        cfg.validate()
        self.cfg = cfg
        self.layout = layout
        self.params = params if params is not None else ParamSet(cfg.seed)
        w = cfg.embed_width
        hid = list(cfg.hidden)

        def mk(name: str, n_in: int, n_out: int) -> Mlp:
            return Mlp(self.params, name, [n_in] + hid + [n_out], cfg.activation)

        self.node_f = mk("node_f", w, w)
        self.node_g = mk("node_g", w, w)
        self.job_f = mk("job_f", w, w)
        self.job_g = mk("job_g", w, w)
        self.glob_f = mk("glob_f", w, w)
        self.glob_g = mk("glob_g", w, w)
        self.policy = mk("policy", layout.phi_len + 3 * w, 1)
        if cfg.critic == "learned":
            self.value = mk("value", layout.total, 1)


@dataclass
class GraphEmbedding:
    """Per-node vectors, per-job summaries, and the global summary."""

    node: dict[tuple[int, int], Tensor2]
    job: dict[int, Tensor2]
    glob: Tensor2
    width: int


def embed_jobs(
    nets: Networks,
    job_profile: JobProfile,
    job_seqs: list[int],
    feats: dict[tuple[int, int], np.ndarray],
) -> GraphEmbedding:
    """Bottom-up message passing over each queued job, then summaries.

    Per node: e = g(sum over successor embeddings of f(e)) + x, computed
    successors-first so each message is final before use; the empty
    aggregate is the zero vector.  Aggregation order is canonical
    (ascending ids) to keep runs bit-for-bit reproducible.  With no
    queued jobs the global summary is defined as the zero vector.
    """
    w = nets.cfg.embed_width
    zero = np.zeros((1, w))
    node: dict[tuple[int, int], Tensor2] = {}
    per_job: dict[int, Tensor2] = {}
    rev_topo = list(reversed(job_profile.topological_order()))
    for js in sorted(job_seqs):
        for tid in rev_topo:
            succ = [s for s, _ in job_profile.successors[tid]]
            if succ:
                agg = add_n([nets.node_f(node[(js, s)]) for s in sorted(succ)])
            else:
                agg = constant(zero)
            node[(js, tid)] = add(nets.node_g(agg), constant(feats[(js, tid)]))
        per_job[js] = nets.job_g(
            add_n([nets.job_f(node[(js, t.task_id)]) for t in job_profile.tasks])
        )
    if per_job:
        glob = nets.glob_g(add_n([nets.glob_f(per_job[js]) for js in sorted(per_job)]))
    else:
        glob = constant(zero)
    return GraphEmbedding(node=node, job=per_job, glob=glob, width=w)


@dataclass
class StateView:
    """One decision's observation: flat vector plus per-task policy inputs."""

    flat: np.ndarray
    ready_keys: list[tuple[int, int]]
    per_task_inputs: list[Tensor2]


def build_state(
    embedding: GraphEmbedding,
    layout: StateLayout,
    job_seqs: list[int],
    task_ids: list[int],
    ready_keys: list[tuple[int, int]],
    phis: list[np.ndarray],
) -> StateView:
    """Assemble the fixed-layout state vector and the per-task views.

    Layout: max_ready slots of phi, then node-embedding slots (queue slot
    major, task id minor), then per-job summary slots, then the global
    summary.  Absent slots stay zero.
    """
    if len(ready_keys) > layout.max_ready:
        raise ValueError("more ready tasks than the layout allows")
    flat = np.zeros(layout.total)
    for i, phi in enumerate(phis):
        flat[i * layout.phi_len : (i + 1) * layout.phi_len] = phi
    off = layout.phi_len * layout.max_ready
    ordered_jobs = sorted(job_seqs)
    tid_index = {tid: k for k, tid in enumerate(sorted(task_ids))}
    for qpos, js in enumerate(ordered_jobs):
        for tid, k in tid_index.items():
            slot = qpos * layout.n_tasks + k
            flat[off + slot * layout.width : off + (slot + 1) * layout.width] = (
                embedding.node[(js, tid)].values[0]
            )
    off += layout.width * layout.max_nodes
    for qpos, js in enumerate(ordered_jobs):
        flat[off + qpos * layout.width : off + (qpos + 1) * layout.width] = (
            embedding.job[js].values[0]
        )
    off += layout.width * layout.max_jobs
    flat[off : off + layout.width] = embedding.glob.values[0]

    per_task = []
    job_of = {key: key[0] for key in ready_keys}
    for key, phi in zip(ready_keys, phis):
        per_task.append(
            concat_cols(
                [
                    constant(phi.reshape(1, -1)),
                    embedding.node[key],
                    embedding.job[job_of[key]],
                    embedding.glob,
                ]
            )
        )
    return StateView(flat=flat, ready_keys=list(ready_keys), per_task_inputs=per_task)


def select_ordering(
    nets: Networks,
    state: StateView,
    mode: str = "greedy",
    rng: np.random.Generator | None = None,
    forced: list[int] | None = None,
):
    """Order the ready set by repeated masked-softmax selection.

    Scores every candidate once, then draws without replacement (sample
    mode) or takes argmaxes (greedy mode, ties to the lowest canonical
    index).  Returns (chosen indices, summed log-probability, summed
    entropy); the last two are graph nodes usable for gradients.
    """
    n = len(state.per_task_inputs)
    if n == 0:
        raise ValueError("ready set is empty")
    logits = concat_cols([nets.policy(x) for x in state.per_task_inputs])
    mask = np.ones(n, dtype=bool)
    chosen: list[int] = []
    logp_terms: list[Tensor2] = []
    ent_terms: list[Tensor2] = []
    for step in range(n):
        logp = masked_log_softmax(logits, mask)
        ent_terms.append(masked_entropy(logp, mask))
        if forced is not None:
            idx = forced[step]
            if not mask[idx]:
                raise ValueError("forced action already taken")
        elif mode == "sample":
            probs = np.where(mask, np.exp(logp.values[0]), 0.0)
            probs = probs / probs.sum()
            idx = int(rng.choice(n, p=probs))
        elif mode == "greedy":
            masked_vals = np.where(mask, logp.values[0], -np.inf)
            idx = int(np.argmax(masked_vals))
        else:
            raise ValueError(f"unknown mode {mode!r}")
        logp_terms.append(pick(logp, idx))
        chosen.append(idx)
        mask = mask.copy()
        mask[idx] = False
    return chosen, add_n(logp_terms), add_n(ent_terms)


# ---------------------------------------------------------------------------
# rewards


def compute_reward(jobs_in_flight, completed_jobs, clock: float) -> float:
    """Minus the per-completion-normalized summed duration of all jobs.

    Completed jobs contribute their final duration, in-flight jobs their
    duration so far; the normalizer is the completed count.  Exactly 0
    until the first job completes.  Always <= 0.
    """
    n_done = len(completed_jobs)
    if n_done == 0:
        return 0.0
    total = 0.0
    for j in sorted(completed_jobs, key=lambda j: j.job_seq):
        total += j.completed_at - j.injected_at
    for j in sorted(jobs_in_flight, key=lambda j: j.job_seq):
        total += clock - j.injected_at
    return -total / n_done


def episode_reward(sim: Simulator) -> float:
    return compute_reward(sim.job_queue, sim.completed_jobs, sim.clock)


def truncate_rewards(
    reward_samples: list[tuple[float, float]],
    decision_times: list[float],
    first_completion_times: list[float | None],
    noop_times: list[float],
    end_time: float,
) -> list[float]:
    """Align a per-event reward stream to agent decisions.

    Decision k's reward is the stream value at min(next decision time,
    first completion among its own tasks); the last decision reads at the
    episode end.  Each no-op re-reads the stream at its own time and
    overwrites the latest decision at or before it.
    """
    samples = sorted(reward_samples)
    times = [t for t, _ in samples]
    values = [v for _, v in samples]

    def value_at(t: float) -> float:
        i = bisect.bisect_right(times, t) - 1
        return values[i] if i >= 0 else 0.0

    out = []
    for k, t in enumerate(decision_times):
        t_next = decision_times[k + 1] if k + 1 < len(decision_times) else end_time
        t_hat = first_completion_times[k]
        t_read = t_next if t_hat is None else min(t_next, t_hat)
        out.append(value_at(t_read))
    for tau in sorted(noop_times):
        k = bisect.bisect_right(decision_times, tau) - 1
        if k >= 0:
            out[k] = value_at(tau)
    return out


# ---------------------------------------------------------------------------
# trajectories and the scheduler callback


@dataclass
class Transition:
    """Everything needed to replay one decision under current parameters."""

    time: float
    job_seqs: list[int]
    node_feats: dict[tuple[int, int], np.ndarray]
    ready_keys: list[tuple[int, int]]
    phis: list[np.ndarray]
    chosen: list[int]
    assigned: frozenset[tuple[int, int]]
    flat_state: np.ndarray
    reward: float | None = None
    # Graph nodes from the rollout forward pass; valid only until the next
    # parameter step, reused by the updater to avoid a second embedding.
    cached: tuple[Tensor2, Tensor2] | None = None


@dataclass
class Trajectory:
    transitions: list[Transition] = field(default_factory=list)

    def returns(self, reward_scale: float = 1.0) -> np.ndarray:
        r = np.array([t.reward if t.reward is not None else 0.0 for t in self.transitions])
        return np.cumsum((r * reward_scale)[::-1])[::-1]

    def __len__(self):
        return len(self.transitions)


class NeuralScheduler:
    """Scheduler callback wrapping the policy; optionally records rollouts."""

    def __init__(
        self,
        job: JobProfile,
        res: ResourceProfile,
        nets: Networks,
        capacity: int,
        mode: str = "greedy",
        rng: np.random.Generator | None = None,
        record: bool = False,
    ):
        self.job_profile = job
        self.res = res
        self.nets = nets
        self.capacity = capacity
        self.mode = mode
        self.rng = rng if rng is not None else _stream(nets.cfg.seed, 23)
        self.record = record
        self.scales = FeatureScales(job, res)
        self.trajectory = Trajectory()
        self.noop_times: list[float] = []

    @classmethod
    def for_eval(
        cls,
        job: JobProfile,
        res: ResourceProfile,
        seed: int = 0,
        capacity: int = 12,
        checkpoint: str | None = None,
        agent_cfg: AgentConfig | None = None,
        mode: str = "greedy",
    ) -> "NeuralScheduler":
        cfg = agent_cfg if agent_cfg is not None else AgentConfig(seed=seed)
        layout = StateLayout.build(job, res, capacity, cfg.embed_width)
        params = ParamSet.load(checkpoint) if checkpoint else None
        nets = Networks(cfg, layout, params=params)
        return cls(job, res, nets, capacity, mode=mode, rng=_stream(seed, 23))

    # --- simulator hooks ---------------------------------------------------

    def order(self, sim: Simulator, ready):
        self._finalize_pending(sim)
        snapshot = self._snapshot(sim, ready)
        state = self._build_state(snapshot)
        chosen, logp, ent = select_ordering(self.nets, state, self.mode, self.rng)
        if self.record:
            self.trajectory.transitions.append(
                Transition(
                    time=sim.clock,
                    job_seqs=snapshot["job_seqs"],
                    node_feats=snapshot["feats"],
                    ready_keys=snapshot["ready_keys"],
                    phis=snapshot["phis"],
                    chosen=chosen,
                    assigned=frozenset(snapshot["ready_keys"][i] for i in chosen),
                    flat_state=state.flat,
                    cached=(logp, ent),
                )
            )
        return [ready[i] for i in chosen]

    def notify_completion(self, sim: Simulator, ti):
        tr = self._last()
        if tr is not None and tr.reward is None and ti.key in tr.assigned:
            tr.reward = episode_reward(sim)

    def notify_noop(self, sim: Simulator):
        self.noop_times.append(sim.clock)
        tr = self._last()
        if tr is not None:
            tr.reward = episode_reward(sim)

    def episode_end(self, sim: Simulator):
        self._finalize_pending(sim)

    def _last(self) -> Transition | None:
        t = self.trajectory.transitions
        return t[-1] if t else None

    def _finalize_pending(self, sim: Simulator):
        tr = self._last()
        if tr is not None and tr.reward is None:
            tr.reward = episode_reward(sim)

    # --- observation building ----------------------------------------------

    def _snapshot(self, sim: Simulator, ready) -> dict:
        job_seqs = sorted(j.job_seq for j in sim.job_queue)
        feats = node_features(sim.job_queue, self.job_profile, self.scales, self.nets.cfg.embed_width)
        ready_keys = [ti.key for ti in ready]
        phis = [task_features(sim, ti, self.scales, self.capacity) for ti in ready]
        return {"job_seqs": job_seqs, "feats": feats, "ready_keys": ready_keys, "phis": phis}

    def _build_state(self, snapshot: dict) -> StateView:
        emb = embed_jobs(self.nets, self.job_profile, snapshot["job_seqs"], snapshot["feats"])
        return build_state(
            emb,
            self.nets.layout,
            snapshot["job_seqs"],
            [t.task_id for t in self.job_profile.tasks],
            snapshot["ready_keys"],
            snapshot["phis"],
        )

    def replay(self, transition: Transition):
        """Rebuild the decision graph under the current parameters."""
        emb = embed_jobs(
            self.nets, self.job_profile, transition.job_seqs, transition.node_feats
        )
        state = build_state(
            emb,
            self.nets.layout,
            transition.job_seqs,
            [t.task_id for t in self.job_profile.tasks],
            transition.ready_keys,
            transition.phis,
        )
        _, logp, ent = select_ordering(self.nets, state, forced=transition.chosen)
        return state, logp, ent


# ---------------------------------------------------------------------------
# training


def compute_advantages(
    group: list[Trajectory], reward_scale: float = 1.0
) -> list[np.ndarray]:
    """Per-step advantages against the cross-rollout mean return.

    All trajectories in the group saw the same arrival sequence.  At step
    indices where fewer than two rollouts are still alive the advantage
    is 0; where all are alive, advantages sum to 0 across the group.
    """
    returns = [traj.returns(reward_scale) for traj in group]
    out = [np.zeros(len(r)) for r in returns]
    max_len = max((len(r) for r in returns), default=0)
    for t in range(max_len):
        alive = [i for i, r in enumerate(returns) if len(r) > t]
        if len(alive) < 2:
            continue
        b = sum(returns[i][t] for i in alive) / len(alive)
        for i in alive:
            out[i][t] = returns[i][t] - b
    return out


def objective_loss(
    groups: list[list[tuple[NeuralScheduler, Trajectory]]],
    nets: Networks,
    beta: float,
    use_cache: bool = True,
    ent_out: list | None = None,
) -> Tensor2 | None:
    """The negated policy-gradient objective as a graph node.

    Per decision: minus log-probability times advantage, minus beta times
    the policy entropy; the advantage baseline is the mean return across
    the group's rollouts (or the learned value head, trained on a squared
    error, when configured).  Advantages are data, not graph nodes.  With
    ``use_cache`` the rollout's forward graphs are reused; pass False
    whenever parameters may have changed since the rollout.
    """
    cfg = nets.cfg
    loss_terms = []
    n_traj = 0
    for group in groups:
        if len(group) < 2 and cfg.critic == "rollout-mean":
            raise ValueError("rollout-mean baseline needs >= 2 rollouts per group")
        trajs = [traj for _, traj in group]
        if cfg.critic == "rollout-mean":
            advantages = compute_advantages(trajs, cfg.reward_scale)
        else:
            advantages = [traj.returns(cfg.reward_scale) for traj in trajs]
        for (sched, traj), adv in zip(group, advantages):
            n_traj += 1
            for k, tr in enumerate(traj.transitions):
                if use_cache and tr.cached is not None:
                    logp, ent = tr.cached
                else:
                    _, logp, ent = sched.replay(tr)
                a_k = float(adv[k])
                if cfg.critic == "learned":
                    v = nets.value(constant(tr.flat_state.reshape(1, -1)))
                    a_k = a_k - v.item()
                    diff = sub(v, constant([[float(adv[k])]]))
                    loss_terms.append(mul(mul(diff, diff), 0.5))
                loss_terms.append(mul(logp, -a_k))
                loss_terms.append(mul(ent, -beta))
                if ent_out is not None:
                    ent_out.append(ent.item())
    if not loss_terms:
        return None
    return mul(add_n(loss_terms), 1.0 / max(1, n_traj))


def policy_update(
    groups: list[list[tuple[NeuralScheduler, Trajectory]]],
    nets: Networks,
    beta: float,
) -> dict:
    """One gradient ascent step on the policy-gradient objective."""
    cfg = nets.cfg
    ent_values: list[float] = []
    loss = objective_loss(groups, nets, beta, use_cache=True, ent_out=ent_values)
    if loss is None:
        return {"loss": 0.0, "entropy": 0.0, "grad_norm": 0.0}
    nets.params.zero_grad()
    loss.backward()
    diag = {
        "loss": loss.item(),
        "entropy": float(np.mean(ent_values)) if ent_values else 0.0,
        "grad_norm": nets.params.grad_norm(),
    }
    nets.params.adam_step(cfg.lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps)
    return diag


DEFAULT_STAGES: tuple[tuple[float, int], ...] = ((500, 50), (250, 50), (100, 50), (50, 50))


class Trainer:
    """Curriculum training driver over decreasing injection scales."""

    def __init__(
        self,
        job: JobProfile,
        res: ResourceProfile,
        agent_cfg: AgentConfig,
        sim_template: SimConfig,
        params: ParamSet | None = None,
        start_episode: int = 0,
    ):
        agent_cfg.validate()
        self.job = job
        self.res = res
        self.cfg = agent_cfg
        self.sim_template = sim_template
        layout = StateLayout.build(job, res, sim_template.capacity, agent_cfg.embed_width)
        self.nets = Networks(agent_cfg, layout, params=params)
        self.episode = start_episode

    def beta(self) -> float:
        return max(self.cfg.beta_floor, self.cfg.beta_init - self.cfg.beta_decay * self.episode)

    def _rollout(self, scale: float, rollout_idx: int):
        seed = self.cfg.seed
        cfg = replace(
            self.sim_template,
            scale=scale,
            prefill=True,
            seed=_derive_seed(seed, self.episode, rollout_idx, 5),
            arrival_seed=_derive_seed(seed, self.episode, 7),
        )
        sched = NeuralScheduler(
            self.job,
            self.res,
            self.nets,
            capacity=cfg.capacity,
            mode="sample",
            rng=_stream(seed, self.episode, rollout_idx, 23),
            record=True,
        )
        sim = Simulator(self.job, self.res, cfg, sched)
        sim.run()
        return sched, sim

    def train_episode(self, scale: float) -> dict:
        """Roll out, update, and report one curriculum episode."""
        group = []
        returns = []
        completed = []
        latencies = []
        for r in range(self.cfg.rollouts):
            sched, sim = self._rollout(scale, r)
            group.append((sched, sched.trajectory))
            returns.append(float(sched.trajectory.returns(1.0)[0]) if len(sched.trajectory) else 0.0)
            m = sim.metrics()
            completed.append(m["completed"])
            latencies.append(m["latency"] if m["latency"] is not None else float("nan"))
        beta = self.beta()
        diag = policy_update([group], self.nets, beta)
        finite_lat = [x for x in latencies if x == x]
        row = {
            "episode": self.episode,
            "scale": scale,
            "beta": beta,
            "return": float(np.mean(returns)),
            "entropy": diag["entropy"],
            "completed_jobs": float(np.mean(completed)),
            "latency": float(np.mean(finite_lat)) if finite_lat else float("nan"),
        }
        self.episode += 1
        return row

    def train_curriculum(
        self,
        stages: tuple[tuple[float, int], ...] = DEFAULT_STAGES,
        checkpoint_path: str | None = None,
        checkpoint_every: int = 50,
        log=None,
    ) -> list[dict]:
        """Run every stage, warm-starting each from the previous parameters.

        Returns the per-episode reward-curve rows; optionally checkpoints
        every N episodes and at the end (stage recorded in the sidecar).
        """
        rows = []
        planned = sum(n for _, n in stages)
        done = 0
        for stage_idx, (scale, n_episodes) in enumerate(stages):
            for _ in range(n_episodes):
                row = self.train_episode(scale)
                rows.append(row)
                if log is not None:
                    log(row)
                done += 1
                if checkpoint_path and (
                    done == planned or (checkpoint_every and done % checkpoint_every == 0)
                ):
                    self.save(checkpoint_path, stage_idx, scale)
        if checkpoint_path and planned == 0:
            self.save(checkpoint_path, -1, float("nan"))
        return rows

    def save(self, path: str, stage_idx: int, scale: float):
        self.nets.params.save(
            path,
            meta={
                "episode": self.episode,
                "stage": stage_idx,
                "scale": scale if scale == scale else None,
                "beta": self.beta(),
                "agent_config": {
                    "embed_width": self.cfg.embed_width,
                    "hidden": list(self.cfg.hidden),
                    "activation": self.cfg.activation,
                    "lr": self.cfg.lr,
                    "beta_init": self.cfg.beta_init,
                    "beta_decay": self.cfg.beta_decay,
                    "beta_floor": self.cfg.beta_floor,
                    "rollouts": self.cfg.rollouts,
                    "reward_scale": self.cfg.reward_scale,
                    "critic": self.cfg.critic,
                    "seed": self.cfg.seed,
                },
            },
        )

    @classmethod
    def resume(
        cls,
        job: JobProfile,
        res: ResourceProfile,
        agent_cfg: AgentConfig,
        sim_template: SimConfig,
        checkpoint_path: str,
    ) -> "Trainer":
        import json as _json

        params = ParamSet.load(checkpoint_path)
        with open(checkpoint_path + ".json", encoding="utf-8") as fh:
            meta = _json.load(fh)
        return cls(
            job,
            res,
            agent_cfg,
            sim_template,
            params=params,
            start_episode=int(meta.get("episode", 0)),
        )
