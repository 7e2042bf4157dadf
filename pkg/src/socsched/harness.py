"""Reproducible experiment driver: evaluation sweeps, noise studies,
training runs, and artifact export.

Every run is keyed by an explicit seed list.  In comparative sweeps the
arrival stream is seeded by the seed alone, so at equal seeds every
scheduler and every noise level sees the identical job-arrival sequence.
Outputs are deterministic: running the same configuration twice yields
byte-identical files.
"""

from __future__ import annotations

import concurrent.futures
import json
import math
import os
from dataclasses import dataclass, field

from .agent import DEFAULT_STAGES, AgentConfig, Trainer
from .profiles import (
    BUNDLED,
    JobProfile,
    ResourceProfile,
    load_bundled,
    parse_profiles,
)
from .record import ScheduleRecord, gantt_csv, gantt_plot_json
from .schedulers import make_scheduler
from .simulator import SimConfig, Simulator, event_log_text, metrics_json


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    job: str = "canonical"
    resources: str = "canonical"
    scheduler: str = "heft"  # comma list allowed in noise sweeps
    sim_length: float = 10_000.0
    warmup: float = 2_000.0
    scales: list[float] = field(default_factory=lambda: [50.0])
    capacity: int = 12
    seeds: list[int] = field(default_factory=lambda: [0, 1, 2, 3, 4])
    sigma: float = 0.0
    sigmas: list[float] = field(default_factory=lambda: [0.0])
    prefill: bool = False
    events: bool = False
    out: str | None = None
    checkpoint: str | None = None
    workers: int = 1
    # training
    stages: list[tuple[float, int]] = field(default_factory=lambda: list(DEFAULT_STAGES))
    rollouts: int = 2
    lr: float = 1e-3
    beta_init: float = 1.0
    beta_decay: float = 1e-3
    beta_floor: float = 0.0
    embed_width: int = 8
    hidden: list[int] = field(default_factory=lambda: [32, 32])
    activation: str = "tanh"
    reward_scale: float = 1.0
    critic: str = "rollout-mean"
    checkpoint_every: int = 50
    resume: str | None = None

    def validate(self):
        if not self.seeds:
            raise ConfigError("seed list must not be empty")
        if self.capacity < 1:
            raise ConfigError("capacity must be >= 1")
        if not self.warmup < self.sim_length:
            raise ConfigError("warmup must be smaller than sim_length")
        if self.sigma < 0 or any(s < 0 for s in self.sigmas):
            raise ConfigError("noise sigma must be >= 0")
        if any(not s > 0 for s in self.scales):
            raise ConfigError("scales must be > 0")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    def agent_config(self, seed: int) -> AgentConfig:
        return AgentConfig(
            embed_width=self.embed_width,
            hidden=tuple(self.hidden),
            activation=self.activation,
            lr=self.lr,
            beta_init=self.beta_init,
            beta_decay=self.beta_decay,
            beta_floor=self.beta_floor,
            rollouts=self.rollouts,
            reward_scale=self.reward_scale,
            critic=self.critic,
            seed=seed,
        )

    def resolved(self) -> dict:
        out = {}
        for k, v in self.__dict__.items():
            if isinstance(v, tuple):
                v = list(v)
            out[k] = v
        return out


def load_profile_pair(job_ref: str, res_ref: str) -> tuple[JobProfile, ResourceProfile]:
    """Accepts bundled profile names or file paths."""
    if job_ref in BUNDLED and res_ref in BUNDLED:
        return load_bundled(job_ref)
    try:
        with open(job_ref, encoding="utf-8") as fh:
            job_text = fh.read()
        with open(res_ref, encoding="utf-8") as fh:
            res_text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read profile: {exc}") from exc
    return parse_profiles(job_text, res_text)


# ---------------------------------------------------------------------------
# config files: `key = value` lines, lists comma separated


def parse_config_text(text: str) -> dict:
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected 'key = value'")
        key, _, val = line.partition("=")
        values[key.strip()] = val.strip()
    return values


def _parse_stages(text: str) -> list[tuple[float, int]]:
    stages = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        scale, _, eps = part.partition(":")
        stages.append((float(scale), int(eps)))
    return stages


_LIST_FLOAT = {"scales", "sigmas"}
_LIST_INT = {"seeds", "hidden"}
_FLOATS = {
    "sim_length", "warmup", "sigma", "lr", "beta_init", "beta_decay",
    "beta_floor", "reward_scale",
}
_INTS = {"capacity", "workers", "rollouts", "embed_width", "checkpoint_every"}
_BOOLS = {"prefill", "events"}


def apply_config_values(cfg: ExperimentConfig, values: dict) -> ExperimentConfig:
    for key, val in values.items():
        if not hasattr(cfg, key):
            raise ConfigError(f"unknown config key {key!r}")
        if key == "stages":
            setattr(cfg, key, _parse_stages(val))
        elif key in _LIST_FLOAT:
            setattr(cfg, key, [float(x) for x in val.split(",") if x.strip()])
        elif key in _LIST_INT:
            setattr(cfg, key, [int(x) for x in val.split(",") if x.strip()])
        elif key in _FLOATS:
            setattr(cfg, key, float(val))
        elif key in _INTS:
            setattr(cfg, key, int(val))
        elif key in _BOOLS:
            if val.lower() not in ("true", "false", "0", "1"):
                raise ConfigError(f"config key {key!r} expects a boolean")
            setattr(cfg, key, val.lower() in ("true", "1"))
        else:
            setattr(cfg, key, val)
    return cfg


# ---------------------------------------------------------------------------
# runs


def _build_scheduler(name: str, job, res, cfg: ExperimentConfig, seed: int):
    kwargs = {}
    if name == "neural":
        kwargs = {
            "capacity": cfg.capacity,
            "checkpoint": cfg.checkpoint,
            "agent_cfg": cfg.agent_config(seed),
            "mode": "greedy",  # sampling is training-only
        }
    return make_scheduler(name, job, res, seed=seed, **kwargs)


def run_single(
    cfg: ExperimentConfig,
    scheduler_name: str,
    scale: float,
    seed: int,
    sigma: float,
) -> tuple[Simulator, dict]:
    job, res = load_profile_pair(cfg.job, cfg.resources)
    sim_cfg = SimConfig(
        scale=scale,
        sim_length=cfg.sim_length,
        warmup=cfg.warmup,
        capacity=cfg.capacity,
        sigma=sigma,
        prefill=cfg.prefill,
        seed=seed,
        arrival_seed=seed,  # paired across schedulers and sigmas
        record_events=cfg.events,
    )
    sched = _build_scheduler(scheduler_name, job, res, cfg, seed)
    sim = Simulator(job, res, sim_cfg, sched)
    sim.run()
    return sim, sim.metrics()


def _fmt(x) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    if isinstance(x, float):
        return f"{x:.6f}"
    return str(x)


def run_eval(cfg: ExperimentConfig) -> dict:
    """One row per (scheduler, scale, seed) plus per-scale aggregates.

    Returns {"rows": [...], "aggregates": [...]}; rows carry completed
    count and latency, aggregates mean and standard deviation over seeds.
    """
    cfg.validate()
    schedulers = [s.strip() for s in cfg.scheduler.split(",") if s.strip()]
    keys = [
        (sname, scale, seed)
        for sname in schedulers
        for scale in cfg.scales
        for seed in cfg.seeds
    ]

    def work(key):
        sname, scale, seed = key
        _, metrics = run_single(cfg, sname, scale, seed, cfg.sigma)
        return key, metrics

    results = {}
    if cfg.workers > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            for key, metrics in pool.map(work, keys):
                results[key] = metrics
    else:
        for key in keys:
            results[key] = work(key)[1]

    rows = []
    for key in sorted(results, key=lambda k: (k[0], -k[1], k[2])):
        sname, scale, seed = key
        m = results[key]
        rows.append(
            {
                "scheduler": sname,
                "scale": scale,
                "seed": seed,
                "completed": m["completed"],
                "latency": m["latency"],
            }
        )
    aggregates = []
    for sname in schedulers:
        for scale in sorted(cfg.scales, reverse=True):
            grp = [r for r in rows if r["scheduler"] == sname and r["scale"] == scale]
            lats = [r["latency"] for r in grp if r["latency"] is not None]
            comps = [r["completed"] for r in grp]
            aggregates.append(
                {
                    "scheduler": sname,
                    "scale": scale,
                    "mean_completed": _mean(comps),
                    "std_completed": _std(comps),
                    "mean_latency": _mean(lats),
                    "std_latency": _std(lats),
                }
            )
    return {"rows": rows, "aggregates": aggregates}


def run_noise_sweep(cfg: ExperimentConfig, sigmas: list[float] | None = None) -> dict:
    """Each scheduler under each noise level with paired seeds."""
    cfg.validate()
    sigmas = cfg.sigmas if sigmas is None else list(sigmas)
    if any(s < 0 for s in sigmas):
        raise ConfigError("noise sigma must be >= 0")
    schedulers = [s.strip() for s in cfg.scheduler.split(",") if s.strip()]
    scale = cfg.scales[0]
    keys = [
        (sname, sigma, seed)
        for sname in schedulers
        for sigma in sigmas
        for seed in cfg.seeds
    ]

    def work(key):
        sname, sigma, seed = key
        _, metrics = run_single(cfg, sname, scale, seed, sigma)
        return key, metrics

    results = {}
    if cfg.workers > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            for key, metrics in pool.map(work, keys):
                results[key] = metrics
    else:
        for key in keys:
            results[key] = work(key)[1]

    rows = []
    for key in sorted(results):
        sname, sigma, seed = key
        m = results[key]
        rows.append(
            {
                "scheduler": sname,
                "sigma": sigma,
                "scale": scale,
                "seed": seed,
                "completed": m["completed"],
                "latency": m["latency"],
            }
        )
    aggregates = []
    for sname in schedulers:
        for sigma in sigmas:
            grp = [r for r in rows if r["scheduler"] == sname and r["sigma"] == sigma]
            lats = [r["latency"] for r in grp if r["latency"] is not None]
            aggregates.append(
                {
                    "scheduler": sname,
                    "sigma": sigma,
                    "scale": scale,
                    "mean_completed": _mean([r["completed"] for r in grp]),
                    "mean_latency": _mean(lats),
                    "std_latency": _std(lats),
                }
            )
    return {"rows": rows, "aggregates": aggregates}


def _mean(xs):
    xs = list(xs)
    return sum(xs) / len(xs) if xs else None


def _std(xs):
    xs = list(xs)
    if len(xs) < 2:
        return 0.0 if xs else None
    m = sum(xs) / len(xs)
    return math.sqrt(sum((x - m) ** 2 for x in xs) / (len(xs) - 1))


def eval_table_csv(result: dict) -> str:
    lines = ["scheduler,scale,seed,completed,latency"]
    for r in result["rows"]:
        lines.append(
            f"{r['scheduler']},{_fmt(r['scale'])},{r['seed']},{r['completed']},{_fmt(r['latency'])}"
        )
    return "\n".join(lines) + "\n"


def eval_agg_csv(result: dict) -> str:
    lines = ["scheduler,scale,mean_completed,std_completed,mean_latency,std_latency"]
    for a in result["aggregates"]:
        lines.append(
            f"{a['scheduler']},{_fmt(a['scale'])},{_fmt(a['mean_completed'])},"
            f"{_fmt(a['std_completed'])},{_fmt(a['mean_latency'])},{_fmt(a['std_latency'])}"
        )
    return "\n".join(lines) + "\n"


def noise_table_csv(result: dict) -> str:
    lines = ["scheduler,sigma,scale,seed,completed,latency"]
    for r in result["rows"]:
        lines.append(
            f"{r['scheduler']},{_fmt(r['sigma'])},{_fmt(r['scale'])},{r['seed']},"
            f"{r['completed']},{_fmt(r['latency'])}"
        )
    return "\n".join(lines) + "\n"


def export_gantt(record: ScheduleRecord, path: str) -> tuple[str, str]:
    """Write the CSV and a plot-ready JSON companion; returns both paths."""
    csv_path = path if path.endswith(".csv") else path + ".csv"
    json_path = csv_path[:-4] + ".json"
    _write(csv_path, gantt_csv(record))
    _write(json_path, gantt_plot_json(record))
    return csv_path, json_path


def _write(path: str, text: str):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def write_run_artifacts(cfg: ExperimentConfig, sim: Simulator, out_dir: str) -> dict:
    """metrics.json, gantt.csv(+json), config.json, optional events.log."""
    os.makedirs(out_dir, exist_ok=True)
    paths = {}
    paths["metrics"] = os.path.join(out_dir, "metrics.json")
    _write(paths["metrics"], metrics_json(sim.metrics()))
    csv_path, json_path = export_gantt(sim.record, os.path.join(out_dir, "gantt.csv"))
    paths["gantt_csv"], paths["gantt_json"] = csv_path, json_path
    paths["config"] = os.path.join(out_dir, "config.json")
    _write(paths["config"], json.dumps(cfg.resolved(), sort_keys=True, indent=2) + "\n")
    if cfg.events:
        paths["events"] = os.path.join(out_dir, "events.log")
        _write(paths["events"], event_log_text(sim))
    return paths


TRAIN_LOG_HEADER = "episode,scale,beta,return,entropy,completed_jobs,latency"


def train_row_csv(row: dict) -> str:
    return (
        f"{row['episode']},{_fmt(float(row['scale']))},{_fmt(row['beta'])},"
        f"{_fmt(row['return'])},{_fmt(row['entropy'])},"
        f"{_fmt(row['completed_jobs'])},{_fmt(row['latency'])}"
    )


def train(cfg: ExperimentConfig) -> dict:
    """Drive curriculum training; writes the reward curve and checkpoints."""
    cfg.validate()
    job, res = load_profile_pair(cfg.job, cfg.resources)
    seed = cfg.seeds[0]
    sim_template = SimConfig(
        scale=cfg.scales[0],
        sim_length=cfg.sim_length,
        warmup=cfg.warmup,
        capacity=cfg.capacity,
        sigma=cfg.sigma,
        prefill=True,
        seed=seed,
    )
    agent_cfg = cfg.agent_config(seed)
    out_dir = cfg.out or "."
    os.makedirs(out_dir, exist_ok=True)
    ckpt = os.path.join(out_dir, "checkpoint.bin")
    if cfg.resume:
        trainer = Trainer.resume(job, res, agent_cfg, sim_template, cfg.resume)
    else:
        trainer = Trainer(job, res, agent_cfg, sim_template)
    rows = trainer.train_curriculum(
        stages=tuple(cfg.stages),
        checkpoint_path=ckpt,
        checkpoint_every=cfg.checkpoint_every,
    )
    log_path = os.path.join(out_dir, "training_log.csv")
    lines = [TRAIN_LOG_HEADER] + [train_row_csv(r) for r in rows]
    _write(log_path, "\n".join(lines) + "\n")
    _write(
        os.path.join(out_dir, "config.json"),
        json.dumps(cfg.resolved(), sort_keys=True, indent=2) + "\n",
    )
    return {"rows": rows, "checkpoint": ckpt, "log": log_path, "trainer": trainer}
