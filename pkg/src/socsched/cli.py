"""Command line entry point.

Subcommands: simulate, schedule-static, sweep, noise-sweep, train,
export-gantt.  Options can come from a config file (``--config``,
``key = value`` lines) with command line flags taking precedence.
Exit codes: 0 success, 1 configuration error, 2 runtime contract
violation.
"""

from __future__ import annotations

import argparse
import sys

from . import harness
from .harness import ConfigError, ExperimentConfig
from .heft import heft_static_schedule
from .profiles import ProfileError
from .record import gantt_csv
from .simulator import SchedulerContractError, SimConfig, Simulator


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="config file (key = value lines)")
    p.add_argument("--job", help="job profile path or bundled name")
    p.add_argument("--resources", help="resource profile path or bundled name")
    p.add_argument("--scheduler", help="heft | neural | random | fifo (comma list in sweeps)")
    p.add_argument("--scale", help="injection scale(s), comma separated")
    p.add_argument("--sim-length", dest="sim_length", type=float)
    p.add_argument("--warmup", type=float)
    p.add_argument("--capacity", type=int)
    p.add_argument("--seed", help="seed(s), comma separated")
    p.add_argument("--sigma", type=float, help="noise fraction of mean execution time")
    p.add_argument("--sigmas", help="noise sweep sigma list, comma separated")
    p.add_argument("--out", help="output directory")
    p.add_argument("--prefill", action="store_true", default=None,
                   help="start from a full job queue (pseudo steady state)")
    p.add_argument("--events", action="store_true", default=None,
                   help="export the event log")
    p.add_argument("--checkpoint", help="policy checkpoint for the neural scheduler")
    p.add_argument("--workers", type=int)


def _add_train_flags(p: argparse.ArgumentParser):
    p.add_argument("--stages", help="curriculum, e.g. 500:100,250:100,100:100,50:100")
    p.add_argument("--rollouts", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--beta-init", dest="beta_init", type=float)
    p.add_argument("--beta-decay", dest="beta_decay", type=float)
    p.add_argument("--embed-width", dest="embed_width", type=int)
    p.add_argument("--hidden", help="hidden sizes, comma separated")
    p.add_argument("--resume", help="checkpoint to resume training from")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="socsched", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name, helptext in [
        ("simulate", "run one simulation episode and export its artifacts"),
        ("schedule-static", "schedule a single job statically and print the Gantt CSV"),
        ("sweep", "evaluate over scales x seeds"),
        ("noise-sweep", "evaluate schedulers across noise levels with paired seeds"),
        ("train", "train the neural scheduler over a scale curriculum"),
        ("export-gantt", "export a single-job schedule as CSV and plot JSON"),
    ]:
        p = sub.add_parser(name, help=helptext)
        _add_common(p)
        if name == "train":
            _add_train_flags(p)
    return ap


def config_from_args(args) -> ExperimentConfig:
    cfg = ExperimentConfig()
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            harness.apply_config_values(cfg, harness.parse_config_text(fh.read()))
    flag_map = {}
    for key in (
        "job", "resources", "scheduler", "sim_length", "warmup", "capacity",
        "sigma", "out", "prefill", "events", "checkpoint", "workers",
        "rollouts", "lr", "beta_init", "beta_decay", "embed_width", "resume",
    ):
        val = getattr(args, key, None)
        if val is not None:
            flag_map[key] = val
    cfg.__dict__.update(flag_map)
    if getattr(args, "scale", None):
        cfg.scales = [float(x) for x in str(args.scale).split(",") if x.strip()]
    if getattr(args, "seed", None):
        cfg.seeds = [int(x) for x in str(args.seed).split(",") if x.strip()]
    if getattr(args, "sigmas", None):
        cfg.sigmas = [float(x) for x in str(args.sigmas).split(",") if x.strip()]
    if getattr(args, "stages", None):
        cfg.stages = harness._parse_stages(args.stages)
    if getattr(args, "hidden", None):
        cfg.hidden = [int(x) for x in str(args.hidden).split(",") if x.strip()]
    cfg.validate()
    return cfg


def cmd_simulate(cfg: ExperimentConfig) -> int:
    sim, metrics = harness.run_single(
        cfg, cfg.scheduler, cfg.scales[0], cfg.seeds[0], cfg.sigma
    )
    out = cfg.out or "."
    paths = harness.write_run_artifacts(cfg, sim, out)
    print(f"completed={metrics['completed']} latency={metrics['latency']}")
    for k, v in sorted(paths.items()):
        print(f"{k}: {v}")
    return 0


def cmd_schedule_static(cfg: ExperimentConfig) -> int:
    job, res = harness.load_profile_pair(cfg.job, cfg.resources)
    record, makespan = heft_static_schedule(job, res)
    sys.stdout.write(gantt_csv(record))
    print(f"makespan={makespan:.6f}")
    if cfg.out:
        harness.export_gantt(record, f"{cfg.out}/gantt.csv")
    return 0


def cmd_sweep(cfg: ExperimentConfig) -> int:
    result = harness.run_eval(cfg)
    table = harness.eval_table_csv(result)
    agg = harness.eval_agg_csv(result)
    sys.stdout.write(table)
    sys.stdout.write(agg)
    if cfg.out:
        harness._write(f"{cfg.out}/sweep.csv", table)
        harness._write(f"{cfg.out}/sweep_agg.csv", agg)
    return 0


def cmd_noise_sweep(cfg: ExperimentConfig) -> int:
    result = harness.run_noise_sweep(cfg)
    table = harness.noise_table_csv(result)
    sys.stdout.write(table)
    if cfg.out:
        harness._write(f"{cfg.out}/noise.csv", table)
    return 0


def cmd_train(cfg: ExperimentConfig) -> int:
    out = harness.train(cfg)
    print(f"episodes={len(out['rows'])} checkpoint={out['checkpoint']} log={out['log']}")
    return 0


def cmd_export_gantt(cfg: ExperimentConfig) -> int:
    """Single-job schedule export: static HEFT, or one greedy neural episode."""
    job, res = harness.load_profile_pair(cfg.job, cfg.resources)
    if cfg.scheduler == "heft":
        record, _ = heft_static_schedule(job, res)
    else:
        sim_cfg = SimConfig(
            scale=None, sim_length=cfg.sim_length, capacity=1, prefill=True,
            seed=cfg.seeds[0], sigma=cfg.sigma,
        )
        sched = harness._build_scheduler(cfg.scheduler, job, res, cfg, cfg.seeds[0])
        sim = Simulator(job, res, sim_cfg, sched)
        sim.run()
        record = sim.record
    out = cfg.out or "."
    csv_path, json_path = harness.export_gantt(record, f"{out}/gantt.csv")
    print(f"gantt_csv: {csv_path}")
    print(f"gantt_json: {json_path}")
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "schedule-static": cmd_schedule_static,
    "sweep": cmd_sweep,
    "noise-sweep": cmd_noise_sweep,
    "train": cmd_train,
    "export-gantt": cmd_export_gantt,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
    except (ConfigError, ProfileError, OSError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    try:
        return COMMANDS[args.command](cfg)
    except (ConfigError, ProfileError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except SchedulerContractError as exc:
        print(f"contract violation: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
