"""Task scheduling workbench for heterogeneous system-on-chip platforms:
profile definitions, a discrete-event simulator, list schedulers, a
trainable neural task-ordering policy, and an experiment harness.
"""

from .heft import (
    brute_force_optimal,
    compute_upward_ranks,
    heft_order,
    heft_static_schedule,
)
from .profiles import (
    JobProfile,
    ProfileError,
    ResourceProfile,
    TaskSpec,
    load_bundled,
    mean_exec_time,
    parse_profiles,
    validate_dag,
)
from .record import ScheduleRecord, gantt_csv
from .simulator import (
    NoiseModel,
    SchedulerContractError,
    SimConfig,
    Simulator,
    draw_exec_time,
    init_pseudo_steady_state,
    run_episode,
)
from .validity import ScheduleInvalid, verify_schedule

__version__ = "0.1.0"

__all__ = [
    "JobProfile",
    "NoiseModel",
    "ProfileError",
    "ResourceProfile",
    "ScheduleInvalid",
    "ScheduleRecord",
    "SchedulerContractError",
    "SimConfig",
    "Simulator",
    "TaskSpec",
    "brute_force_optimal",
    "compute_upward_ranks",
    "draw_exec_time",
    "gantt_csv",
    "heft_order",
    "heft_static_schedule",
    "init_pseudo_steady_state",
    "load_bundled",
    "mean_exec_time",
    "parse_profiles",
    "run_episode",
    "validate_dag",
    "verify_schedule",
]
