"""Online battery-aware power control for a two-BS hybrid-energy network."""

from lbapc.baselines import greedy_step
from lbapc.controller import LbapcState, run_lbapc, step
from lbapc.harness import ExperimentConfig, load_config, run, sweep
from lbapc.model import (
    Assignment, ControlParams, Decision, NetworkState, SlotObservation, SlotProblem,
    SystemParams,
)
from lbapc.per_slot import solve_outer, solve_slot

__all__ = [
    "Assignment", "ControlParams", "Decision", "ExperimentConfig", "LbapcState",
    "NetworkState", "SlotObservation", "SlotProblem", "SystemParams", "greedy_step",
    "load_config", "run", "run_lbapc", "solve_outer", "solve_slot", "step", "sweep",
]
