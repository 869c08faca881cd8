"""Experiment runner: config files, seeded runs, parameter sweeps and CSV output.

Config files are INI with four sections; every key is optional and falls
back to the reference experiment setup::

    [system]   num_users slot_len packet_bits bandwidth noise_power
               p_max_b1 p_max_b2 n_channels_b1 n_channels_b2
               grid_cost_per_joule drop_cost_per_packet weight_grid weight_drop
               path_loss_db distance_m [mean_channel_gain_b1 mean_channel_gain_b2]
    [scenario] eh_power_b1 eh_power_b2 (W, average harvesting power)
    [control]  eps_h1 eps_h2 v capacity_b1 capacity_b2 theta1 theta2
    [run]      policy seed slots burn_in trace replicates

With ``v`` unset and both capacities set, V is the largest value the
capacities admit.  Capacities also clip the greedy policy's batteries.
"""

from __future__ import annotations

import configparser
import csv
import dataclasses
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from typing import Optional

import numpy as np

from lbapc.baselines import greedy_step, run_greedy
from lbapc.controller import (
    LbapcState, required_capacity, run_lbapc, step, v_from_capacity,
)
from lbapc.model import ControlParams, NetworkState, SystemParams, mean_gain
from lbapc.oracle import brute_force_slot
from lbapc.per_slot import solve_outer
from lbapc.stochastic import (
    ScenarioConfig, eh_power_to_max, make_rng, observation_block, observations,
)

POLICIES = ("lbapc", "greedy", "oracle")

# sweep axis -> config fields it sets
AXES = {
    "V": ("v",),
    "eps_h": ("eps_h1", "eps_h2"),
    "P_H1": ("eh_power_b1",),
    "P_H2": ("eh_power_b2",),
    "w_D": ("weight_drop",),
    "N_B1": ("n_channels_b1",),
    "K": ("num_users", "n_channels_b2"),
}

_SECTIONS = {
    "system": (
        "num_users", "slot_len", "packet_bits", "bandwidth", "noise_power",
        "p_max_b1", "p_max_b2", "n_channels_b1", "n_channels_b2",
        "grid_cost_per_joule", "drop_cost_per_packet", "weight_grid", "weight_drop",
        "path_loss_db", "distance_m", "mean_channel_gain_b1", "mean_channel_gain_b2",
    ),
    "scenario": ("eh_power_b1", "eh_power_b2"),
    "control": ("eps_h1", "eps_h2", "v", "capacity_b1", "capacity_b2", "theta1", "theta2"),
    "run": ("policy", "seed", "slots", "burn_in", "trace", "replicates"),
}

_INT_FIELDS = {"num_users", "n_channels_b1", "n_channels_b2", "seed", "slots", "replicates"}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    # system
    num_users: int = 4
    slot_len: float = 1e-3
    packet_bits: float = 2000.0
    bandwidth: float = 1e6
    noise_power: float = 1e-13
    p_max_b1: float = 1.0
    p_max_b2: float = 1.0
    n_channels_b1: int = 4
    n_channels_b2: int = 4
    grid_cost_per_joule: float = 1.0
    drop_cost_per_packet: float = 1.0
    weight_grid: float = 5.0
    weight_drop: float = 0.01
    path_loss_db: float = -40.0
    distance_m: float = 50.0
    mean_channel_gain_b1: Optional[float] = None
    mean_channel_gain_b2: Optional[float] = None
    # scenario
    eh_power_b1: float = 0.03
    eh_power_b2: float = 0.03
    # control
    eps_h1: float = 0.04
    eps_h2: float = 0.04
    v: Optional[float] = 1e-4
    capacity_b1: Optional[float] = None
    capacity_b2: Optional[float] = None
    theta1: Optional[float] = None
    theta2: Optional[float] = None
    # run
    policy: str = "lbapc"
    seed: int = 0
    slots: int = 100_000
    burn_in: float = 0.0
    trace: bool = False
    replicates: int = 1

    def __post_init__(self):
        errors = []
        if self.policy not in POLICIES:
            errors.append(f"run.policy: must be one of {', '.join(POLICIES)}, got {self.policy!r}")
        if self.slots < 1:
            errors.append(f"run.slots: must be at least 1, got {self.slots}")
        if not 0.0 <= self.burn_in < 1.0:
            errors.append(f"run.burn_in: must lie in [0, 1), got {self.burn_in}")
        if self.replicates < 1:
            errors.append(f"run.replicates: must be at least 1, got {self.replicates}")
        if self.eh_power_b1 < 0 or self.eh_power_b2 < 0:
            errors.append("scenario.eh_power_b1/eh_power_b2: must be non-negative")
        if (self.capacity_b1 is None) != (self.capacity_b2 is None):
            errors.append("control.capacity_b1/capacity_b2: set both or neither")
        if self.v is None and self.capacity_b1 is None:
            errors.append("control.v: required unless both capacities are given")
        if errors:
            raise ConfigError("; ".join(errors))

    @property
    def capacity(self) -> Optional[tuple]:
        if self.capacity_b1 is None:
            return None
        return (self.capacity_b1, self.capacity_b2)

    def system(self) -> SystemParams:
        g = mean_gain(self.path_loss_db, self.distance_m)
        try:
            return SystemParams(
                num_users=self.num_users, slot_len=self.slot_len,
                packet_bits=self.packet_bits, bandwidth=self.bandwidth,
                noise_power=self.noise_power, p_max_b1=self.p_max_b1,
                p_max_b2=self.p_max_b2, n_channels_b1=self.n_channels_b1,
                n_channels_b2=self.n_channels_b2,
                grid_cost_per_joule=self.grid_cost_per_joule,
                drop_cost_per_packet=self.drop_cost_per_packet,
                weight_grid=self.weight_grid, weight_drop=self.weight_drop,
                eh_max_b1=eh_power_to_max(self.eh_power_b1, self.slot_len),
                eh_max_b2=eh_power_to_max(self.eh_power_b2, self.slot_len),
                mean_channel_gain_b1=self.mean_channel_gain_b1 or g,
                mean_channel_gain_b2=self.mean_channel_gain_b2 or g,
            )
        except ValueError as exc:
            raise ConfigError(f"system: {exc}") from exc

    def control(self, params: Optional[SystemParams] = None) -> ControlParams:
        params = params or self.system()
        try:
            v = self.v
            if v is None:
                v = v_from_capacity(params, self.eps_h1, self.eps_h2,
                                    self.capacity_b1, self.capacity_b2)
            return ControlParams.from_bounds(params, self.eps_h1, self.eps_h2, v,
                                             self.theta1, self.theta2)
        except ValueError as exc:
            raise ConfigError(f"control: {exc}") from exc

    def with_axis(self, axis: str, value) -> "ExperimentConfig":
        if axis not in AXES:
            raise ConfigError(f"unknown sweep axis {axis!r}; choose from {', '.join(AXES)}")
        return dataclasses.replace(self, **{f: _coerce(f, value) for f in AXES[axis]})

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)


def _coerce(name: str, value):
    if name in _INT_FIELDS:
        f = float(value)
        if f != int(f):
            raise ConfigError(f"{name}: expected an integer, got {value!r}")
        return int(f)
    if name == "trace":
        return value if isinstance(value, bool) else str(value).lower() in ("1", "true", "yes", "on")
    if name == "policy":
        return str(value)
    return float(value)


def load_config(path) -> ExperimentConfig:
    parser = configparser.ConfigParser()
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    values = {}
    for section in parser.sections():
        if section not in _SECTIONS:
            raise ConfigError(f"unknown section [{section}]")
        for key, raw in parser.items(section):
            if key not in _SECTIONS[section]:
                raise ConfigError(f"{section}.{key}: unknown key")
            if raw.strip().lower() in ("", "none"):
                values[key] = None
                continue
            try:
                values[key] = _coerce(key, raw)
            except ValueError as exc:
                raise ConfigError(f"{section}.{key}: cannot parse {raw!r}") from exc
    return ExperimentConfig(**values)


@dataclass
class RunMetrics:
    policy: str
    seed: int
    replicate: int
    slots: int
    time_avg_nsc: float
    grid_power_avg: float
    drop_ratio: float
    battery_mean: tuple
    battery_max: tuple
    battery_min: tuple
    v_param: Optional[float] = None
    theta: Optional[tuple] = None
    required_capacity: Optional[tuple] = None
    battery_trace: Optional[np.ndarray] = field(default=None, repr=False)
    nsc_trace: Optional[np.ndarray] = field(default=None, repr=False)
    slot_nsc: Optional[np.ndarray] = field(default=None, repr=False)
    slot_grid: Optional[np.ndarray] = field(default=None, repr=False)
    slot_drops: Optional[np.ndarray] = field(default=None, repr=False)


def run(cfg: ExperimentConfig, replicate: int = 0, keep_trace: Optional[bool] = None,
        compiled: bool = True) -> RunMetrics:
    """Simulate ``cfg.slots`` slots of ``cfg.policy`` on the seeded scenario.

    Policies sharing a seed and replicate see the same channel and energy
    sample path.  ``compiled=False`` walks the slot-by-slot reference loop
    instead of the fused kernels (the oracle always does).
    """
    keep_trace = cfg.trace if keep_trace is None else keep_trace
    params = cfg.system()
    T = cfg.slots
    rng = make_rng(cfg.seed, replicate)
    scenario = ScenarioConfig.from_params(params, cfg.seed, T)
    ctrl = None if cfg.policy == "greedy" else cfg.control(params)

    if compiled and cfg.policy != "oracle":
        path = observation_block(rng, scenario, params, T)
        if ctrl is None:
            nsc, grid, drops, batt = run_greedy(*path, params, cfg.capacity)
        else:
            nsc, grid, drops, batt = run_lbapc(*path, params, ctrl)
    else:
        nsc = np.empty(T)
        grid = np.empty(T)
        drops = np.empty(T, dtype=np.int64)
        batt = np.empty((T, 2))
        if ctrl is None:
            state = NetworkState()
            for t, obs in enumerate(observations(rng, scenario, params)):
                batt[t] = state.battery_b1, state.battery_b2
                _, cost, state = greedy_step(state, obs, params, cfg.capacity)
                nsc[t], grid[t], drops[t] = cost.nsc, cost.grid_energy, cost.drops
        else:
            solver = brute_force_slot if cfg.policy == "oracle" else solve_outer
            lstate = LbapcState.initial(params, ctrl)
            for t, obs in enumerate(observations(rng, scenario, params)):
                batt[t] = lstate.net.battery_b1, lstate.net.battery_b2
                _, cost, lstate = step(lstate, obs, solver)
                nsc[t], grid[t], drops[t] = cost.nsc, cost.grid_energy, cost.drops

    start = int(math.floor(cfg.burn_in * T))
    if start >= T:
        start = T - 1
    n = T - start
    metrics = RunMetrics(
        policy=cfg.policy, seed=cfg.seed, replicate=replicate, slots=T,
        time_avg_nsc=float(nsc[start:].mean()),
        grid_power_avg=float(grid[start:].sum() / (n * params.slot_len)),
        drop_ratio=float(drops[start:].sum() / (n * params.num_users)),
        battery_mean=tuple(float(x) for x in batt[start:].mean(axis=0)),
        battery_max=tuple(float(x) for x in batt.max(axis=0)),
        battery_min=tuple(float(x) for x in batt.min(axis=0)),
    )
    if ctrl is not None:
        metrics.v_param = ctrl.v_param
        metrics.theta = (ctrl.theta1, ctrl.theta2)
        metrics.required_capacity = required_capacity(params, ctrl)
    if keep_trace:
        metrics.battery_trace = batt
        metrics.nsc_trace = np.cumsum(nsc) / np.arange(1, T + 1)
        metrics.slot_nsc = nsc
        metrics.slot_grid = grid
        metrics.slot_drops = drops
    return metrics


def _run_point(args):
    cfg, replicate = args
    return run(cfg, replicate, keep_trace=False)


def sweep(cfg: ExperimentConfig, axis: str, values, policies=None, jobs: int = 1):
    """One run per (value, policy, replicate) on a common seed.

    Returns ``[(value, RunMetrics), ...]`` sorted by value, policy, replicate.
    """
    policies = list(policies or [cfg.policy])
    tasks = []
    for value in values:
        point = cfg.with_axis(axis, value)
        for policy in policies:
            for r in range(cfg.replicates):
                tasks.append((value, point.replace(policy=policy), r))
    args = [(c, r) for _, c, r in tasks]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_point, args))
    else:
        results = [_run_point(a) for a in args]
    rows = [(float(v), m) for (v, _, _), m in zip(tasks, results)]
    order = {p: i for i, p in enumerate(policies)}
    rows.sort(key=lambda vm: (vm[0], order[vm[1].policy], vm[1].replicate))
    return rows


def csv_schema() -> dict:
    return json.loads(resources.files("lbapc").joinpath("csv_schema.json").read_text())


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def summary_row(m: RunMetrics, axis: str = "", value=None) -> dict:
    cap = m.required_capacity or (None, None)
    theta = m.theta or (None, None)
    return {
        "axis": axis, "value": value, "policy": m.policy, "seed": m.seed,
        "replicate": m.replicate, "slots": m.slots, "time_avg_nsc": m.time_avg_nsc,
        "grid_power_avg": m.grid_power_avg, "drop_ratio": m.drop_ratio,
        "battery_mean_b1": m.battery_mean[0], "battery_mean_b2": m.battery_mean[1],
        "battery_max_b1": m.battery_max[0], "battery_max_b2": m.battery_max[1],
        "v_param": m.v_param, "theta1": theta[0], "theta2": theta[1],
        "required_capacity_b1": cap[0], "required_capacity_b2": cap[1],
    }


def write_summary(path, rows) -> None:
    """``rows`` are ``(axis, value, RunMetrics)`` triples."""
    columns = [c["name"] for c in csv_schema()["summary"]]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for axis, value, m in rows:
            row = summary_row(m, axis, value)
            w.writerow([_fmt(row[c]) for c in columns])


def write_trace(path, m: RunMetrics) -> None:
    if m.battery_trace is None:
        raise ValueError("run was executed without trace recording")
    columns = [c["name"] for c in csv_schema()["trace"]]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for t in range(m.slots):
            w.writerow([t, repr(float(m.battery_trace[t, 0])), repr(float(m.battery_trace[t, 1])),
                        repr(float(m.slot_nsc[t])), repr(float(m.slot_grid[t])),
                        int(m.slot_drops[t]), repr(float(m.nsc_trace[t]))])


def trace_name(m: RunMetrics, axis: str = "", value=None) -> str:
    tag = f"_{axis}={value}" if axis else ""
    return f"trace_{m.policy}{tag}_seed{m.seed}_r{m.replicate}.csv"
