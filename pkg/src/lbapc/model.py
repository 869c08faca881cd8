"""Domain types and unit conventions for the two-BS hybrid-energy network.

All quantities are SI: Watts, Joules, seconds, Hz, bits.  Costs are an
abstract scalar "cost" unit.  BS 1 is the energy-harvesting BS (EH-BS),
powered only by its battery; BS 2 is the hybrid BS (HES-BS), which can draw
on its battery and on the electric grid.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

# Feasibility checks compare quantities that span ~1e-13 .. 1e0.
REL_TOL = 1e-9
ABS_TOL = 1e-15

ArrayLike = Union[float, np.ndarray]


def close(a: float, b: float) -> bool:
    return abs(a - b) <= max(REL_TOL * max(abs(a), abs(b)), ABS_TOL)


def leq(a: float, b: float) -> bool:
    """``a <= b`` up to the model tolerance."""
    return a <= b or close(a, b)


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def mean_gain(path_loss_db: float = -40.0, distance_m: float = 50.0) -> float:
    """Mean channel power gain ``g0 * d**-4`` for a path-loss constant in dB."""
    return db_to_linear(path_loss_db) * distance_m ** -4


class InfeasibleDecision(AssertionError):
    """A decision broke one of the network constraints."""


class Assignment(enum.IntEnum):
    EH_BS = 0
    HES_BS = 1
    DROPPED = 2


def _readonly(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class SystemParams:
    """Static description of the network.

    Defaults reproduce the simulation setup of the reference experiments:
    four users, 1 ms slots, 2 kbit packets on 1 MHz channels, 1 W peak power
    at both BSs, 30 mW average harvesting power and w_D = 0.01.
    """

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
    eh_max_b1: float = 6e-5
    eh_max_b2: float = 6e-5
    mean_channel_gain_b1: float = field(default_factory=mean_gain)
    mean_channel_gain_b2: float = field(default_factory=mean_gain)

    def __post_init__(self):
        errors = []
        if int(self.num_users) != self.num_users or self.num_users < 1:
            errors.append(f"num_users must be a positive integer, got {self.num_users!r}")
        for name in ("n_channels_b1", "n_channels_b2"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                errors.append(f"{name} must be a positive integer, got {v!r}")
        for name in (
            "slot_len", "packet_bits", "bandwidth", "noise_power", "p_max_b1",
            "p_max_b2", "grid_cost_per_joule", "drop_cost_per_packet",
            "weight_grid", "weight_drop", "mean_channel_gain_b1",
            "mean_channel_gain_b2",
        ):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                errors.append(f"{name} must be positive and finite, got {v!r}")
        # zero harvesting is a legitimate (degenerate) scenario
        for name in ("eh_max_b1", "eh_max_b2"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                errors.append(f"{name} must be non-negative and finite, got {v!r}")
        if errors:
            raise ValueError("; ".join(errors))

    @property
    def phi_g(self) -> float:
        """Weighted grid energy cost per Joule."""
        return self.weight_grid * self.grid_cost_per_joule

    @property
    def phi_d(self) -> float:
        """Weighted cost per dropped packet."""
        return self.weight_drop * self.drop_cost_per_packet

    @property
    def snr_threshold(self) -> float:
        # SNR needed to push R bits through one slot of one channel
        return 2.0 ** (self.packet_bits / (self.bandwidth * self.slot_len)) - 1.0

    def p_max(self, bs: int) -> float:
        return self.p_max_b1 if bs == 1 else self.p_max_b2

    def eh_max(self, bs: int) -> float:
        return self.eh_max_b1 if bs == 1 else self.eh_max_b2

    def n_channels(self, bs: int) -> int:
        return self.n_channels_b1 if bs == 1 else self.n_channels_b2


@dataclass(frozen=True)
class ControlParams:
    """LBAPC tuning: battery output floors, the V weight and the perturbations."""

    eps_h1: float
    eps_h2: float
    v_param: float
    theta1: float
    theta2: float

    def validate(self, params: SystemParams) -> None:
        from lbapc.controller import compute_theta

        if not 0 < self.eps_h1 <= params.p_max_b1:
            raise ValueError(f"eps_h1 must lie in (0, p_max_b1], got {self.eps_h1}")
        if not 0 < self.eps_h2 <= params.p_max_b2:
            raise ValueError(f"eps_h2 must lie in (0, p_max_b2], got {self.eps_h2}")
        if not (0 < self.v_param < math.inf):
            raise ValueError(f"v_param must be positive and finite, got {self.v_param}")
        lo1, lo2 = compute_theta(params, self.eps_h1, self.eps_h2, self.v_param)
        if not leq(lo1, self.theta1):
            raise ValueError(f"theta1={self.theta1} is below its lower bound {lo1}")
        if not leq(lo2, self.theta2):
            raise ValueError(f"theta2={self.theta2} is below its lower bound {lo2}")

    @classmethod
    def from_bounds(cls, params: SystemParams, eps_h1: float, eps_h2: float,
                    v_param: float, theta1: Optional[float] = None,
                    theta2: Optional[float] = None) -> "ControlParams":
        """Build with theta at its minimal compliant value unless overridden."""
        from lbapc.controller import compute_theta

        t1, t2 = compute_theta(params, eps_h1, eps_h2, v_param)
        ctrl = cls(eps_h1, eps_h2, v_param,
                   t1 if theta1 is None else theta1,
                   t2 if theta2 is None else theta2)
        ctrl.validate(params)
        return ctrl

    def theta(self, bs: int) -> float:
        return self.theta1 if bs == 1 else self.theta2


@dataclass(frozen=True)
class SlotObservation:
    gains_b1: np.ndarray
    gains_b2: np.ndarray
    harvestable_b1: float
    harvestable_b2: float

    def __post_init__(self):
        object.__setattr__(self, "gains_b1", _readonly(self.gains_b1))
        object.__setattr__(self, "gains_b2", _readonly(self.gains_b2))
        if self.gains_b1.shape != self.gains_b2.shape or self.gains_b1.ndim != 1:
            raise ValueError("gain vectors must be 1-D and of equal length")
        if (self.gains_b1 < 0).any() or (self.gains_b2 < 0).any():
            raise ValueError("channel gains must be non-negative")
        if self.harvestable_b1 < 0 or self.harvestable_b2 < 0:
            raise ValueError("harvestable energy must be non-negative")

    @property
    def num_users(self) -> int:
        return self.gains_b1.shape[0]


@dataclass(frozen=True)
class Decision:
    assign: tuple  # of Assignment, one per user
    p_h1: np.ndarray
    p_h2: np.ndarray
    p_g: np.ndarray
    e1: float = 0.0
    e2: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "assign", tuple(Assignment(a) for a in self.assign))
        for name in ("p_h1", "p_h2", "p_g"):
            object.__setattr__(self, name, _readonly(getattr(self, name)))

    @classmethod
    def all_dropped(cls, num_users: int, e1: float = 0.0, e2: float = 0.0) -> "Decision":
        z = np.zeros(num_users)
        return cls((Assignment.DROPPED,) * num_users, z, z, z, e1, e2)

    @property
    def num_users(self) -> int:
        return len(self.assign)

    @property
    def drops(self) -> int:
        return sum(a is Assignment.DROPPED for a in self.assign)

    def served_by(self, who: Assignment) -> list:
        return [k for k, a in enumerate(self.assign) if a is who]

    def harvested_output(self, bs: int) -> float:
        """Total battery output power at a BS (W)."""
        return float(self.p_h1.sum() if bs == 1 else self.p_h2.sum())

    def with_harvest(self, e1: float, e2: float) -> "Decision":
        return Decision(self.assign, self.p_h1, self.p_h2, self.p_g, e1, e2)


@dataclass(frozen=True)
class NetworkState:
    battery_b1: float = 0.0
    battery_b2: float = 0.0
    slot_index: int = 0

    def __post_init__(self):
        if self.battery_b1 < 0 or self.battery_b2 < 0:
            raise ValueError(
                f"negative battery level ({self.battery_b1}, {self.battery_b2}) at slot {self.slot_index}"
            )

    def battery(self, bs: int) -> float:
        return self.battery_b1 if bs == 1 else self.battery_b2


@dataclass(frozen=True)
class SlotCost:
    grid_energy: float
    drops: int
    nsc: float


@dataclass(frozen=True)
class SlotProblem:
    """Everything the per-slot optimisation needs for one slot."""

    obs: SlotObservation
    vq1: float
    vq2: float
    params: SystemParams
    ctrl: ControlParams
    rho_b1: np.ndarray
    rho_b2: np.ndarray

    @classmethod
    def build(cls, obs: SlotObservation, vq1: float, vq2: float,
              params: SystemParams, ctrl: ControlParams) -> "SlotProblem":
        return cls(obs, float(vq1), float(vq2), params, ctrl,
                   _readonly(channel_inversion_power(obs.gains_b1, params)),
                   _readonly(channel_inversion_power(obs.gains_b2, params)))


def throughput(h: ArrayLike, p: ArrayLike, params: SystemParams) -> ArrayLike:
    """Bits delivered in one slot on one channel with gain ``h`` and power ``p``."""
    r = params.bandwidth * params.slot_len * np.log2(
        1.0 + np.asarray(h, dtype=float) * np.asarray(p, dtype=float) / params.noise_power
    )
    return float(r) if np.ndim(r) == 0 else r


def channel_inversion_power(h: ArrayLike, params: SystemParams) -> ArrayLike:
    """Smallest power whose throughput is exactly one packet.

    Zero gain maps to ``inf`` so that an unservable user never passes a
    power-budget test.
    """
    h = np.asarray(h, dtype=float)
    with np.errstate(divide="ignore"):
        rho = np.where(h > 0, params.snr_threshold * params.noise_power / np.where(h > 0, h, 1.0), np.inf)
    return float(rho) if rho.ndim == 0 else rho


def slot_cost(d: Decision, params: SystemParams) -> SlotCost:
    grid_energy = float(d.p_g.sum()) * params.slot_len
    drops = d.drops
    return SlotCost(grid_energy, drops, params.phi_g * grid_energy + params.phi_d * drops)


def bapc_objective(d: Decision, vq1: float, vq2: float, v_param: float,
                   params: SystemParams) -> float:
    """Per-slot assignment/power objective, drop term counted per dropped user.

    ``-vq1*sum(p_h1)*tau - vq2*sum(p_h2)*tau + V*(phi_g*sum(p_g)*tau + phi_d*drops)``
    """
    tau = params.slot_len
    return (-vq1 * float(d.p_h1.sum()) * tau - vq2 * float(d.p_h2.sum()) * tau
            + v_param * (params.phi_g * float(d.p_g.sum()) * tau + params.phi_d * d.drops))


def harvest_objective(e1: float, e2: float, vq1: float, vq2: float) -> float:
    return vq1 * e1 + vq2 * e2


def validate_decision(d: Decision, obs: SlotObservation, params: SystemParams,
                      ctrl: Optional[ControlParams] = None) -> None:
    """Raise :class:`InfeasibleDecision` unless ``d`` meets every per-slot constraint.

    With ``ctrl`` given, the battery output totals must also sit in
    ``{0} U [eps, p_max]``.
    """
    K = params.num_users
    if d.num_users != K or obs.num_users != K:
        raise InfeasibleDecision(f"expected {K} users, decision has {d.num_users}")
    if (d.p_h1 < 0).any() or (d.p_h2 < 0).any() or (d.p_g < 0).any():
        raise InfeasibleDecision("negative power")
    if not (0 <= d.e1 and leq(d.e1, obs.harvestable_b1) and 0 <= d.e2 and leq(d.e2, obs.harvestable_b2)):
        raise InfeasibleDecision("harvested more than the arriving energy")
    for k, a in enumerate(d.assign):
        if a is not Assignment.EH_BS and d.p_h1[k] > 0:
            raise InfeasibleDecision(f"user {k} gets EH-BS power but is not served by it")
        if a is not Assignment.HES_BS and (d.p_h2[k] > 0 or d.p_g[k] > 0):
            raise InfeasibleDecision(f"user {k} gets HES-BS power but is not served by it")
        if a is Assignment.EH_BS:
            r = throughput(obs.gains_b1[k], d.p_h1[k], params)
        elif a is Assignment.HES_BS:
            r = throughput(obs.gains_b2[k], d.p_h2[k] + d.p_g[k], params)
        else:
            continue
        if not leq(params.packet_bits, r):
            raise InfeasibleDecision(f"user {k} throughput {r} below packet size")
    if len(d.served_by(Assignment.EH_BS)) > params.n_channels_b1:
        raise InfeasibleDecision("EH-BS channel budget exceeded")
    if len(d.served_by(Assignment.HES_BS)) > params.n_channels_b2:
        raise InfeasibleDecision("HES-BS channel budget exceeded")
    s1 = float(d.p_h1.sum())
    s2 = float(d.p_h2.sum())
    if not leq(s1, params.p_max_b1):
        raise InfeasibleDecision(f"EH-BS peak power exceeded: {s1}")
    if not leq(s2 + float(d.p_g.sum()), params.p_max_b2):
        raise InfeasibleDecision("HES-BS peak power exceeded")
    if ctrl is not None:
        for bs, s, eps in ((1, s1, ctrl.eps_h1), (2, s2, ctrl.eps_h2)):
            if s != 0.0 and not leq(eps, s):
                raise InfeasibleDecision(f"battery output {s} at BS {bs} inside (0, eps)")
