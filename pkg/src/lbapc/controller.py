"""The LBAPC online control loop and its parameter calculators."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from numba import njit

from lbapc.model import (
    ControlParams, Decision, NetworkState, SlotObservation, SlotProblem,
    SystemParams, leq, slot_cost,
)
from lbapc.per_slot import _DROP, _outer, solve_outer


class CausalityViolation(RuntimeError):
    """The solver asked a battery for more energy than it holds."""


class NonPositiveV(ValueError):
    pass


def compute_theta(params: SystemParams, eps_h1: float, eps_h2: float, v_param: float):
    """Smallest perturbations that keep both batteries inside ``[0, theta + E_max]``."""
    tau = params.slot_len
    cross = 0.0 if params.num_users == 1 else 1.0
    vkd = v_param * params.num_users * params.phi_d
    theta1 = params.p_max_b1 * tau + (vkd + cross * params.eh_max_b2 * params.p_max_b2 * tau) / (eps_h1 * tau)
    theta2 = params.p_max_b2 * tau + (vkd + cross * params.eh_max_b1 * params.p_max_b1 * tau) / (eps_h2 * tau)
    return theta1, theta2


def required_capacity(params: SystemParams, ctrl: ControlParams):
    return ctrl.theta1 + params.eh_max_b1, ctrl.theta2 + params.eh_max_b2


def v_from_capacity(params: SystemParams, eps_h1: float, eps_h2: float,
                    cap_b1: float, cap_b2: float) -> float:
    """Largest V whose minimal perturbations fit the given battery capacities."""
    tau = params.slot_len
    cross = 0.0 if params.num_users == 1 else 1.0
    kd = params.num_users * params.phi_d
    v1 = ((cap_b1 - params.eh_max_b1 - params.p_max_b1 * tau) * eps_h1 * tau
          - cross * params.eh_max_b2 * params.p_max_b2 * tau) / kd
    v2 = ((cap_b2 - params.eh_max_b2 - params.p_max_b2 * tau) * eps_h2 * tau
          - cross * params.eh_max_b1 * params.p_max_b1 * tau) / kd
    if v1 <= 0 or v2 <= 0:
        raise NonPositiveV(
            f"battery capacities ({cap_b1}, {cap_b2}) J are too small: V1={v1:.3g}, V2={v2:.3g}"
        )
    return min(v1, v2)


def drift_constant_C(params: SystemParams) -> float:
    tau = params.slot_len
    return 0.5 * (params.eh_max_b1 ** 2 + params.eh_max_b2 ** 2) + 0.5 * (
        (params.p_max_b1 * tau) ** 2 + (params.p_max_b2 * tau) ** 2)


def exponential_cdf(mean: float) -> Callable[[float], float]:
    return lambda x: -math.expm1(-x / mean) if x > 0 else 0.0


def empirical_cdf(samples) -> Callable[[float], float]:
    s = np.sort(np.asarray(samples, dtype=float))
    return lambda x: float(np.searchsorted(s, x, side="right")) / s.size


def nu_bound(params: SystemParams, eps_h1: float, eps_h2: float,
             channel_cdf_b1: Optional[Callable[[float], float]] = None) -> float:
    """Extra cost incurred by forbidding battery outputs in ``(0, eps)``.

    Defaults to the exponential CDF with the EH-BS mean gain.
    """
    if channel_cdf_b1 is None:
        channel_cdf_b1 = exponential_cdf(params.mean_channel_gain_b1)
    eta = params.snr_threshold * params.noise_power / eps_h1
    K = params.num_users
    # 1 - F**K, written to keep precision when F is close to 1
    miss = -math.expm1(K * math.log(channel_cdf_b1(eta))) if channel_cdf_b1(eta) > 0 else 1.0
    return miss * K * params.phi_d + eps_h2 * params.slot_len * params.phi_g


def cost_bound(params: SystemParams, ctrl: ControlParams, optimum: float = 0.0,
               channel_cdf_b1=None) -> float:
    """Worst-case long-run cost ``optimum + nu + C/V``.

    The true optimum is not computable here; ``optimum=0`` gives the gap term.
    """
    return (optimum + nu_bound(params, ctrl.eps_h1, ctrl.eps_h2, channel_cdf_b1)
            + drift_constant_C(params) / ctrl.v_param)


@dataclass(frozen=True)
class LbapcState:
    net: NetworkState
    ctrl: ControlParams
    params: SystemParams

    @property
    def vq1(self) -> float:
        return self.net.battery_b1 - self.ctrl.theta1

    @property
    def vq2(self) -> float:
        return self.net.battery_b2 - self.ctrl.theta2

    @classmethod
    def initial(cls, params: SystemParams, ctrl: ControlParams) -> "LbapcState":
        ctrl.validate(params)
        return cls(NetworkState(0.0, 0.0, 0), ctrl, params)


def check_causality(net: NetworkState, d: Decision, params: SystemParams) -> None:
    """Energy causality plus the low-battery idle rule.

    A battery holding less than one slot at peak power must stay idle; with
    compliant perturbations the optimal solution guarantees it.
    """
    tau = params.slot_len
    for bs in (1, 2):
        used = d.harvested_output(bs) * tau
        level = net.battery(bs)
        if not leq(used, level):
            raise CausalityViolation(
                f"slot {net.slot_index}: BS{bs} spends {used:.6g} J with {level:.6g} J stored"
            )
        if level < params.p_max(bs) * tau and used > 0:
            raise CausalityViolation(
                f"slot {net.slot_index}: BS{bs} below p_max*tau ({level:.6g} J) but spends {used:.6g} J"
            )


def advance(net: NetworkState, d: Decision, params: SystemParams,
            capacity: Optional[tuple] = None) -> NetworkState:
    tau = params.slot_len
    b1 = net.battery_b1 - d.harvested_output(1) * tau + d.e1
    b2 = net.battery_b2 - d.harvested_output(2) * tau + d.e2
    if capacity is not None:
        b1 = min(b1, capacity[0])
        b2 = min(b2, capacity[1])
    return NetworkState(b1, b2, net.slot_index + 1)


def step(state: LbapcState, obs: SlotObservation,
         solver: Callable[[SlotProblem], Decision] = solve_outer):
    """One slot of the online algorithm: observe, decide, check, update batteries."""
    prob = SlotProblem.build(obs, state.vq1, state.vq2, state.params, state.ctrl)
    d = solver(prob)
    check_causality(state.net, d, state.params)
    net = advance(state.net, d, state.params)
    return d, slot_cost(d, state.params), LbapcState(net, state.ctrl, state.params)


@njit(cache=True)
def _lbapc_loop(g1, g2, e1, e2, c, theta1, theta2, v, phi_g, phi_d, tau, eps1, eps2,
                pmax1, pmax2, n1, n2, out_nsc, out_grid, out_drops, out_batt):
    T, K = g1.shape
    b1 = 0.0
    b2 = 0.0
    rho1 = np.empty(K)
    rho2 = np.empty(K)
    for t in range(T):
        out_batt[t, 0] = b1
        out_batt[t, 1] = b2
        for k in range(K):
            rho1[k] = c / g1[t, k] if g1[t, k] > 0 else np.inf
            rho2[k] = c / g2[t, k] if g2[t, k] > 0 else np.inf
        vq1 = b1 - theta1
        vq2 = b2 - theta2
        assign, p_h1, p_h2, p_g, _ = _outer(rho1, rho2, vq1, vq2, v, phi_g, phi_d, tau,
                                            eps1, eps2, pmax1, pmax2, n1, n2)
        used1 = p_h1.sum() * tau
        used2 = p_h2.sum() * tau
        # same tests as check_causality; the caller turns a flag into an exception
        if used1 > b1 and abs(used1 - b1) > max(1e-9 * max(abs(used1), abs(b1)), 1e-15):
            return t, 1
        if used2 > b2 and abs(used2 - b2) > max(1e-9 * max(abs(used2), abs(b2)), 1e-15):
            return t, 2
        if b1 < pmax1 * tau and used1 > 0:
            return t, 1
        if b2 < pmax2 * tau and used2 > 0:
            return t, 2
        b1 = b1 - used1 + (e1[t] if vq1 <= 0 else 0.0)
        b2 = b2 - used2 + (e2[t] if vq2 <= 0 else 0.0)
        drops = 0
        for k in range(K):
            if assign[k] == _DROP:
                drops += 1
        out_grid[t] = p_g.sum() * tau
        out_drops[t] = drops
        out_nsc[t] = phi_g * out_grid[t] + phi_d * drops
    return -1, 0


def run_lbapc(g1, g2, e1, e2, params: SystemParams, ctrl: ControlParams):
    """LBAPC over a whole sample path from empty batteries.

    Returns ``(nsc, grid_J, drops, batteries)`` with batteries recorded at the
    start of each slot.  Produces the same numbers as iterating :func:`step`.
    """
    ctrl.validate(params)
    T = g1.shape[0]
    out = (np.empty(T), np.empty(T), np.empty(T, np.int64), np.empty((T, 2)))
    t, bs = _lbapc_loop(
        np.ascontiguousarray(g1), np.ascontiguousarray(g2), e1, e2,
        params.snr_threshold * params.noise_power, ctrl.theta1, ctrl.theta2,
        ctrl.v_param, params.phi_g, params.phi_d, params.slot_len, ctrl.eps_h1,
        ctrl.eps_h2, params.p_max_b1, params.p_max_b2, params.n_channels_b1,
        params.n_channels_b2, *out)
    if t >= 0:
        raise CausalityViolation(
            f"slot {t}: BS{bs} battery at {out[3][t, bs - 1]:.6g} J cannot cover its output")
    return out
