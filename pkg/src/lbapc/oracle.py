"""Exhaustive reference solver for the per-slot problem.

Enumerates all ``3**K`` assignment vectors.  For each feasible one the
power split is found two ways: by scanning the vertices of the piecewise
linear objective in the battery output total, and by a dense grid over the
harvested fraction of the HES-BS peak power.  Shares nothing with
:mod:`lbapc.per_slot` beyond the domain model.
"""

from __future__ import annotations

import itertools
import math
import numpy as np

from lbapc.model import (
    Assignment, ControlParams, Decision, SlotProblem, SystemParams,
    bapc_objective, channel_inversion_power,
)

MAX_USERS = 6
GRID_POINTS = 2000


class OracleTooLarge(ValueError):
    pass


def _eh_side(total_rho: float, vq1: float, eps: float, pmax: float, tau: float):
    """Best battery output total at the EH-BS for a fixed served set.

    The objective ``-vq1 * S * tau`` is linear in S over
    ``[max(total_rho, eps), pmax]``, so one of the two ends wins.
    """
    candidates = [max(total_rho, eps), pmax]
    costs = [-vq1 * s * tau for s in candidates]
    i = int(np.argmin(costs))
    return candidates[i], costs[i]


def _hes_vertices(total_rho: float, vq2: float, ctrl: ControlParams,
                  params: SystemParams):
    """Vertex scan over the harvested total x at the HES-BS; grid covers the rest."""
    tau = params.slot_len
    vg = ctrl.v_param * params.phi_g
    best = None
    for x in (0.0, ctrl.eps_h2, total_rho, params.p_max_b2):
        if 0.0 < x < ctrl.eps_h2 or x > params.p_max_b2:
            continue
        g = max(0.0, total_rho - x)
        if x + g > params.p_max_b2:
            continue
        cost = -vq2 * x * tau + vg * g * tau
        if best is None or cost < best[2]:
            best = (x, g, cost)
    return best


def _hes_grid(total_rho: float, vq2: float, ctrl: ControlParams, params: SystemParams,
              n: int = GRID_POINTS):
    tau = params.slot_len
    x = np.linspace(0.0, params.p_max_b2, n)
    x = x[(x == 0.0) | (x >= ctrl.eps_h2)]
    g = np.maximum(0.0, total_rho - x)
    ok = x + g <= params.p_max_b2
    cost = np.where(ok, -vq2 * x * tau + ctrl.v_param * params.phi_g * g * tau, np.inf)
    i = int(np.argmin(cost))
    return float(x[i]), float(g[i]), float(cost[i])


def grid_gap_bound(vq2: float, ctrl: ControlParams, params: SystemParams,
                   n: int = GRID_POINTS) -> float:
    """Worst-case excess of the grid scan over the vertex scan."""
    step = params.p_max_b2 / (n - 1)
    return (abs(vq2) + ctrl.v_param * params.phi_g) * step * params.slot_len


def _assemble(assign, rho1, rho2, s1, x, g, e1, e2, K) -> Decision:
    p_h1 = np.zeros(K)
    p_h2 = np.zeros(K)
    p_g = np.zeros(K)
    eh = [k for k in range(K) if assign[k] is Assignment.EH_BS]
    hes = [k for k in range(K) if assign[k] is Assignment.HES_BS]
    if eh:
        tot = sum(rho1[k] for k in eh)
        for k in eh:
            p_h1[k] = rho1[k] / tot * s1
    if hes:
        tot = sum(rho2[k] for k in hes)
        for k in hes:
            share = rho2[k] / tot
            p_h2[k] = share * x
            # grid only tops up to channel inversion; surplus harvest is spread
            p_g[k] = share * g
    return Decision(assign, p_h1, p_h2, p_g, e1, e2)


def brute_force_slot(prob: SlotProblem, use_grid: bool = False) -> Decision:
    """Globally optimal per-slot decision by full enumeration.

    Channel inversion powers are recomputed from the gains rather than taken
    from ``prob``.  ``use_grid`` swaps the HES-BS vertex scan for the dense
    grid scan.
    """
    obs, vq1, vq2 = prob.obs, prob.vq1, prob.vq2
    params, ctrl = prob.params, prob.ctrl
    K = params.num_users
    if K > MAX_USERS:
        raise OracleTooLarge(f"brute force limited to {MAX_USERS} users, got {K}")
    tau = params.slot_len
    rho1 = [float(r) for r in channel_inversion_power(obs.gains_b1, params)]
    rho2 = [float(r) for r in channel_inversion_power(obs.gains_b2, params)]

    # harvesting is a separate LP with a bang-bang optimum
    e1 = obs.harvestable_b1 if vq1 * obs.harvestable_b1 <= 0.0 else 0.0
    e2 = obs.harvestable_b2 if vq2 * obs.harvestable_b2 <= 0.0 else 0.0

    V = ctrl.v_param
    best_cost = math.inf
    best = None
    hes_cache = {}
    for assign in itertools.product(tuple(Assignment), repeat=K):
        eh = [k for k in range(K) if assign[k] is Assignment.EH_BS]
        hes = [k for k in range(K) if assign[k] is Assignment.HES_BS]
        if len(eh) > params.n_channels_b1 or len(hes) > params.n_channels_b2:
            continue
        t1 = sum(rho1[k] for k in eh)
        t2 = sum(rho2[k] for k in hes)
        if t1 > params.p_max_b1 or t2 > params.p_max_b2:
            continue
        cost = V * params.phi_d * (K - len(eh) - len(hes))
        s1 = 0.0
        if eh:
            s1, c1 = _eh_side(t1, vq1, ctrl.eps_h1, params.p_max_b1, tau)
            cost += c1
        x = g = 0.0
        if hes:
            key = tuple(hes)
            if key not in hes_cache:
                scan = _hes_grid if use_grid else _hes_vertices
                hes_cache[key] = scan(t2, vq2, ctrl, params)
            x, g, c2 = hes_cache[key]
            cost += c2
        if cost < best_cost:
            best_cost = cost
            best = (assign, s1, x, g)
    assign, s1, x, g = best
    return _assemble(assign, rho1, rho2, s1, x, g, e1, e2, K)


def oracle_objective(prob: SlotProblem, use_grid: bool = False) -> float:
    d = brute_force_slot(prob, use_grid)
    return bapc_objective(d, prob.vq1, prob.vq2, prob.ctrl.v_param, prob.params)
