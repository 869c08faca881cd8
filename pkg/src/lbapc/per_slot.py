"""Exact per-slot solver: closed-form harvesting plus inner-outer optimisation.

The outer search enumerates every set ``H`` of users the EH-BS could serve
(bitmask order, lowest mask wins ties).  For each one the HES-BS side is
solved in closed form on the remaining users, which are considered in
ascending order of channel inversion power (ties by user index).

Objective bookkeeping: the value reported is the full assignment/power
objective with ``+V*phi_d`` per *dropped* user, i.e.
``Phi(H) + J_in(H) + V*K*phi_d`` where ``Phi`` and ``J_in`` carry
``-V*phi_d`` per *served* user.

The hot loops are numba-compiled; the public functions take and return the
domain types from :mod:`lbapc.model`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from lbapc.model import (
    Assignment, ControlParams, Decision, SlotObservation, SlotProblem, SystemParams,
)

_EH, _HES, _DROP = int(Assignment.EH_BS), int(Assignment.HES_BS), int(Assignment.DROPPED)


@dataclass(frozen=True)
class InnerSolution:
    served_by_hes: tuple
    p_h2: np.ndarray
    p_g: np.ndarray
    j_in: float


def optimal_harvest(vq1: float, vq2: float, obs: SlotObservation):
    """Harvest everything at a BS whose virtual queue is non-positive, else nothing."""
    e1 = obs.harvestable_b1 if vq1 <= 0 else 0.0
    e2 = obs.harvestable_b2 if vq2 <= 0 else 0.0
    return e1, e2


@njit(cache=True)
def _mixed_split(rho, served, rho_sum, vq2, v_phi_g, eps2):
    """Harvest/grid split on the HES-BS for a fixed served set, 0 < -vq2 <= V*phi_g."""
    K = rho.shape[0]
    p_h2 = np.zeros(K)
    p_g = np.zeros(K)
    if rho_sum <= -vq2 * eps2 / v_phi_g:
        for k in range(K):
            if served[k]:
                p_g[k] = rho[k]
    elif rho_sum <= eps2:
        for k in range(K):
            if served[k]:
                p_h2[k] = rho[k] / rho_sum * eps2
    else:
        for k in range(K):
            if served[k]:
                p_h2[k] = rho[k]
    return p_h2, p_g


@njit(cache=True)
def _mixed_cost(rho_sum, vq2, v_phi_g, eps2, tau):
    if rho_sum <= -vq2 * eps2 / v_phi_g:
        return v_phi_g * rho_sum * tau
    if rho_sum <= eps2:
        return -vq2 * eps2 * tau
    return -vq2 * rho_sum * tau


@njit(cache=True)
def _inner(rho2, order, excluded, vq2, v, phi_g, phi_d, tau, eps2, pmax2, n2):
    K = rho2.shape[0]
    cand = np.empty(K, np.int64)
    nc = 0
    for idx in order:
        if not excluded[idx]:
            cand[nc] = idx
            nc += 1
    n_tilde = min(n2, nc)
    # prefix sums are increasing, so the power-feasible counts form 1..m_feas
    prefix = np.zeros(n_tilde + 1)
    m_feas = 0
    for i in range(n_tilde):
        s = prefix[i] + rho2[cand[i]]
        if s > pmax2:
            break
        prefix[i + 1] = s
        m_feas = i + 1

    v_phi_g = v * phi_g
    served = np.zeros(K, np.bool_)
    p_h2 = np.zeros(K)
    p_g = np.zeros(K)
    if vq2 >= 0.0:
        m = m_feas
        for i in range(m):
            served[cand[i]] = True
        if m > 0:
            for i in range(m):
                k = cand[i]
                p_h2[k] = rho2[k] / prefix[m] * pmax2
            return served, p_h2, p_g, -vq2 * pmax2 * tau - v * phi_d * m
        return served, p_h2, p_g, 0.0
    if -vq2 > v_phi_g:
        m = 0
        for i in range(1, m_feas + 1):
            if phi_g * rho2[cand[i - 1]] * tau <= phi_d:
                m = i
        j = 0.0
        for i in range(m):
            k = cand[i]
            served[k] = True
            p_g[k] = rho2[k]
            j += v_phi_g * rho2[k] * tau - v * phi_d
        return served, p_h2, p_g, j
    best_i = 0
    best = 0.0
    for i in range(1, m_feas + 1):
        c = _mixed_cost(prefix[i], vq2, v_phi_g, eps2, tau) - v * phi_d * i
        if c < best:
            best = c
            best_i = i
    if best_i == 0:
        return served, p_h2, p_g, 0.0
    for i in range(best_i):
        served[cand[i]] = True
    p_h2, p_g = _mixed_split(rho2, served, prefix[best_i], vq2, v_phi_g, eps2)
    return served, p_h2, p_g, best


@njit(cache=True)
def _eh_power(rho1, members, vq1, eps1, pmax1):
    K = rho1.shape[0]
    p = np.zeros(K)
    s = 0.0
    n = 0
    for k in range(K):
        if members[k]:
            s += rho1[k]
            n += 1
    if n == 0:
        return p, 0.0
    if vq1 >= 0.0:
        for k in range(K):
            if members[k]:
                p[k] = rho1[k] / s * pmax1
        return p, pmax1
    denom = min(s, eps1)
    for k in range(K):
        if members[k]:
            p[k] = rho1[k] / denom * eps1
    return p, max(s, eps1)


@njit(cache=True)
def _outer(rho1, rho2, vq1, vq2, v, phi_g, phi_d, tau, eps1, eps2, pmax1, pmax2, n1, n2):
    K = rho1.shape[0]
    order = np.argsort(rho2, kind="mergesort")
    best_obj = np.inf
    best_mask = 0
    best_h1 = np.zeros(K)
    best_h2 = np.zeros(K)
    best_g = np.zeros(K)
    best_served = np.zeros(K, np.bool_)
    members = np.zeros(K, np.bool_)
    for mask in range(1 << K):
        cnt = 0
        s = 0.0
        for k in range(K):
            members[k] = (mask >> k) & 1 == 1
            if members[k]:
                cnt += 1
                s += rho1[k]
        if cnt > n1 or s > pmax1:
            continue
        p_h1, total = _eh_power(rho1, members, vq1, eps1, pmax1)
        phi = 0.0
        if cnt > 0:
            phi = -vq1 * total * tau - v * phi_d * cnt
        served, p_h2, p_g, j_in = _inner(rho2, order, members, vq2, v, phi_g, phi_d,
                                         tau, eps2, pmax2, n2)
        obj = phi + j_in
        if obj < best_obj:
            best_obj = obj
            best_mask = mask
            best_h1 = p_h1
            best_h2 = p_h2
            best_g = p_g
            best_served = served
    assign = np.full(K, _DROP, np.int64)
    for k in range(K):
        if (best_mask >> k) & 1 == 1:
            assign[k] = _EH
        elif best_served[k]:
            assign[k] = _HES
    return assign, best_h1, best_h2, best_g, best_obj + v * phi_d * K


def _consts(prob: SlotProblem):
    p, c = prob.params, prob.ctrl
    return (c.v_param, p.phi_g, p.phi_d, p.slot_len, c.eps_h1, c.eps_h2,
            p.p_max_b1, p.p_max_b2, p.n_channels_b1, p.n_channels_b2)


def hes_power_split(rho_sum: float, vq2: float, rho: np.ndarray, served,
                       ctrl: ControlParams, params: SystemParams):
    """HES-BS power split for a fixed served set when ``0 < -vq2 <= V*phi_g``.

    Below ``-vq2*eps/(V*phi_g)`` everything comes from the grid; up to
    ``eps_h2`` the battery output is boosted to exactly ``eps_h2``; above it
    each user is served from the battery at channel inversion.
    """
    v_phi_g = ctrl.v_param * params.phi_g
    mask = np.zeros(len(rho), dtype=bool)
    mask[list(served)] = True
    assert 0 < -vq2 <= v_phi_g, "split only applies between the grid and battery regimes"
    assert mask.any(), "served set must be non-empty"
    assert rho_sum <= params.p_max_b2
    return _mixed_split(np.asarray(rho, dtype=float), mask, float(rho_sum), float(vq2),
                        v_phi_g, ctrl.eps_h2)


def eh_bs_power(members, vq1: float, rho_b1: np.ndarray, ctrl: ControlParams,
                params: SystemParams) -> np.ndarray:
    """EH-BS battery powers for serving ``members``."""
    rho_b1 = np.asarray(rho_b1, dtype=float)
    mask = np.zeros(len(rho_b1), dtype=bool)
    mask[list(members)] = True
    assert mask.sum() <= params.n_channels_b1, "more users than EH-BS channels"
    assert rho_b1[mask].sum() <= params.p_max_b1, "EH-BS cannot reach these users"
    p, _ = _eh_power(rho_b1, mask, float(vq1), ctrl.eps_h1, params.p_max_b1)
    return p


def solve_inner(prob: SlotProblem, excluded=()) -> InnerSolution:
    """HES-BS assignment and power split for the users not in ``excluded``."""
    K = prob.params.num_users
    mask = np.zeros(K, dtype=bool)
    mask[list(excluded)] = True
    v, phi_g, phi_d, tau, _, eps2, _, pmax2, _, n2 = _consts(prob)
    order = np.argsort(prob.rho_b2, kind="mergesort")
    served, p_h2, p_g, j_in = _inner(np.asarray(prob.rho_b2), order, mask, prob.vq2, v,
                                     phi_g, phi_d, tau, eps2, pmax2, n2)
    hes = tuple(sorted(np.flatnonzero(served), key=lambda k: (prob.rho_b2[k], k)))
    return InnerSolution(tuple(int(k) for k in hes), p_h2, p_g, float(j_in))


def solve_outer_raw(prob: SlotProblem):
    """Kernel output ``(assign, p_h1, p_h2, p_g, objective)`` without wrapping."""
    return _outer(np.asarray(prob.rho_b1), np.asarray(prob.rho_b2), prob.vq1, prob.vq2,
                  *_consts(prob))


def solve_outer(prob: SlotProblem) -> Decision:
    """Optimal assignment, powers and harvesting for one slot."""
    assign, p_h1, p_h2, p_g, _ = solve_outer_raw(prob)
    e1, e2 = optimal_harvest(prob.vq1, prob.vq2, prob.obs)
    return Decision(assign, p_h1, p_h2, p_g, e1, e2)


def solve_slot(prob: SlotProblem):
    """Like :func:`solve_outer` but also returns the objective value."""
    assign, p_h1, p_h2, p_g, obj = solve_outer_raw(prob)
    e1, e2 = optimal_harvest(prob.vq1, prob.vq2, prob.obs)
    return Decision(assign, p_h1, p_h2, p_g, e1, e2), float(obj)
