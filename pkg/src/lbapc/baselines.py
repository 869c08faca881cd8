"""Cost-aware greedy benchmark.

Each slot, in order:

1. users are offered to the EH-BS by descending EH-BS gain; a user is taken
   if a channel is free, its channel inversion power fits the remaining
   peak power and its slot energy fits the remaining battery;
2. leftover users are offered to the HES-BS battery the same way, by
   descending HES-BS gain;
3. leftover users go on the HES-BS grid supply, by descending HES-BS gain,
   when the grid cost of one packet is below the drop cost.

A user that does not fit is skipped and the scan continues.  No user mixes
battery and grid power.  All arriving energy is stored, clipped at the
battery capacity when one is given.
"""

from __future__ import annotations

from typing import Optional

import numpy as np
from numba import njit

from lbapc.controller import advance
from lbapc.model import (
    Assignment, Decision, NetworkState, SlotObservation, SystemParams,
    channel_inversion_power, slot_cost,
)

_EH, _HES, _DROP = int(Assignment.EH_BS), int(Assignment.HES_BS), int(Assignment.DROPPED)


@njit(cache=True)
def _greedy(g1, g2, rho1, rho2, b1, b2, tau, pmax1, pmax2, n1, n2, phi_g, phi_d):
    K = g1.shape[0]
    assign = np.full(K, _DROP, np.int64)
    p_h1 = np.zeros(K)
    p_h2 = np.zeros(K)
    p_g = np.zeros(K)

    energy = b1
    power = pmax1
    channels = n1
    for k in np.argsort(-g1, kind="mergesort"):
        if channels == 0:
            break
        need = rho1[k]
        if need <= power and need * tau <= energy:
            assign[k] = _EH
            p_h1[k] = need
            power -= need
            energy -= need * tau
            channels -= 1

    order2 = np.argsort(-g2, kind="mergesort")
    energy = b2
    power = pmax2
    channels = n2
    for k in order2:
        if channels == 0:
            break
        if assign[k] != _DROP:
            continue
        need = rho2[k]
        if need <= power and need * tau <= energy:
            assign[k] = _HES
            p_h2[k] = need
            power -= need
            energy -= need * tau
            channels -= 1

    for k in order2:
        if channels == 0:
            break
        if assign[k] != _DROP or p_h2[k] > 0:
            continue
        need = rho2[k]
        if need <= power and phi_g * need * tau < phi_d:
            assign[k] = _HES
            p_g[k] = need
            power -= need
            channels -= 1
    return assign, p_h1, p_h2, p_g


def greedy_decision(state: NetworkState, obs: SlotObservation,
                    params: SystemParams) -> Decision:
    rho1 = np.asarray(channel_inversion_power(obs.gains_b1, params), dtype=float)
    rho2 = np.asarray(channel_inversion_power(obs.gains_b2, params), dtype=float)
    assign, p_h1, p_h2, p_g = _greedy(
        obs.gains_b1, obs.gains_b2, rho1, rho2, state.battery_b1, state.battery_b2,
        params.slot_len, params.p_max_b1, params.p_max_b2, params.n_channels_b1,
        params.n_channels_b2, params.phi_g, params.phi_d)
    return Decision(assign, p_h1, p_h2, p_g, obs.harvestable_b1, obs.harvestable_b2)


def greedy_step(state: NetworkState, obs: SlotObservation, params: SystemParams,
                capacity: Optional[tuple] = None):
    """One greedy slot; returns ``(decision, cost, next_state)``."""
    d = greedy_decision(state, obs, params)
    tau = params.slot_len
    for bs in (1, 2):
        # the low-battery idle rule is an LBAPC property, only causality applies here
        used = d.harvested_output(bs) * tau
        if used > state.battery(bs) * (1 + 1e-12):
            raise AssertionError(f"greedy overspent battery {bs}")
    return d, slot_cost(d, params), advance(state, d, params, capacity)


@njit(cache=True)
def _greedy_loop(g1, g2, e1, e2, c, tau, pmax1, pmax2, n1, n2, phi_g, phi_d,
                 cap1, cap2, out_nsc, out_grid, out_drops, out_batt):
    T, K = g1.shape
    b1 = 0.0
    b2 = 0.0
    for t in range(T):
        out_batt[t, 0] = b1
        out_batt[t, 1] = b2
        rho1 = np.empty(K)
        rho2 = np.empty(K)
        for k in range(K):
            rho1[k] = c / g1[t, k] if g1[t, k] > 0 else np.inf
            rho2[k] = c / g2[t, k] if g2[t, k] > 0 else np.inf
        assign, p_h1, p_h2, p_g = _greedy(g1[t], g2[t], rho1, rho2, b1, b2, tau,
                                          pmax1, pmax2, n1, n2, phi_g, phi_d)
        b1 = min(b1 - p_h1.sum() * tau + e1[t], cap1)
        b2 = min(b2 - p_h2.sum() * tau + e2[t], cap2)
        drops = 0
        for k in range(K):
            if assign[k] == _DROP:
                drops += 1
        out_grid[t] = p_g.sum() * tau
        out_drops[t] = drops
        out_nsc[t] = phi_g * out_grid[t] + phi_d * drops


def run_greedy(g1, g2, e1, e2, params: SystemParams, capacity: Optional[tuple] = None):
    """Greedy over a whole sample path; returns ``(nsc, grid_J, drops, batteries)``.

    Same arithmetic as iterating :func:`greedy_step`, compiled.
    """
    T = g1.shape[0]
    out = (np.empty(T), np.empty(T), np.empty(T, np.int64), np.empty((T, 2)))
    cap1, cap2 = capacity if capacity is not None else (np.inf, np.inf)
    _greedy_loop(np.ascontiguousarray(g1), np.ascontiguousarray(g2), e1, e2,
                 params.snr_threshold * params.noise_power, params.slot_len,
                 params.p_max_b1, params.p_max_b2, params.n_channels_b1,
                 params.n_channels_b2, params.phi_g, params.phi_d,
                 float(cap1), float(cap2), *out)
    return out
