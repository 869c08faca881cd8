import numpy as np
import pytest

from lbapc.model import (
    Assignment, ControlParams, SlotObservation, SlotProblem, SystemParams, validate_decision,
)
from lbapc.oracle import (
    GRID_POINTS, OracleTooLarge, brute_force_slot, grid_gap_bound, oracle_objective,
)

from conftest import REGIMES, random_problem


def test_unreachable_users_all_dropped(params, ctrl):
    # gains so small that inversion power exceeds 1 W at both BSs
    g = np.full(4, 1e-14)
    d = brute_force_slot(SlotProblem.build(SlotObservation(g, g, 0, 0), 0.0, 0.0, params, ctrl))
    assert d.assign == (Assignment.DROPPED,) * 4


def test_refuses_large_instances():
    p = SystemParams(num_users=7, n_channels_b2=7)
    ctrl = ControlParams.from_bounds(p, 0.04, 0.04, 1e-4)
    obs = SlotObservation(np.full(7, 1e-11), np.full(7, 1e-11), 0, 0)
    with pytest.raises(OracleTooLarge):
        brute_force_slot(SlotProblem.build(obs, 0.0, 0.0, p, ctrl))


def test_decisions_are_feasible():
    rng = np.random.default_rng(1)
    for i in range(300):
        prob = random_problem(rng, REGIMES[i % 3])
        validate_decision(brute_force_slot(prob), prob.obs, prob.params, prob.ctrl)


def test_vertex_and_grid_scans_agree():
    rng = np.random.default_rng(2)
    for i in range(1000):
        prob = random_problem(rng, REGIMES[i % 3])
        exact = oracle_objective(prob)
        coarse = oracle_objective(prob, use_grid=True)
        gap = grid_gap_bound(prob.vq2, prob.ctrl, prob.params, GRID_POINTS)
        # the grid is a subset of the feasible set, so it can only be worse
        assert exact <= coarse + 1e-9 * abs(exact) + 1e-18
        assert coarse - exact <= gap + 1e-9 * abs(exact)
