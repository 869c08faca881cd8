import numpy as np
import pytest

from lbapc.model import ControlParams, SlotObservation, SlotProblem, SystemParams

# criterion number -> (passed, detail); filled by test_acceptance
ACCEPTANCE: dict = {}

REGIMES = ("battery", "grid", "mixed")


def random_problem(rng: np.random.Generator, regime: str, K: int = 4,
                   params: SystemParams = None, v: float = 1e-4) -> SlotProblem:
    """A per-slot instance at the reference scale with the HES-BS queue in ``regime``.

    ``battery``: vq2 >= 0; ``grid``: -vq2 > V*phi_g; ``mixed``: in between.
    """
    params = params or SystemParams(num_users=K)
    ctrl = ControlParams.from_bounds(params, 0.04, 0.04, v)
    mean = params.mean_channel_gain_b1
    g1 = rng.exponential(mean, K)
    g2 = rng.exponential(mean, K)
    # occasionally plant exact ties and dead channels
    if rng.random() < 0.1:
        g2[rng.integers(K)] = g2[rng.integers(K)]
    if rng.random() < 0.05:
        g1[rng.integers(K)] = 0.0
    obs = SlotObservation(g1, g2, rng.uniform(0, params.eh_max_b1), rng.uniform(0, params.eh_max_b2))
    vg = v * params.phi_g
    vq1 = rng.choice([rng.uniform(-0.15, 0.0), rng.uniform(0.0, 0.05), -rng.uniform(0, 2 * vg)])
    if regime == "battery":
        vq2 = rng.uniform(0.0, 0.05)
    elif regime == "grid":
        vq2 = -vg * (1.0 + rng.exponential(3.0)) - 1e-12
    else:
        vq2 = -rng.uniform(0.0, vg) or -vg
    return SlotProblem.build(obs, vq1, vq2, params, ctrl)


def rel_close(a: float, b: float, rel: float = 1e-9, abs_tol: float = 1e-15) -> bool:
    return abs(a - b) <= max(rel * max(abs(a), abs(b)), abs_tol)


@pytest.fixture
def params():
    return SystemParams()


@pytest.fixture
def ctrl(params):
    return ControlParams.from_bounds(params, 0.04, 0.04, 1e-4)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
