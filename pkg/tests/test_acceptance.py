"""End-to-end acceptance checks, one test per criterion.

Each test prints ``criterion N: PASS|FAIL <detail>`` and the same lines are
repeated in the pytest terminal summary.  Monte-Carlo error ``sigma`` is the
standard error of a mean over independent seeds; for a difference of two
means it is the root sum of squares of the two standard errors.
"""

import time

import numpy as np

from conftest import ACCEPTANCE, REGIMES, random_problem, rel_close
from lbapc.controller import CausalityViolation, nu_bound, required_capacity
from lbapc.harness import ExperimentConfig, run
from lbapc.model import ControlParams, SystemParams
from lbapc.oracle import oracle_objective
from lbapc.per_slot import solve_slot

SEEDS = range(10)
# figure-style runs: V derived from 150 mJ batteries, 40 mW output floors
CAP150 = dict(v=None, capacity_b1=0.15, capacity_b2=0.15, eps_h1=0.04, eps_h2=0.04)


def _record(n: int, ok: bool, detail: str) -> None:
    ACCEPTANCE[n] = (bool(ok), detail)
    print(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


def _fmt(xs) -> str:
    return "[" + ", ".join(f"{x:.3g}" for x in xs) + "]"


def _mean_se(xs):
    xs = np.asarray(xs, dtype=float)
    return xs.mean(), xs.std(ddof=1) / np.sqrt(xs.size)


def _monotone(means, ses, direction):
    """Every step moves in ``direction`` (+1 up, -1 down) or backs off by less than 3 sigma."""
    for i in range(len(means) - 1):
        step = direction * (means[i + 1] - means[i])
        if step < -3 * np.hypot(ses[i], ses[i + 1]):
            return False
    return True


def _metric_table(cfgs, metric):
    """``cfgs`` -> (means, ses) of ``metric`` over SEEDS."""
    rows = [[getattr(run(c.replace(seed=s)), metric) for s in SEEDS] for c in cfgs]
    stats = [_mean_se(r) for r in rows]
    return np.array([m for m, _ in stats]), np.array([s for _, s in stats])


def test_c01_solver_matches_oracle():
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    bad = 0
    worst = 0.0
    for i in range(1000):
        prob = random_problem(rng, REGIMES[i % 3])
        _, obj = solve_slot(prob)
        ref = oracle_objective(prob)
        if not rel_close(obj, ref):
            bad += 1
        worst = max(worst, abs(obj - ref) / max(abs(ref), 1e-300))
    dt = time.perf_counter() - t0
    _record(1, bad == 0 and dt < 120,
            f"1000 instances, {bad} mismatches, worst rel diff {worst:.2e}, {dt:.1f}s")


def test_c02_batteries_confined():
    cfg = ExperimentConfig(slots=100_000)
    t0 = time.perf_counter()
    try:
        m = run(cfg, keep_trace=True)
    except CausalityViolation as exc:
        _record(2, False, f"causality violation: {exc}")
    dt = time.perf_counter() - t0
    cap = np.array(m.required_capacity)
    b = m.battery_trace
    ok = b.min() >= 0.0 and bool((b <= cap).all()) and dt < 30
    _record(2, ok, f"min B {b.min():.3g} J, max B {_fmt(b.max(axis=0))} J, "
                   f"limit {_fmt(cap)} J, {dt:.1f}s")


def test_c03_batteries_settle_at_targets():
    cfg = ExperimentConfig(slots=100_000, burn_in=0.8)
    m = run(cfg)
    e_max = cfg.system().eh_max_b1
    off = [m.battery_mean[j] - m.theta[j] for j in (0, 1)]
    ok = all(abs(o) <= e_max for o in off)
    _record(3, ok, f"mean B - theta over last 20% = ({off[0]:.3g}, {off[1]:.3g}) J, "
                   f"allowed +-{e_max:.3g} J")


def test_c04_cost_falls_with_v():
    vs = [1e-5, 3e-5, 1e-4, 3e-4, 1e-3]
    # the V=1e-3 target (~1 J) needs ~34k slots to fill; average the second half of 2e5
    cfgs = [ExperimentConfig(slots=200_000, burn_in=0.5, v=v) for v in vs]
    means, ses = _metric_table(cfgs, "time_avg_nsc")
    mono = _monotone(means, ses, -1)
    x = 1.0 / np.array(vs)
    y = means - means[-1]
    slope, icept = np.polyfit(x, y, 1)
    r2 = 1 - ((y - (slope * x + icept)) ** 2).sum() / ((y - y.mean()) ** 2).sum()
    ok = mono and slope > 0 and r2 > 0.9
    _record(4, ok, f"NSC {_fmt(means)}, monotone={mono}, "
                   f"slope={slope:.3g}, R2={r2:.4f}")


def test_c05_capacity_affine_in_v():
    p = SystemParams()
    eps = 0.04
    vs = np.geomspace(1e-6, 1e-2, 25)
    caps = np.array([required_capacity(p, ControlParams.from_bounds(p, eps, eps, v)) for v in vs])
    tau = p.slot_len
    slope = p.num_users * p.phi_d / (eps * tau)
    icept1 = p.p_max_b1 * tau + p.eh_max_b2 * p.p_max_b2 * tau / (eps * tau) + p.eh_max_b1
    icept2 = p.p_max_b2 * tau + p.eh_max_b1 * p.p_max_b1 * tau / (eps * tau) + p.eh_max_b2
    err = max(np.abs(caps[:, 0] / (icept1 + slope * vs) - 1).max(),
              np.abs(caps[:, 1] / (icept2 + slope * vs) - 1).max())
    _record(5, err < 1e-13, f"max relative deviation from affine form {err:.1e}")


def test_c06_headline_gap():
    lb = np.array([run(ExperimentConfig(seed=s)).time_avg_nsc for s in SEEDS])
    gr = np.array([run(ExperimentConfig(seed=s, policy="greedy")).time_avg_nsc for s in SEEDS])
    gap = 1 - lb.mean() / gr.mean()
    ok = abs(gap - 0.47) <= 0.15 and gap > 0.20 and bool((lb < gr).all())
    _record(6, ok, f"LBAPC {lb.mean():.4g} vs greedy {gr.mean():.4g}: reduction {gap:.1%} "
                   f"(target 47% +-15), per-seed range {(1 - lb / gr).min():.1%}.."
                   f"{(1 - lb / gr).max():.1%}")


def test_c07_grid_drop_tradeoff():
    w = [0.001, 0.003, 0.01, 0.03, 0.1]
    details = []
    ok = True
    drops_at_top = {}
    for policy in ("lbapc", "greedy"):
        cfgs = [ExperimentConfig(policy=policy, weight_drop=x, **CAP150) for x in w]
        rows = [[run(c.replace(seed=s)) for s in SEEDS] for c in cfgs]
        g = [_mean_se([m.grid_power_avg for m in r]) for r in rows]
        d = [_mean_se([m.drop_ratio for m in r]) for r in rows]
        up = _monotone([a for a, _ in g], [b for _, b in g], +1)
        down = _monotone([a for a, _ in d], [b for _, b in d], -1)
        ok &= up and down
        drops_at_top[policy] = d[-1][0]
        details.append(f"{policy}: grid W {_fmt(a for a, _ in g)} (up={up}), "
                       f"drop {_fmt(a for a, _ in d)} (down={down})")
    ok &= drops_at_top["lbapc"] < drops_at_top["greedy"]
    _record(7, ok, "; ".join(details))


def test_c08_greedy_saturates_with_one_eh_channel():
    base = dict(n_channels_b1=1, **CAP150)
    out = {}
    for policy in ("greedy", "lbapc"):
        lo = [run(ExperimentConfig(policy=policy, eh_power_b1=0.04, seed=s, **base)).time_avg_nsc
              for s in SEEDS]
        hi = [run(ExperimentConfig(policy=policy, eh_power_b1=0.08, seed=s, **base)).time_avg_nsc
              for s in SEEDS]
        (ml, sl), (mh, sh) = _mean_se(lo), _mean_se(hi)
        out[policy] = (mh - ml, np.hypot(sl, sh))
    dg, sg = out["greedy"]
    dl, sl = out["lbapc"]
    ok = abs(dg) < 3 * sg and dl < 0
    _record(8, ok, f"greedy delta {dg:.3g} (3 sigma {3 * sg:.3g}); lbapc delta {dl:.3g} "
                   f"({dl / sl:.1f} sigma)")


def test_c09_cost_grows_with_users():
    ks = [2, 3, 4, 5, 6]
    seeds = range(5)
    means = {}
    for policy in ("lbapc", "greedy"):
        means[policy] = np.array([
            np.mean([run(ExperimentConfig(policy=policy, num_users=k, n_channels_b2=k,
                                          seed=s, **CAP150)).time_avg_nsc for s in seeds])
            for k in ks])
    gap = means["greedy"] - means["lbapc"]
    ok = all((np.diff(means[p]) > 0).all() for p in means) and (np.diff(gap) > 0).all()
    _record(9, ok, f"lbapc {_fmt(means['lbapc'])}, greedy {_fmt(means['greedy'])}, "
                   f"gap {_fmt(gap)}")


def test_c10_nu_vanishes():
    p = SystemParams()
    eps = 0.04 * 0.5 ** np.arange(40)
    nu = np.array([nu_bound(p, e, e) for e in eps])
    mono = bool((nu[1:] <= nu[:-1] * (1 + 1e-12)).all())
    ok = mono and nu[-1] < 1e-9 * nu[0]
    _record(10, ok, f"nu from {nu[0]:.3g} to {nu[-1]:.3g} over 40 halvings, monotone={mono}")
