import numpy as np
import pytest

from lbapc.model import SystemParams, mean_gain
from lbapc.stochastic import (
    ScenarioConfig, eh_power_to_max, make_rng, next_observation, observation_block, observations,
)


def _scenario(params, seed=0, n=10):
    return ScenarioConfig.from_params(params, seed, n)


def test_reference_mean_gain():
    # 1e-4 * 50**-4
    assert mean_gain(-40.0, 50.0) == pytest.approx(1.6e-11, rel=1e-12)


def test_eh_power_to_max():
    assert eh_power_to_max(0.03, 1e-3) == pytest.approx(6e-5, rel=1e-12)
    assert eh_power_to_max(0.0, 1e-3) == 0.0
    for p in (0.01, 0.03, 0.0737):
        assert eh_power_to_max(p, 1e-3) / (2 * 1e-3) == p
    with pytest.raises(ValueError):
        eh_power_to_max(-0.01, 1e-3)


def test_zero_harvesting_gives_zero_arrivals():
    p = SystemParams(eh_max_b1=0.0, eh_max_b2=0.0)
    g1, g2, e1, e2 = observation_block(make_rng(1), _scenario(p), p, 500)
    assert (e1 == 0).all() and (e2 == 0).all()


def test_same_seed_same_sequence(params):
    a = observation_block(make_rng(7), _scenario(params), params, 1000)
    b = observation_block(make_rng(7), _scenario(params), params, 1000)
    for x, y in zip(a, b):
        assert np.array_equal(x, y)
    c = observation_block(make_rng(8), _scenario(params), params, 1000)
    assert not np.array_equal(a[0], c[0])


def test_replicates_are_distinct_streams(params):
    a = observation_block(make_rng(7, 0), _scenario(params), params, 100)[0]
    b = observation_block(make_rng(7, 1), _scenario(params), params, 100)[0]
    assert not np.array_equal(a, b)


def test_single_draws_match_block(params):
    cfg = _scenario(params, n=50)
    g1, g2, e1, e2 = observation_block(make_rng(3), cfg, params, 50)
    rng = make_rng(3)
    for t in range(50):
        obs = next_observation(rng, cfg, params)
        assert np.array_equal(obs.gains_b1, g1[t]) and np.array_equal(obs.gains_b2, g2[t])
        assert obs.harvestable_b1 == e1[t] and obs.harvestable_b2 == e2[t]
    # the generator's internal blocking does not change the stream either
    streamed = list(observations(make_rng(3), cfg, params, block=7))
    assert len(streamed) == 50
    assert all(np.array_equal(o.gains_b2, g2[t]) for t, o in enumerate(streamed))


def test_arrivals_within_range(params):
    _, _, e1, e2 = observation_block(make_rng(0), _scenario(params), params, 10_000)
    assert e1.min() >= 0 and e1.max() <= params.eh_max_b1
    assert e2.mean() == pytest.approx(params.eh_max_b2 / 2, rel=0.02)


@pytest.fixture(scope="module")
def million_gains():
    p = SystemParams()
    g1, _, _, _ = observation_block(make_rng(11), _scenario(p), p, 250_000)
    return p.mean_channel_gain_b1, g1.ravel()


def test_gain_mean_law_of_large_numbers(million_gains):
    mean, g = million_gains
    assert g.size == 10 ** 6
    assert abs(g.mean() / mean - 1) < 0.01


def test_gain_distribution_ks(million_gains):
    mean, g = million_gains
    s = np.sort(g)
    n = s.size
    cdf = -np.expm1(-s / mean)
    ks = max((np.arange(1, n + 1) / n - cdf).max(), (cdf - np.arange(n) / n).max())
    assert ks < 0.01


def test_scenario_validation():
    with pytest.raises(ValueError):
        ScenarioConfig(0, 1e-11, 1e-11, 6e-5, 6e-5, 0)
    with pytest.raises(ValueError):
        ScenarioConfig(0, 0.0, 1e-11, 6e-5, 6e-5, 10)
