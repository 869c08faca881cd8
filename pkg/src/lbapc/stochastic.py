"""Seeded i.i.d. channel and energy-arrival processes.

Every slot consumes exactly ``2K + 2`` uniform doubles from a PCG64 stream,
in this order: EH-BS gains for users 0..K-1, HES-BS gains for users
0..K-1, EH-BS arrival, HES-BS arrival.  Gains are exponential by inverse
CDF and arrivals are uniform on ``[0, E_max]``, so drawing one slot at a
time and drawing a block of slots produce the same sequence.

Replicate ``r`` of a run with base seed ``s`` uses
``SeedSequence(s, spawn_key=(r,))``; replicate 0 is the base seed itself.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from lbapc.model import SlotObservation, SystemParams


@dataclass(frozen=True)
class ScenarioConfig:
    seed: int
    channel_mean_b1: float
    channel_mean_b2: float
    eh_max_b1: float
    eh_max_b2: float
    num_slots: int

    def __post_init__(self):
        if not (self.channel_mean_b1 > 0 and self.channel_mean_b2 > 0):
            raise ValueError("channel means must be positive")
        if self.eh_max_b1 < 0 or self.eh_max_b2 < 0:
            raise ValueError("harvesting maxima must be non-negative")
        if int(self.num_slots) != self.num_slots or self.num_slots < 1:
            raise ValueError(f"num_slots must be a positive integer, got {self.num_slots!r}")

    @classmethod
    def from_params(cls, params: SystemParams, seed: int, num_slots: int) -> "ScenarioConfig":
        return cls(seed, params.mean_channel_gain_b1, params.mean_channel_gain_b2,
                   params.eh_max_b1, params.eh_max_b2, num_slots)


def eh_power_to_max(avg_power: float, slot_len: float) -> float:
    """Per-slot arrival maximum whose uniform distribution averages ``avg_power``."""
    if avg_power < 0:
        raise ValueError("average harvesting power must be non-negative")
    return 2.0 * avg_power * slot_len


def make_rng(seed: int, replicate: int = 0) -> np.random.Generator:
    if replicate == 0:
        return np.random.Generator(np.random.PCG64(seed))
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(replicate,))))


def _transform(u: np.ndarray, cfg: ScenarioConfig, K: int):
    # -log1p(-u) maps [0, 1) onto [0, inf) without hitting log(0)
    g1 = -cfg.channel_mean_b1 * np.log1p(-u[..., :K])
    g2 = -cfg.channel_mean_b2 * np.log1p(-u[..., K:2 * K])
    e1 = u[..., 2 * K] * cfg.eh_max_b1
    e2 = u[..., 2 * K + 1] * cfg.eh_max_b2
    return g1, g2, e1, e2


def next_observation(rng: np.random.Generator, cfg: ScenarioConfig,
                     params: SystemParams) -> SlotObservation:
    K = params.num_users
    g1, g2, e1, e2 = _transform(rng.random(2 * K + 2), cfg, K)
    return SlotObservation(g1, g2, float(e1), float(e2))


def observation_block(rng: np.random.Generator, cfg: ScenarioConfig,
                      params: SystemParams, n: int):
    """Draw ``n`` consecutive slots as arrays ``(g1[n,K], g2[n,K], e1[n], e2[n])``."""
    K = params.num_users
    return _transform(rng.random((n, 2 * K + 2)), cfg, K)


def observations(rng: np.random.Generator, cfg: ScenarioConfig,
                 params: SystemParams, block: int = 4096):
    """Yield ``cfg.num_slots`` observations, drawn in blocks for speed."""
    remaining = cfg.num_slots
    while remaining > 0:
        n = min(block, remaining)
        g1, g2, e1, e2 = observation_block(rng, cfg, params, n)
        for i in range(n):
            yield SlotObservation(g1[i], g2[i], float(e1[i]), float(e2[i]))
        remaining -= n
