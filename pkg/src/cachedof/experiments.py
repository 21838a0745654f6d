"""Average-NDT sweeps over cache size for the three delivery schemes."""

from __future__ import annotations

from dataclasses import dataclass
from math import floor

import numpy as np

from .caching import (
    DemandVector,
    all_demands,
    centralized_place,
    decentralized_place,
    generate_coded_messages,
    random_demand,
)
from .model import ConfigError, SystemConfig
from .ndt import benchmark_group_by_group, benchmark_time_sharing, solve_ndt

__all__ = ["SCHEMES", "SweepPoint", "scheme_ndt", "centralized_sweep", "decentralized_sweep", "MAX_ENUMERATED"]

SCHEMES = ("proposed", "time-sharing", "group-by-group")
MAX_ENUMERATED = 65_536


def scheme_ndt(f, cfg: SystemConfig, scheme: str) -> float:
    """NDT of ``f`` under one delivery scheme."""
    if scheme == "proposed":
        return solve_ndt(f, cfg, sparse_phases=False).tau
    if scheme == "time-sharing":
        return benchmark_time_sharing(f, cfg)
    if scheme == "group-by-group":
        return benchmark_group_by_group(f, cfg)
    raise ConfigError(f"unknown scheme {scheme!r}; choose from {SCHEMES}")


@dataclass(frozen=True)
class SweepPoint:
    mode: str
    scheme: str
    K: int
    M: int
    N: int
    mu: float
    mean: float
    std: float
    samples: int
    extrapolated: bool

    def to_record(self) -> dict:
        return dict(self.__dict__)


class _Memo:
    """NDT cache keyed by the message-length vector."""

    def __init__(self, cfg, schemes):
        self.cfg = cfg
        self.schemes = schemes
        self.table = {}

    def __call__(self, f) -> np.ndarray:
        key = np.round(np.asarray(f), 12).tobytes()
        if key not in self.table:
            self.table[key] = np.array([scheme_ndt(f, self.cfg, s) for s in self.schemes])
        return self.table[key]


def _demands(cfg: SystemConfig, rng: np.random.Generator, samples: int):
    if cfg.L**cfg.K <= MAX_ENUMERATED:
        return list(all_demands(cfg))
    return [random_demand(cfg, rng) for _ in range(samples)]


def _summaries(mode, cfg, schemes, mu, values):
    values = np.asarray(values)
    n = values.shape[0]
    std = values.std(axis=0, ddof=1) if n > 1 else np.zeros(len(schemes))
    return [
        SweepPoint(mode, s, cfg.K, cfg.M, cfg.N, float(mu), float(values[:, k].mean()), float(std[k]), n,
                   s == "group-by-group" and cfg.N > 1)
        for k, s in enumerate(schemes)
    ]


def centralized_sweep(cfg: SystemConfig, mus, schemes=SCHEMES, worst_case_only: bool = False,
                      samples: int = 1000, seed: int = 0) -> list:
    """Average NDT over demands under centralized placement.

    Demands are enumerated when ``L**K <= 65536`` and sampled otherwise.
    Between grid points ``mu = t/K`` the cache is shared between the two
    neighbouring placements, so each demand's NDT interpolates linearly.
    """
    schemes = tuple(schemes)
    memo = _Memo(cfg, schemes)
    rng = np.random.default_rng(seed)
    demands = [DemandVector(tuple(range(cfg.K)), cfg.L)] if worst_case_only else _demands(cfg, rng, samples)
    grid_cache = {}

    def at_grid(t):
        if t not in grid_cache:
            cache = centralized_place(cfg.replace(mu=t / cfg.K))
            grid_cache[t] = np.array([memo(generate_coded_messages(cache, r)) for r in demands])
        return grid_cache[t]

    out = []
    for mu in mus:
        x = cfg.K * float(mu)
        lo = min(floor(x + 1e-12), cfg.K)
        w = x - lo
        values = at_grid(lo) if w <= 1e-12 else (1 - w) * at_grid(lo) + w * at_grid(lo + 1)
        out.extend(_summaries("centralized", cfg, schemes, mu, values))
    return out


def decentralized_sweep(cfg: SystemConfig, mus, schemes=SCHEMES, realizations: int = 200,
                        seed: int = 0, bits: int | None = None) -> list:
    """Average NDT over random placements, each with a uniformly random demand.

    Realization ``t`` uses the same seed at every ``mu``, so curves share
    their randomness. ``bits`` defaults to the file length ``F``.
    """
    schemes = tuple(schemes)
    memo = _Memo(cfg, schemes)
    bits = cfg.F if bits is None else bits
    out = []
    for mu in mus:
        local = cfg.replace(mu=float(mu))
        values = []
        for t in range(realizations):
            rng = np.random.default_rng([seed, t])
            cache = decentralized_place(local, seed=rng, bits=bits)
            values.append(memo(generate_coded_messages(cache, random_demand(local, rng))))
        out.extend(_summaries("decentralized", cfg, schemes, mu, values))
    return out
