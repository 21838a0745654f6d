"""Normalized delivery time (NDT) of a coded-message length vector.

The achievable NDT of a message-length vector ``f`` is the gauge of ``f``
with respect to the inner DoF region: the smallest ``tau`` such that
``f / tau`` is achievable. It is computed as an LP over the corner points of
the region, whose optimal weights double as a time-sharing schedule. The
module also provides the cut-set lower bound, the relaxed upper bound of the
Mid regime, closed forms for the worst-case demand under centralized and
decentralized placement, and two sequential benchmark schemes.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache
from math import comb, floor

import numpy as np

from .model import ConfigError, Regime, SystemConfig, as_message_lengths, canonical_groups
from .region import (
    MEMBERSHIP_EPS,
    CornerPointSet,
    _enumerate_candidates,
    _unique_rows,
    corner_points,
    inner_bound,
)
from .simplex import LPError, solve_standard_form

__all__ = [
    "RegimeError",
    "GapViolation",
    "DeliveryPlan",
    "NdtBounds",
    "solve_ndt",
    "lower_bound_ndt",
    "upper_bound_ndt",
    "gap",
    "time_sharing_plan",
    "benchmark_time_sharing",
    "benchmark_group_by_group",
    "symmetric_group_dof",
    "centralized_lengths",
    "decentralized_lengths",
    "centralized_worst_ndt",
    "decentralized_worst_ndt",
]

RECON_TOL = 1e-8
SUPPORT_RTOL = 1e-12  # entries below this fraction of the largest one count as absent
MAX_SUBSETS = 3_000


class RegimeError(ConfigError):
    """Operation is not defined for the antenna regime of the configuration."""


class GapViolation(RuntimeError):
    def __init__(self, message: str, f: np.ndarray):
        super().__init__(message)
        self.f = np.asarray(f)


@dataclass(frozen=True, eq=False)
class DeliveryPlan:
    """Optimal delivery time and its time-sharing schedule.

    Attributes
    ----------
    tau : float
        NDT. Equal to the sum of the phase weights.
    d_star : ndarray
        DoF tuple with ``tau * d_star == f``.
    phases : list of (ndarray, float)
        Corner point ``e_j`` and time fraction ``beta_j``; phase ``j`` carries
        ``beta_j * e_j`` of every message.
    sources : tuple of str
        Region tag of each phase point.
    """

    tau: float
    d_star: np.ndarray
    phases: list = field(default_factory=list)
    sources: tuple = ()

    @property
    def points(self) -> np.ndarray:
        if not self.phases:
            return np.zeros((0, self.d_star.size))
        return np.array([p for p, _ in self.phases])

    @property
    def weights(self) -> np.ndarray:
        return np.array([w for _, w in self.phases])

    def reconstruct(self) -> np.ndarray:
        """``sum_j beta_j e_j``, which should equal the message lengths."""
        if not self.phases:
            return np.zeros_like(self.d_star)
        return self.weights @ self.points

    def to_record(self) -> dict:
        return {
            "tau_a": self.tau,
            "d_star": self.d_star.tolist(),
            "phases": [
                {"point": p.tolist(), "weight": w, "source": s}
                for (p, w), s in zip(self.phases, self.sources or ("",) * len(self.phases))
            ],
        }


@dataclass(frozen=True)
class NdtBounds:
    tau_a: float
    tau_l: float
    tau_u: float | None
    rho: float

    def to_record(self) -> dict:
        return {"tau_a": self.tau_a, "tau_l": self.tau_l, "tau_u": self.tau_u, "rho": self.rho}


# ---------------------------------------------------------------------------
# P1 / P2

@lru_cache(maxsize=64)
def _corner_cache(K: int, M: int, N: int) -> CornerPointSet:
    return corner_points(inner_bound(SystemConfig(K, M, N)))


def _lengths(f, cfg: SystemConfig) -> np.ndarray:
    return as_message_lengths(f, cfg.K)


def _sparsest_decomposition(E: np.ndarray, face: np.ndarray, f: np.ndarray, max_size: int):
    """Fewest-phase decomposition of ``f`` over the optimal-face points.

    Among decompositions of equal size the one with the largest smallest
    weight wins, then the lowest index set. Returns ``None`` once more than
    ``MAX_SUBSETS`` subsets in total would be needed.
    """
    scale = max(1.0, float(np.abs(f).max()))
    budget = MAX_SUBSETS
    for k in range(1, max_size + 1):
        budget -= comb(face.size, k)
        if budget < 0:
            return None
        combos = np.array(list(itertools.combinations(face, k)))
        B = E[combos].transpose(0, 2, 1)  # (c, n, k)
        x = np.einsum("ckn,cn->ck", np.linalg.pinv(B), np.broadcast_to(f, (len(combos), f.size)))
        resid = np.abs(np.einsum("cnk,ck->cn", B, x) - f).max(axis=1)
        ok = (resid <= RECON_TOL * scale) & np.all(x > 1e-12, axis=1)
        if ok.any():
            cand = np.flatnonzero(ok)
            best = cand[np.argmax(np.round(x[cand].min(axis=1), 12))]
            return combos[best], x[best]
    return None


def solve_ndt(f, cfg: SystemConfig, sparse_phases: bool = True) -> DeliveryPlan:
    """Minimum NDT of the message-length vector ``f`` over the inner region.

    Parameters
    ----------
    f : array_like, shape (2**K - 1,)
        Message lengths in canonical group order, as fractions of a file.
    cfg : SystemConfig
    sparse_phases : bool, default True
        Return a decomposition with as few phases as possible (ties go to
        the most balanced weights). Otherwise the LP basis is returned as is.

    Returns
    -------
    DeliveryPlan
    """
    f = _lengths(f, cfg)
    n = f.size
    if not np.any(f > 0):
        return DeliveryPlan(0.0, np.zeros(n), [], ())
    cps = _corner_cache(cfg.K, cfg.M, cfg.N)
    support = f > SUPPORT_RTOL * f.max()
    # absent messages: project every corner point onto the support of f
    E_full = np.where(support, cps.points, 0.0)
    keep = np.abs(E_full).max(axis=1) > MEMBERSHIP_EPS
    E_full, tags = E_full[keep], np.asarray(cps.source, dtype=object)[keep]
    E_full = np.where(np.abs(E_full) < 1e-12, 0.0, E_full)
    keys = np.round(E_full / 1e-9).astype(np.int64)
    _, first = np.unique(keys, axis=0, return_index=True)
    first = np.sort(first)
    E, tags = E_full[first], tags[first]
    Es = E[:, support]
    try:
        res = solve_standard_form(np.ones(len(E)), Es.T, f[support])
    except LPError as exc:  # the region contains a scaled copy of every axis
        raise RuntimeError(f"P2 failed for f={f.tolist()}: {exc}") from exc
    tau = float(res.x.sum())
    idx = np.array(res.basis)
    weights = res.x[idx]

    if sparse_phases:
        # dual prices from the final basis; zero reduced cost marks the optimal face
        y, *_ = np.linalg.lstsq(Es[idx], np.ones(idx.size), rcond=None)
        face = np.flatnonzero(1.0 - Es @ y <= 1e-9)
        found = _sparsest_decomposition(Es, face, f[support], int(np.count_nonzero(weights > 1e-12)))
        if found is not None:
            idx, weights = found

    live = weights > 1e-12
    idx, weights = idx[live], weights[live]
    order = np.argsort(idx)
    idx, weights = idx[order], weights[order]
    d_star = f / tau
    phases = [(E[j].copy(), float(w)) for j, w in zip(idx, weights)]
    return DeliveryPlan(tau, d_star, phases, tuple(tags[idx]))


def time_sharing_plan(f, cfg: SystemConfig) -> DeliveryPlan:
    """One phase per message at DoF ``min(M, N)``."""
    f = _lengths(f, cfg)
    dof = float(min(cfg.M, cfg.N))
    phases = []
    for j in np.flatnonzero(f > 0):
        e = np.zeros(f.size)
        e[j] = dof
        phases.append((e, float(f[j] / dof)))
    tau = float(f.sum() / dof)
    d_star = f / tau if tau > 0 else np.zeros(f.size)
    return DeliveryPlan(tau, d_star, phases, ("axis",) * len(phases))


# ---------------------------------------------------------------------------
# bounds

def lower_bound_ndt(f, cfg: SystemConfig) -> float:
    """Cut-set bound ``max(sum(f) / M, max_i load_i / N)``."""
    f = _lengths(f, cfg)
    loads = canonical_groups(cfg.K).incidence @ f
    return float(max(f.sum() / cfg.M, loads.max() / cfg.N))


def upper_bound_ndt(f, cfg: SystemConfig) -> float:
    """Row-wise bound over ``D2`` with every subspace row enforced (Mid regime only)."""
    if cfg.regime is not Regime.MID:
        raise RegimeError(f"relaxed upper bound is defined for 1 < M/N <= K only, got M={cfg.M}, N={cfg.N}")
    f = _lengths(f, cfg)
    poly = inner_bound(cfg).polytopes["D2"]
    return float(np.max(poly.A @ f / poly.c))


def gap(f, cfg: SystemConfig, eps: float = 1e-9) -> NdtBounds:
    """Achievable NDT, its bounds and the ratio ``tau_a / tau_l``.

    Raises
    ------
    GapViolation
        If the bounds are out of order or the ratio exceeds what the regime
        allows; the offending ``f`` is attached.
    """
    f = _lengths(f, cfg)
    if not np.any(f > 0):
        raise ConfigError("gap is undefined for an all-zero message vector")
    tau_a = solve_ndt(f, cfg, sparse_phases=False).tau
    tau_l = lower_bound_ndt(f, cfg)
    tau_u = upper_bound_ndt(f, cfg) if cfg.regime is Regime.MID else None
    rho = tau_a / tau_l
    scale = eps * max(1.0, tau_a)
    if tau_l > tau_a + scale or (tau_u is not None and tau_a > tau_u + scale):
        raise GapViolation(f"bounds out of order: {tau_l} <= {tau_a} <= {tau_u} fails", f)
    if cfg.regime is Regime.MID:
        if rho > cfg.M / cfg.N + eps:
            raise GapViolation(f"gap {rho} exceeds M/N = {cfg.M / cfg.N}", f)
    elif abs(rho - 1.0) > eps:
        raise GapViolation(f"gap {rho} differs from 1 in regime {cfg.regime.value}", f)
    return NdtBounds(tau_a, tau_l, tau_u, rho)


# ---------------------------------------------------------------------------
# benchmarks

def benchmark_time_sharing(f, cfg: SystemConfig) -> float:
    """Messages sent one after another, each at DoF ``min(M, N)``."""
    f = _lengths(f, cfg)
    return float(f.sum() / min(cfg.M, cfg.N))


def symmetric_group_dof(cfg: SystemConfig, s: int) -> float:
    """Per-group DoF when all ``C(K, s)`` groups of size ``s`` are served together."""
    K, M, N = cfg.K, cfg.M, cfg.N
    if not 1 <= s <= K:
        raise ConfigError(f"group size s must be in [1, {K}], got {s}")
    n_s, per_user = comb(K, s), comb(K - 1, s - 1)
    if M * (1 + (s - 1) * n_s) <= N * s * n_s:
        return M / n_s
    if M <= K * N:
        return max(M / (K * per_user), s * N / (1 + (s - 1) * n_s))
    return N / per_user


def benchmark_group_by_group(f, cfg: SystemConfig) -> float:
    """Messages batched by group size, each batch zero-padded to its longest message."""
    f = _lengths(f, cfg)
    sizes = canonical_groups(cfg.K).sizes
    total = 0.0
    for s in range(1, cfg.K + 1):
        longest = f[sizes == s].max()
        if longest > 0:
            total += longest / symmetric_group_dof(cfg, s)
    return float(total)


# ---------------------------------------------------------------------------
# worst-case closed forms

def centralized_lengths(K: int, mu: float) -> np.ndarray:
    """Coded-message lengths for distinct demands under centralized placement (``K mu`` integer)."""
    t = K * mu
    if abs(t - round(t)) > 1e-9:
        raise ConfigError(f"K*mu must be an integer, got {t}")
    t = int(round(t))
    f = np.zeros(2**K - 1)
    if t < K:
        f[canonical_groups(K).sizes == t + 1] = (1 - mu) / comb(K - 1, t)
    return f


def decentralized_lengths(K: int, mu: float) -> np.ndarray:
    """Large-file limit of the coded-message lengths under random placement."""
    s = canonical_groups(K).sizes
    return mu ** (s - 1) * (1 - mu) ** (K - s + 1)


def _centralized_grid(K: int, M: int, N: int, t: int) -> float:
    if t >= K:
        return 0.0
    mu = t / K
    s = t + 1
    length = (1 - mu) / comb(K - 1, s - 1)
    return length / symmetric_group_dof(SystemConfig(K, M, N), s)


def centralized_worst_ndt(cfg: SystemConfig) -> float:
    """Worst-case NDT under centralized placement.

    On the grid ``mu = t/K`` all coded messages have the same length and are
    served with the symmetric per-group DoF; between grid points the cache is
    shared, which interpolates linearly.
    """
    K, mu = cfg.K, cfg.mu
    t = K * mu
    lo = floor(t + 1e-12)
    if abs(t - lo) <= 1e-12 or lo >= K:
        return _centralized_grid(K, cfg.M, cfg.N, min(lo, K))
    w = t - lo
    return (1 - w) * _centralized_grid(K, cfg.M, cfg.N, lo) + w * _centralized_grid(K, cfg.M, cfg.N, lo + 1)


@lru_cache(maxsize=None)
def _reduced_templates(K: int):
    """Vertex candidates of the size-symmetric regions in units of N, parametrized by M/N."""
    sizes = np.arange(1, K + 1)
    per_user = np.array([comb(K - 1, s - 1) for s in sizes], dtype=float)
    per_size = np.array([comb(K, s) for s in sizes], dtype=float)
    rows, alpha, beta, cond = [per_user, per_size], [1.0, 0.0], [0.0, 1.0], [-1, -1]
    for s in sizes[1:]:
        row = (s - 1) * per_size
        row[s - 1] += 1.0
        for s2 in range(s + 1, K + 1):
            row[s2 - 1] += comb(K - s, s2 - s)
        rows.append(row)
        alpha.append(float(s))
        beta.append(0.0)
        cond.append(int(s - 1))
    d2 = _enumerate_candidates(np.array(rows), alpha, beta, cond)
    d1 = _enumerate_candidates(per_user[None, :], [0.0], [1.0 / K], [-1])
    return d1, d2


def decentralized_worst_ndt(cfg: SystemConfig) -> float:
    """Worst-case NDT under decentralized placement in the large-file limit."""
    K, M, N, mu = cfg.K, cfg.M, cfg.N, cfg.mu
    regime = cfg.regime
    sizes = np.arange(1, K + 1)
    lengths = mu ** (sizes - 1) * (1 - mu) ** (K - sizes + 1)
    if regime is Regime.LOW_M:
        return float(sum(comb(K, s) * lengths[s - 1] for s in sizes) / M)
    if regime is Regime.HIGH_M:
        return (1 - mu) / N
    if not np.any(lengths > 0):
        return 0.0
    d1, d2 = _reduced_templates(K)
    r = M / N
    E = N * _unique_rows(np.vstack([d1.at(r), d2.at(r)]))
    support = lengths > SUPPORT_RTOL * lengths.max()
    E = _unique_rows(np.where(support, E, 0.0))
    E = E[np.abs(E).max(axis=1) > MEMBERSHIP_EPS]
    res = solve_standard_form(np.ones(len(E)), E[:, support].T, lengths[support])
    return float(res.x.sum())
