"""Shared oracles and helpers.

The oracles here never look at enumerated corner points: the gauge of a
region is computed by LP from half-space descriptions only, with the convex
hull of a union handled by the disjunctive (Balas) formulation.
"""

from __future__ import annotations

import itertools

import numpy as np
import pytest
from scipy.optimize import linprog

from cachedof.model import Regime, SystemConfig, canonical_groups

ACCEPTANCE_RESULTS: dict = {}


def record_criterion(number: int, passed: bool, detail: str) -> None:
    ACCEPTANCE_RESULTS[number] = (passed, detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_RESULTS):
        passed, detail = ACCEPTANCE_RESULTS[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")


# ---------------------------------------------------------------------------
# half-space pieces of the inner region

def _rows(K, M, N):
    groups = canonical_groups(K)
    n = len(groups)
    users = np.array([[1.0 if i in g else 0.0 for g in groups] for i in range(K)])
    sub = []
    for j, A in enumerate(groups):
        if len(A) >= 2:
            row = np.array([len(A) - 1 + (1.0 if A <= B else 0.0) for B in groups])
            sub.append((j, row, len(A) * N))
    return groups, n, users, sub


def inner_pieces(K, M, N, support=None):
    """Polytopes ``(A, c, zero_mask)`` whose union's hull is the inner region."""
    groups, n, users, sub = _rows(K, M, N)
    regime = Regime.of(K, M, N)
    if regime is Regime.LOW_M:
        return [(np.ones((1, n)), np.array([M]), np.zeros(n, bool))]
    if regime is Regime.HIGH_M:
        return [(users, np.full(K, float(N)), np.zeros(n, bool))]
    pieces = [(users, np.full(K, M / K), np.zeros(n, bool))]
    cand = range(n) if support is None else np.flatnonzero(support)
    cand = list(cand)
    for r in range(1, len(cand) + 1):
        for gamma in itertools.combinations(cand, r):
            gamma = set(gamma)
            rows = [*users, np.ones(n)]
            rhs = [*([N] * K), M]
            for j, row, c in sub:
                if j in gamma:
                    rows.append(row)
                    rhs.append(c)
            zero = np.array([j not in gamma for j in range(n)])
            pieces.append((np.array(rows), np.array(rhs, float), zero))
    return pieces


def gauge_oracle(f, K, M, N) -> float:
    """min sum t_k  s.t.  f = sum x_k,  A_k x_k <= t_k c_k,  x_k >= 0 (zero off the piece support)."""
    f = np.asarray(f, float)
    if not np.any(f > 1e-12):
        return 0.0
    pieces = inner_pieces(K, M, N, support=f > 1e-12)
    n = f.size
    P = len(pieces)
    nv = P * (n + 1)
    c = np.zeros(nv)
    A_ub, b_ub, A_eq, b_eq = [], [], [], []
    bounds = []
    for k, (A, rhs, zero) in enumerate(pieces):
        base = k * (n + 1)
        c[base + n] = 1.0
        for row, r in zip(A, rhs):
            line = np.zeros(nv)
            line[base : base + n] = row
            line[base + n] = -r
            A_ub.append(line)
            b_ub.append(0.0)
        bounds += [(0, 0) if z else (0, None) for z in zero] + [(0, None)]
    for j in range(n):
        line = np.zeros(nv)
        line[j : nv : n + 1] = 1.0
        A_eq.append(line)
        b_eq.append(f[j])
    res = linprog(c, A_ub=np.array(A_ub), b_ub=b_ub, A_eq=np.array(A_eq), b_eq=b_eq,
                  bounds=bounds, method="highs")
    assert res.status == 0, res.message
    return float(res.fun)


def polytope_support_oracle(A, c, w) -> float:
    res = linprog(-np.asarray(w, float), A_ub=A, b_ub=c, bounds=(0, None), method="highs")
    assert res.status == 0
    return float(-res.fun)


def random_lengths(rng, K, sparsity=0.6):
    """Random message lengths in [0, 1] with a random fraction of absent messages."""
    n = 2**K - 1
    while True:
        f = rng.random(n) * (rng.random(n) < sparsity)
        if f.any():
            return f


def mid_pairs(K, count):
    out = []
    N = 1
    while len(out) < count:
        for M in range(N + 1, K * N + 1):
            out.append((M, N))
        N += 1
    return out[:count]


def low_pairs(count):
    out, N = [], 1
    while len(out) < count:
        for M in range(1, N + 1):
            out.append((M, N))
        N += 1
    return out[:count]


def high_pairs(K, count):
    out, N = [], 1
    while len(out) < count:
        for M in range(K * N + 1, K * N + 4):
            out.append((M, N))
        N += 1
    return out[:count]


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def example_cfg():
    return SystemConfig(3, 5, 3, L=4, mu=0.4)
