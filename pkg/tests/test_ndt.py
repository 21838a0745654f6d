from math import comb

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cachedof.model import ConfigError, SystemConfig
from cachedof.ndt import (
    GapViolation,
    RegimeError,
    benchmark_group_by_group,
    benchmark_time_sharing,
    centralized_lengths,
    centralized_worst_ndt,
    decentralized_lengths,
    decentralized_worst_ndt,
    gap,
    lower_bound_ndt,
    solve_ndt,
    symmetric_group_dof,
    time_sharing_plan,
    upper_bound_ndt,
)

from conftest import gauge_oracle, inner_pieces, random_lengths

F_EX = np.array([1 / 5, 1 / 10, 0, 3 / 20, 1 / 4, 7 / 20, 0])
CFG_EX = SystemConfig(3, 5, 3)


def _piece_member(d, pieces, eps=1e-12):
    for A, c, zero in pieces:
        if np.all(d[zero] == 0) and np.all(A @ d <= c + eps):
            return True
    return False


def _bisect_axis_tau(K, M, N, j, a):
    """Delivery time of a single message by bisection on the half-space pieces."""
    # pieces supported outside {j} cannot hold a point on the j-th axis
    pieces = inner_pieces(K, M, N, support=np.eye(2**K - 1)[j] > 0)
    lo, hi = 1e-9, 1e3
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        d = np.zeros(2**K - 1)
        d[j] = a / mid
        if _piece_member(d, pieces):
            hi = mid
        else:
            lo = mid
    return hi


# ---------------------------------------------------------------------------
# solve_ndt

def test_example_tau_and_dof():
    plan = solve_ndt(F_EX, CFG_EX)
    assert plan.tau == pytest.approx(7 / 30, abs=1e-9)
    assert plan.d_star == pytest.approx([6 / 7, 3 / 7, 0, 9 / 14, 15 / 14, 3 / 2, 0], abs=1e-8)


def test_example_phase_decomposition():
    plan = solve_ndt(F_EX, CFG_EX)
    expected = {
        (3, 0, 0, 0, 0, 1.5, 0): 2 / 7,
        (0, 1.5, 0, 0, 1.5, 1.5, 0): 2 / 7,
        (0, 0, 0, 1.5, 1.5, 1.5, 0): 3 / 7,
    }
    got = {tuple(np.round(p, 9)): w / plan.tau for p, w in plan.phases}
    assert set(got) == set(expected)
    for p, w in expected.items():
        assert got[p] == pytest.approx(w, abs=1e-9)
    assert plan.weights.sum() == pytest.approx(plan.tau, abs=1e-12)


@pytest.mark.parametrize("K,M,N", [(3, 5, 3), (3, 2, 1), (2, 3, 2), (3, 2, 3), (3, 10, 3), (4, 3, 1)])
def test_single_message_matches_bisection(K, M, N):
    for j in (0, 2**K - 2, K):
        tau = solve_ndt(np.eye(2**K - 1)[j] * 0.6, SystemConfig(K, M, N)).tau
        assert tau == pytest.approx(_bisect_axis_tau(K, M, N, j, 0.6), rel=1e-9)
        assert tau == pytest.approx(0.6 / min(M, N), rel=1e-9)


def test_zero_vector():
    plan = solve_ndt(np.zeros(7), CFG_EX)
    assert plan.tau == 0 and plan.phases == []


@pytest.mark.parametrize("K,M,N", [(2, 3, 2), (2, 2, 1), (3, 5, 3), (3, 2, 1), (3, 3, 1), (3, 4, 3),
                                   (3, 1, 2), (3, 8, 2)])
def test_matches_disjunctive_oracle(K, M, N, rng):
    cfg = SystemConfig(K, M, N)
    for _ in range(25):
        f = random_lengths(rng, K)
        assert solve_ndt(f, cfg).tau == pytest.approx(gauge_oracle(f, K, M, N), rel=1e-8, abs=1e-10)


def test_matches_disjunctive_oracle_k4_sparse(rng):
    for M, N in [(3, 1), (5, 2)]:
        for _ in range(3):
            f = random_lengths(rng, 4, sparsity=0.3)
            assert solve_ndt(f, SystemConfig(4, M, N)).tau == pytest.approx(gauge_oracle(f, 4, M, N), rel=1e-8)


_cfgs = st.sampled_from([SystemConfig(2, 3, 2), SystemConfig(3, 5, 3), SystemConfig(3, 2, 1),
                         SystemConfig(3, 10, 3), SystemConfig(3, 1, 1), SystemConfig(4, 3, 1)])


def _vec(K):
    return st.lists(st.floats(0, 1), min_size=2**K - 1, max_size=2**K - 1).map(np.array)


@settings(max_examples=40, deadline=None)
@given(_cfgs, st.data(), st.floats(0.05, 0.95))
def test_scale_equivariance(cfg, data, lam):
    f = data.draw(_vec(cfg.K))
    if not f.any():
        return
    assert solve_ndt(lam * f, cfg).tau == pytest.approx(lam * solve_ndt(f, cfg).tau, rel=1e-9, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(_cfgs, st.data())
def test_monotone_in_lengths(cfg, data):
    f = data.draw(_vec(cfg.K))
    g = np.minimum(1.0, f + data.draw(_vec(cfg.K)) * 0.3)
    assert solve_ndt(g, cfg).tau >= solve_ndt(f, cfg).tau - 1e-9


@settings(max_examples=40, deadline=None)
@given(_cfgs, st.data())
def test_reconstruction_and_sandwich(cfg, data):
    f = data.draw(_vec(cfg.K))
    plan = solve_ndt(f, cfg)
    assert plan.reconstruct() == pytest.approx(f, abs=1e-8)
    assert plan.tau * plan.d_star == pytest.approx(f, abs=1e-8)
    assert all(w >= 0 for w in plan.weights)
    assert lower_bound_ndt(f, cfg) <= plan.tau + 1e-9
    assert plan.tau <= benchmark_time_sharing(f, cfg) + 1e-9
    assert plan.tau <= benchmark_group_by_group(f, cfg) + 1e-9
    if cfg.regime.value == "Mid":
        assert plan.tau <= upper_bound_ndt(f, cfg) + 1e-9


def test_sparse_and_basis_phases_agree_on_tau(rng):
    for _ in range(10):
        f = random_lengths(rng, 3)
        a, b = solve_ndt(f, CFG_EX), solve_ndt(f, CFG_EX, sparse_phases=False)
        assert a.tau == pytest.approx(b.tau, abs=1e-12)
        assert len(a.phases) <= len(b.phases)
        assert b.reconstruct() == pytest.approx(f, abs=1e-8)


def test_plan_record():
    rec = solve_ndt(F_EX, CFG_EX).to_record()
    assert rec["tau_a"] == pytest.approx(7 / 30)
    assert len(rec["phases"]) == 3 and {"point", "weight", "source"} <= set(rec["phases"][0])


# ---------------------------------------------------------------------------
# bounds

def test_lower_bound_example():
    assert lower_bound_ndt(F_EX, CFG_EX) == pytest.approx(0.21, abs=1e-12)
    assert lower_bound_ndt(np.zeros(7), CFG_EX) == 0


def test_lower_bound_single_multicast():
    assert lower_bound_ndt([0, 0, 0.4], SystemConfig(2, 3, 2)) == pytest.approx(0.2)


def test_upper_bound_example():
    # rows: users 0.6/3, 0.6/3, 0.85/3 ... the largest ratio is the {1,2,3} gated row 2.1/9
    assert upper_bound_ndt(F_EX, CFG_EX) == pytest.approx(7 / 30, abs=1e-9)
    assert upper_bound_ndt(np.zeros(7), CFG_EX) == 0


def test_upper_bound_full_group_only():
    for K, M, N in [(3, 5, 3), (4, 6, 2), (2, 3, 2)]:
        f = np.zeros(2**K - 1)
        f[-1] = 0.8
        assert upper_bound_ndt(f, SystemConfig(K, M, N)) == pytest.approx(0.8 / N)


@pytest.mark.parametrize("M,N", [(2, 3), (10, 3)])
def test_upper_bound_outside_mid(M, N):
    with pytest.raises(RegimeError):
        upper_bound_ndt(F_EX, SystemConfig(3, M, N))


def test_gap_example():
    b = gap(F_EX, CFG_EX)
    assert b.rho == pytest.approx(10 / 9, abs=1e-9)
    assert b.rho <= 5 / 3
    assert b.to_record()["tau_u"] == pytest.approx(7 / 30)


@pytest.mark.parametrize("M,N", [(2, 3), (10, 3), (3, 3), (12, 2)])
def test_gap_is_one_at_extremes(M, N, rng):
    for _ in range(10):
        b = gap(random_lengths(rng, 3), SystemConfig(3, M, N))
        assert b.rho == pytest.approx(1.0, abs=1e-9)
        assert b.tau_u is None


def test_gap_rejects_zero():
    with pytest.raises(ConfigError):
        gap(np.zeros(7), CFG_EX)


def test_gap_violation_carries_witness(monkeypatch):
    import cachedof.ndt as ndt_mod

    monkeypatch.setattr(ndt_mod, "lower_bound_ndt", lambda f, cfg: 10.0)
    with pytest.raises(GapViolation) as info:
        ndt_mod.gap(F_EX, CFG_EX)
    assert np.allclose(info.value.f, F_EX)


# ---------------------------------------------------------------------------
# benchmarks

def test_time_sharing_example():
    assert benchmark_time_sharing(F_EX, CFG_EX) == pytest.approx(7 / 20, abs=1e-12)
    assert benchmark_time_sharing(np.zeros(7), CFG_EX) == 0
    plan = time_sharing_plan(F_EX, CFG_EX)
    assert plan.tau == pytest.approx(7 / 20)
    assert plan.reconstruct() == pytest.approx(F_EX)


def test_group_by_group_example():
    d1, d2 = symmetric_group_dof(CFG_EX, 1), symmetric_group_dof(CFG_EX, 2)
    expected = 0.2 / d1 + 0.35 / d2
    assert benchmark_group_by_group(F_EX, CFG_EX) == pytest.approx(expected)
    assert benchmark_group_by_group(np.zeros(7), CFG_EX) == 0


def test_group_by_group_equals_worst_case_closed_form():
    for K in (2, 3, 4):
        for M, N in [(1, 1), (2, 1), (3, 1), (K, 1), (K + 2, 1), (5, 3)]:
            for t in range(K):
                cfg = SystemConfig(K, M, N, L=max(4, K), mu=t / K)
                f = centralized_lengths(K, t / K)
                assert benchmark_group_by_group(f, cfg) == pytest.approx(centralized_worst_ndt(cfg))


def test_symmetric_group_dof_mid_branch():
    # threshold s C(K,s) / (1 + (s-1) C(K,s)) = 6/4; M/N = 2 is past it, so
    # d = max(M / (K C(K-1,s-1)), s N / (1 + (s-1) C(K,s))) = max(1/3, 2/4)
    cfg = SystemConfig(3, 2, 1)
    assert symmetric_group_dof(cfg, 2) == pytest.approx(0.5)
    # cross-check: each pair message of length 1/3 needs 2/3 time, so per-group DoF is 1/2
    tau = solve_ndt(centralized_lengths(3, 1 / 3), cfg).tau
    assert (1 / 3) / tau == pytest.approx(0.5)


def test_symmetric_group_dof_other_branches():
    for K in (2, 3, 4):
        for s in range(1, K + 1):
            assert symmetric_group_dof(SystemConfig(K, 3 * K + 1, 3), s) == pytest.approx(3 / comb(K - 1, s - 1))
        assert symmetric_group_dof(SystemConfig(K, 1, 2), 1) == pytest.approx(1 / K)
    with pytest.raises(ConfigError):
        symmetric_group_dof(CFG_EX, 0)
    with pytest.raises(ConfigError):
        symmetric_group_dof(CFG_EX, 4)


# ---------------------------------------------------------------------------
# worst-case closed forms

def test_centralized_examples():
    assert centralized_worst_ndt(SystemConfig(3, 2, 1, mu=1 / 3)) == pytest.approx(2 / 3)
    assert centralized_worst_ndt(SystemConfig(3, 2, 1, mu=1.0)) == 0
    for mu in (0, 1 / 3, 2 / 3):
        assert centralized_worst_ndt(SystemConfig(3, 7, 2, mu=mu)) == pytest.approx((1 - mu) / 2)


def test_centralized_interpolates_between_grid_points():
    lo = centralized_worst_ndt(SystemConfig(3, 2, 1, mu=1 / 3))
    hi = centralized_worst_ndt(SystemConfig(3, 2, 1, mu=2 / 3))
    mid = centralized_worst_ndt(SystemConfig(3, 2, 1, mu=0.5))
    assert mid == pytest.approx(0.5 * (lo + hi))


def test_centralized_lengths_require_integer_grid():
    with pytest.raises(ConfigError):
        centralized_lengths(3, 0.5)


@pytest.mark.parametrize("K", [3, 4])
def test_single_antenna_closed_form(K):
    # with N = 1, K = 3 or M >= K: (1 - mu) / min(1, (K mu + M) / K)
    for M in range(1, 2 * K + 1):
        if K != 3 and M < K:
            continue
        for t in range(K + 1):
            mu = t / K
            ref = (1 - mu) / min(1.0, (K * mu + M) / K)
            assert centralized_worst_ndt(SystemConfig(K, M, 1, mu=mu)) == pytest.approx(ref, abs=1e-12)


def test_decentralized_examples():
    assert decentralized_worst_ndt(SystemConfig(3, 2, 3, mu=0)) == pytest.approx(3 / 2)
    assert decentralized_worst_ndt(SystemConfig(3, 10, 2, mu=0.4)) == pytest.approx(0.6 / 2)
    cfg = SystemConfig(3, 5, 3, mu=0.4)
    full = solve_ndt(decentralized_lengths(3, 0.4), cfg).tau
    assert decentralized_worst_ndt(cfg) == pytest.approx(full, abs=1e-9)
    assert decentralized_worst_ndt(cfg.replace(mu=1.0)) == 0


def test_decentralized_lengths_formula():
    f = decentralized_lengths(3, 0.4)
    assert f[3] == pytest.approx(0.4 * 0.6**2)
    assert f[6] == pytest.approx(0.4**2 * 0.6)
