"""Linear precoding and combining for multicast message sets, and a
finite-SNR delivery simulator.

All constructions work on the ``kappa``-symbol extension of the channel, in
which user ``i`` sees ``kron(I_kappa, H_i)`` and a DoF tuple ``d`` turns into
integer stream counts ``kappa * d``. Three constructions are provided:

``zf-receive``
    ``M <= N``: random orthonormal precoders, each user zero-forces all
    streams it sees.
``meta-zf``
    Per-user loads within the receive budget (``M > K N``, or ``D1`` in the
    Mid regime): every user's demanded streams form one meta-signal and a
    pseudo-inverse precoder over the stacked receive subspaces nulls
    inter-user interference.
``equalized``
    ``D2`` points in the Mid regime: combiners for each multicast group are
    taken from the null space of the equalization system so that all
    members see the same effective channel ``G_A``; the precoder inverts the
    stacked ``G`` blocks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .model import ConfigError, Regime, SystemConfig, as_dof_tuple, canonical_groups, format_group
from .ndt import DeliveryPlan
from .region import contains, inner_bound

__all__ = [
    "InfeasibleDesign",
    "DesignFailure",
    "ChannelSet",
    "LinearScheme",
    "SchemeReport",
    "SimResult",
    "sample_channels",
    "extension_factor",
    "design_scheme",
    "verify_scheme",
    "phase_rates",
    "simulate_delivery",
    "NULLING_TOL",
    "RANK_RTOL",
]

NULLING_TOL = 1e-8
RANK_RTOL = 1e-10
MAX_KAPPA = 16


class InfeasibleDesign(ValueError):
    """The DoF tuple is not supported by any of the linear constructions."""


class DesignFailure(RuntimeError):
    """A construction ran out of signal dimensions on the given channel."""


def _crandn(rng: np.random.Generator, *shape) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def _isometry(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    """Random ``rows x cols`` matrix with orthonormal columns."""
    q, r = np.linalg.qr(_crandn(rng, rows, cols))
    return q * (np.diag(r) / np.abs(np.diag(r)))


@dataclass(frozen=True, eq=False)
class ChannelSet:
    """Per-user ``N x M_a`` channel matrices."""

    H: tuple

    @property
    def K(self) -> int:
        return len(self.H)

    @property
    def N(self) -> int:
        return self.H[0].shape[0]

    @property
    def M(self) -> int:
        return self.H[0].shape[1]

    def extended(self, kappa: int) -> list:
        eye = np.eye(kappa)
        return [np.kron(eye, h) for h in self.H]


def sample_channels(cfg: SystemConfig, M_a: int | None = None, seed=0) -> ChannelSet:
    """I.i.d. unit-variance circularly-symmetric Gaussian channels.

    ``seed`` may be anything accepted by :func:`numpy.random.default_rng`,
    including a generator.
    """
    M_a = cfg.M if M_a is None else int(M_a)
    if not 1 <= M_a <= cfg.M:
        raise ConfigError(f"activated antennas must be in [1, {cfg.M}], got {M_a}")
    rng = np.random.default_rng(seed)
    H = _crandn(rng, cfg.K, cfg.N, M_a)
    return ChannelSet(tuple(H[i] for i in range(cfg.K)))


def extension_factor(d, max_kappa: int = MAX_KAPPA) -> int:
    """Smallest ``kappa`` with ``kappa * d`` integral."""
    d = np.asarray(d, dtype=float)
    den = 1
    for v in d:
        den = math.lcm(den, Fraction(float(v)).limit_denominator(max_kappa).denominator)
    if den > max_kappa or np.abs(den * d - np.round(den * d)).max(initial=0.0) > 1e-9:
        raise InfeasibleDesign(f"no symbol extension up to {max_kappa} makes d integral")
    return den


@dataclass(frozen=True, eq=False)
class LinearScheme:
    """Precoders, combiners and effective channels on the extended channel.

    Attributes
    ----------
    U : dict
        Group position -> precoder (``kappa M x k_A``, unit-norm columns).
    V : dict
        ``(user, group position)`` -> combiner (``k_A x kappa N``).
    G : dict
        Group position -> equalized effective channel (``k_A x M_a``), only
        for the ``equalized`` construction.
    activation : ndarray
        ``kappa M x M_a`` isometry selecting the active transmit dimensions.
    streams : dict
        Group position -> stream count ``k_A = kappa d_A``.
    """

    kind: str
    kappa: int
    d: np.ndarray
    streams: dict
    U: dict
    V: dict
    G: dict = field(default_factory=dict)
    activation: np.ndarray | None = None

    @property
    def total_streams(self) -> int:
        return int(sum(self.streams.values()))


# ---------------------------------------------------------------------------
# constructions

def _design_zf_receive(Hx, streams, groups, kappa, M, rng):
    total = sum(streams.values())
    P = _isometry(rng, kappa * M, total)
    U, V, col = {}, {}, 0
    cols = {}
    for j, k in streams.items():
        U[j] = P[:, col : col + k]
        cols[j] = slice(col, col + k)
        col += k
    for i, h in enumerate(Hx):
        inv = np.linalg.pinv(h @ P)
        for j in streams:
            if i in groups[j]:
                V[(i, j)] = inv[cols[j]]
    return U, V, {}, P


def _design_meta_zf(Hx, streams, groups, kappa, M, M_act, rng):
    K = len(Hx)
    n = Hx[0].shape[0]
    P = _isometry(rng, kappa * M, kappa * M_act)
    rows, slots, R = [], {}, {}
    offset = 0
    for i in range(K):
        mine = [j for j in streams if i in groups[j]]
        load = sum(streams[j] for j in mine)
        if load > n:
            raise DesignFailure(f"user {i + 1} needs {load} receive dimensions, has {n}")
        if load == 0:
            continue
        R[i] = _isometry(rng, n, load).conj().T
        rows.append(R[i] @ Hx[i] @ P)
        pos = 0
        for j in mine:
            slots[(i, j)] = (offset + pos, pos)
            pos += streams[j]
        offset += load
    stacked = np.vstack(rows)
    if stacked.shape[0] > stacked.shape[1]:
        raise DesignFailure(
            f"{stacked.shape[0]} meta-signal dimensions exceed {stacked.shape[1]} transmit dimensions"
        )
    W = np.linalg.pinv(stacked)
    U, V = {}, {}
    for j, k in streams.items():
        block = np.zeros((W.shape[0], k), dtype=complex)
        for i in groups[j]:
            start, local = slots[(i, j)]
            block += W[:, start : start + k]
            V[(i, j)] = R[i][local : local + k]
        U[j] = P @ block
    return U, V, {}, P


def _design_equalized(Hx, streams, groups, kappa, M, rng):
    total = sum(streams.values())
    n = Hx[0].shape[0]
    P = _isometry(rng, kappa * M, total)
    He = [h @ P for h in Hx]  # n x total, generic after the random activation
    G, V = {}, {}
    for j, k in streams.items():
        members = sorted(groups[j])
        s = len(members)
        if s == 1:
            R = _isometry(rng, n, k).conj().T
            G[j] = R @ He[members[0]]
            V[(members[0], j)] = R
            continue
        # [g, v_1, ..., v_s] with g = v_i He_i for every member (row vectors)
        X = np.zeros((s * total, total + s * n), dtype=complex)
        for t, i in enumerate(members):
            X[t * total : (t + 1) * total, :total] = np.eye(total)
            X[t * total : (t + 1) * total, total + t * n : total + (t + 1) * n] = -He[i].T
        _, sv, vh = np.linalg.svd(X)
        rank = int(np.sum(sv > RANK_RTOL * sv[0]))
        Z = vh[rank:].conj().T
        need = k + sum(streams[b] for b in streams if groups[j] < groups[b])
        budget = Z.shape[1]
        useful = np.linalg.matrix_rank(Z[:total], tol=RANK_RTOL * max(1.0, np.abs(Z).max())) if budget else 0
        if useful < need:
            raise DesignFailure(
                f"group {format_group(groups[j])}: null space offers {useful} equalized dimensions "
                f"(count (M_a + s*N) - s*M_a = {total + s * n - s * total}), {need} required"
            )
        c = _isometry(rng, budget, k)
        Wz = Z @ c
        G[j] = Wz[:total].T
        for t, i in enumerate(members):
            V[(i, j)] = Wz[total + t * n : total + (t + 1) * n].T
    order = list(streams)
    stacked = np.vstack([G[j] for j in order])
    sv = np.linalg.svd(stacked, compute_uv=False)
    if sv[-1] <= RANK_RTOL * sv[0]:
        raise DesignFailure("stacked effective channels are rank deficient")
    inv = np.linalg.inv(stacked)
    U, col = {}, 0
    for j in order:
        U[j] = inv[:, col : col + streams[j]]
        col += streams[j]
    # move from activated to physical extended antennas
    U = {j: P @ u for j, u in U.items()}
    return U, V, G, P


def design_scheme(H: ChannelSet, d, cfg: SystemConfig, seed=None, kappa: int | None = None) -> LinearScheme:
    """Build precoders and combiners delivering ``d`` streams per group.

    Parameters
    ----------
    H : ChannelSet
        Channels over all ``M`` transmit antennas.
    d : array_like
        DoF tuple inside the inner region of ``cfg``.
    cfg : SystemConfig
    seed : int or Generator, optional
        Randomness for activation, receive subspaces and null-space mixing.
    kappa : int, optional
        Symbol extension; the smallest valid one by default.

    Raises
    ------
    InfeasibleDesign
        ``d`` is outside the region, or only in the convex hull of ``D1`` and
        ``D2`` (such points are reached by time sharing corner points).
    DesignFailure
        Not enough signal dimensions on this channel realization.
    """
    d = as_dof_tuple(d, cfg.K)
    if H.K != cfg.K or H.N != cfg.N or H.M != cfg.M:
        raise ConfigError("channel dimensions do not match the configuration")
    kappa = extension_factor(d) if kappa is None else int(kappa)
    k_float = kappa * d
    if np.abs(k_float - np.round(k_float)).max() > 1e-9:
        raise InfeasibleDesign(f"kappa={kappa} does not make d integral")
    groups = canonical_groups(cfg.K)
    streams = {j: int(round(k)) for j, k in enumerate(k_float) if round(k) > 0}
    if not streams:
        raise InfeasibleDesign("nothing to transmit")
    rng = np.random.default_rng(seed)
    Hx = H.extended(kappa)
    spec = inner_bound(cfg)
    if spec.regime is Regime.LOW_M:
        if not contains(spec, d):
            raise InfeasibleDesign("d is outside the region")
        kind = "zf-receive"
        U, V, G, P = _design_zf_receive(Hx, streams, groups, kappa, cfg.M, rng)
    elif spec.regime is Regime.HIGH_M:
        if not contains(spec, d):
            raise InfeasibleDesign("d is outside the region")
        kind = "meta-zf"
        U, V, G, P = _design_meta_zf(Hx, streams, groups, kappa, cfg.M, min(cfg.M, cfg.K * cfg.N), rng)
    elif contains(spec.polytopes["D2"], d):
        kind = "equalized"
        U, V, G, P = _design_equalized(Hx, streams, groups, kappa, cfg.M, rng)
    elif contains(spec.polytopes["D1"], d):
        kind = "meta-zf"
        U, V, G, P = _design_meta_zf(Hx, streams, groups, kappa, cfg.M, cfg.M, rng)
    else:
        raise InfeasibleDesign("d is in neither D1 nor D2; time-share their corner points instead")
    norms = {j: np.linalg.norm(u, axis=0) for j, u in U.items()}
    U = {j: u / norms[j] for j, u in U.items()}
    return LinearScheme(kind, kappa, d, streams, U, V, G, P)


# ---------------------------------------------------------------------------
# verification

@dataclass(frozen=True)
class SchemeReport:
    nulling: float
    rank_margin: float
    rank_ok: bool
    equalization: float | None
    tol: float = NULLING_TOL

    @property
    def nulling_ok(self) -> bool:
        return self.nulling <= self.tol

    @property
    def equalization_ok(self) -> bool:
        return self.equalization is None or self.equalization <= self.tol

    @property
    def ok(self) -> bool:
        return self.nulling_ok and self.rank_ok and self.equalization_ok


def verify_scheme(scheme: LinearScheme, H: ChannelSet, d=None, tol: float = NULLING_TOL) -> SchemeReport:
    """Measure interference nulling, decodability and effective-channel equalization.

    Nulling is ``||V H U_B|| / (||V|| ||H|| ||U_B||)`` (spectral norms) over
    all unintended groups ``B``; the rank margin is the smallest
    ``sigma_min / sigma_max`` of the desired blocks.
    """
    if d is not None and not np.allclose(as_dof_tuple(d), scheme.d):
        raise ConfigError("scheme was designed for a different DoF tuple")
    Hx = H.extended(scheme.kappa)
    nulling, margin, rank_ok, equal = 0.0, np.inf, True, None
    for (i, j), v in scheme.V.items():
        hv = v @ Hx[i]
        scale_vh = np.linalg.norm(v, 2) * np.linalg.norm(Hx[i], 2)
        for b, u in scheme.U.items():
            block = hv @ u
            if b == j:
                sv = np.linalg.svd(block, compute_uv=False)
                ratio = sv[-1] / sv[0] if sv[0] > 0 else 0.0
                margin = min(margin, ratio)
                rank_ok &= bool(ratio > RANK_RTOL) and block.shape[0] == scheme.streams[j]
            else:
                nulling = max(nulling, np.linalg.norm(block, 2) / (scale_vh * np.linalg.norm(u, 2)))
    if scheme.kind == "equalized":
        equal = 0.0
        for (i, j), v in scheme.V.items():
            g = scheme.G[j]
            dev = np.linalg.norm(v @ Hx[i] @ scheme.activation - g, 2) / np.linalg.norm(g, 2)
            equal = max(equal, dev)
    return SchemeReport(float(nulling), float(margin), bool(rank_ok), equal, tol)


# ---------------------------------------------------------------------------
# rates

def _rate_terms(scheme: LinearScheme, H: ChannelSet):
    """Per (user, group): desired block, interference blocks and noise covariance."""
    Hx = H.extended(scheme.kappa)
    terms = {}
    for (i, j), v in scheme.V.items():
        hv = v @ Hx[i]
        desired = hv @ scheme.U[j]
        interf = [hv @ u for b, u in scheme.U.items() if b != j]
        terms[(i, j)] = (desired, interf, v @ v.conj().T)
    return terms


def _rates_from_terms(terms, streams, kappa: int, P: float) -> dict:
    total = sum(streams.values())
    p = kappa * P / total
    per_user = {}
    for (i, j), (desired, interf, noise) in terms.items():
        Q = noise.copy()
        for blk in interf:
            Q += p * blk @ blk.conj().T
        S = np.eye(desired.shape[1]) + p * desired.conj().T @ np.linalg.solve(Q, desired)
        _, logdet = np.linalg.slogdet(S)
        rate = logdet / np.log(2.0) / kappa
        per_user[j] = min(per_user.get(j, np.inf), rate)
    return per_user


def phase_rates(scheme: LinearScheme, H: ChannelSet, P: float) -> dict:
    """Achievable rate of every group in bits per channel use.

    Power ``P`` per channel use is split evenly over all streams of the
    phase; a multicast rate is the smallest rate among the group members.
    """
    if not P > 0:
        raise ConfigError(f"P must be positive, got {P}")
    return _rates_from_terms(_rate_terms(scheme, H), scheme.streams, scheme.kappa, float(P))


# ---------------------------------------------------------------------------
# delivery simulation

@dataclass(frozen=True, eq=False)
class SimResult:
    """Monte Carlo delivery statistics over a power grid.

    ``ndt`` has shape ``(draws, n_P)``; ``phase_time`` has shape
    ``(draws, n_phases, n_P)`` in channel uses per bit of file;
    ``rates[k][j]`` is an array ``(draws, n_P)`` for phase ``k``, group ``j``.
    """

    P_dB: np.ndarray
    ndt: np.ndarray
    phase_time: np.ndarray
    rates: list
    asymptotic: float
    F: int

    @property
    def draws(self) -> int:
        return self.ndt.shape[0]

    @property
    def mean(self) -> np.ndarray:
        return self.ndt.mean(axis=0)

    @property
    def std(self) -> np.ndarray:
        return self.ndt.std(axis=0, ddof=1) if self.draws > 1 else np.zeros(self.ndt.shape[1])

    @property
    def total_time(self) -> np.ndarray:
        """Mean total delivery time in channel uses for ``F``-bit files."""
        return self.F * self.phase_time.sum(axis=1).mean(axis=0)

    def rows(self, K: int):
        """Flat records: one per (P, phase, group)."""
        labels = canonical_groups(K).labels()
        mean, times = self.mean, self.F * self.phase_time.mean(axis=0)
        for p, pdb in enumerate(self.P_dB):
            for k, per_group in enumerate(self.rates):
                for j, r in per_group.items():
                    yield {
                        "P_dB": float(pdb),
                        "phase": k + 1,
                        "group": labels[j],
                        "rate": float(r[:, p].mean()),
                        "T_k": float(times[k, p]),
                        "NDT_sim": float(mean[p]),
                        "NDT_asym": self.asymptotic,
                        "draws": self.draws,
                    }


def simulate_delivery(
    plan: DeliveryPlan,
    f,
    cfg: SystemConfig,
    P_dB,
    draws: int = 100,
    seed: int = 0,
) -> SimResult:
    """Deliver ``f`` phase by phase over random channels and time the result.

    For every draw one channel realization is used for all phases; each
    phase ``k`` sends ``beta_k e_k`` of every message with the scheme
    designed for its corner point. Phase time is the slowest message's
    bits over its rate, and the simulated NDT is total time times
    ``log2 P / F``.
    """
    f = np.asarray(f, dtype=float)
    if draws < 1:
        raise ConfigError(f"draws must be >= 1, got {draws}")
    if not plan.phases:
        raise ConfigError("plan has no phases")
    recon = plan.reconstruct()
    if np.abs(recon - f).max() > 1e-8 * max(1.0, np.abs(f).max()):
        raise ConfigError("plan phases do not cover f")
    P_dB = np.atleast_1d(np.asarray(P_dB, dtype=float))
    P_lin = 10.0 ** (P_dB / 10.0)
    n_ph = len(plan.phases)
    ndt = np.zeros((draws, P_lin.size))
    phase_time = np.zeros((draws, n_ph, P_lin.size))
    rates = [dict() for _ in range(n_ph)]
    for t in range(draws):
        rng = np.random.default_rng([seed, t])
        H = sample_channels(cfg, seed=rng)
        for k, (point, beta) in enumerate(plan.phases):
            try:
                scheme = design_scheme(H, point, cfg, seed=rng)
            except (DesignFailure, InfeasibleDesign) as exc:
                raise type(exc)(f"phase {k + 1}: {exc}") from exc
            terms = _rate_terms(scheme, H)
            share = beta * np.asarray(point)
            for p, P in enumerate(P_lin):
                r = _rates_from_terms(terms, scheme.streams, scheme.kappa, P)
                phase_time[t, k, p] = max(share[j] / r[j] for j in r)
                for j, val in r.items():
                    rates[k].setdefault(j, np.zeros((draws, P_lin.size)))[t, p] = val
    ndt = phase_time.sum(axis=1) * np.log2(P_lin)[None, :]
    return SimResult(P_dB, ndt, phase_time, rates, float(plan.tau), cfg.F)
