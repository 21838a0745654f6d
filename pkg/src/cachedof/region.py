"""DoF-region polytopes of the K-user (M, N) MIMO broadcast channel with
general message sets.

The outer bound is the cut-set polytope. The inner bound depends on the
antenna regime: a single sum constraint for ``M/N <= 1``, per-user
constraints for ``M/N > K``, and for ``1 < M/N <= K`` the convex hull of
``D1`` (per-user budget ``M/K``) and ``D2``, whose subspace constraints
only apply to groups that actually carry streams.

Vertex enumeration works on supports: for a support set of groups, the
coordinates outside it are fixed to zero and every square system formed by
the constraints that can be active on that support is solved. The
right-hand sides of all region constraints are affine in ``r = M/N`` (in
units of N), so one enumeration per K yields, for every candidate vertex,
the interval of ratios on which it is feasible. Only one support per orbit
of user relabelings is visited.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence, TextIO, Union

import numpy as np

from .model import ConfigError, GroupIndex, Regime, SystemConfig, canonical_groups
from .simplex import InfeasibleLP, solve_standard_form

__all__ = [
    "MEMBERSHIP_EPS",
    "DEDUP_TOL",
    "UnboundedRegionError",
    "Polytope",
    "RegionSpec",
    "CornerPointSet",
    "outer_bound",
    "inner_bound",
    "contains",
    "corner_points",
    "brute_force_vertices",
    "disjoint_family_points",
    "gauge",
    "support_function",
    "same_point_sets",
    "format_rational",
    "write_corner_points",
]

MEMBERSHIP_EPS = 1e-9
DEDUP_TOL = 1e-7


class UnboundedRegionError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Polytope:
    """``{d >= 0 : A @ d <= c}``, optionally with indicator-gated rows.

    ``conditional[k]`` is the position of the group whose presence
    (``d_A > 0``) activates row ``k``, or ``-1`` for an ordinary row.
    """

    A: np.ndarray
    c: np.ndarray
    labels: tuple
    conditional: tuple | None = None

    def __post_init__(self):
        A = np.array(self.A, dtype=float, ndmin=2)
        c = np.array(self.c, dtype=float).reshape(-1)
        if A.shape[0] != c.size or len(self.labels) != c.size:
            raise ValueError("row count mismatch between A, c and labels")
        if np.any(A < 0) or np.any(c <= 0):
            raise ValueError("region rows need A >= 0 and c > 0")
        if self.conditional is not None and len(self.conditional) != c.size:
            raise ValueError("conditional tags must cover every row")
        A.setflags(write=False)
        c.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "labels", tuple(self.labels))
        if self.conditional is not None:
            object.__setattr__(self, "conditional", tuple(int(g) for g in self.conditional))

    @property
    def dim(self) -> int:
        return self.A.shape[1]

    @property
    def n_rows(self) -> int:
        return self.A.shape[0]

    @property
    def cond_array(self) -> np.ndarray:
        if self.conditional is None:
            return np.full(self.n_rows, -1)
        return np.array(self.conditional)

    @property
    def has_conditional_rows(self) -> bool:
        return bool(np.any(self.cond_array >= 0))

    def is_bounded(self) -> bool:
        unconditioned = self.A[self.cond_array < 0]
        return bool(np.all(unconditioned.max(axis=0, initial=0.0) > 0))

    def unconditioned(self) -> "Polytope":
        """Same rows with every indicator removed."""
        return Polytope(self.A, self.c, self.labels, None)


@dataclass(frozen=True, eq=False)
class RegionSpec:
    """Inner-bound description for one ``(K, M, N)``.

    ``polytopes`` holds ``{"inner": ...}`` for the LowM and HighM regimes
    and ``{"D1": ..., "D2": ...}`` for Mid, where ``D2`` carries the
    indicator-gated subspace rows.
    """

    K: int
    M: int
    N: int
    regime: Regime
    polytopes: dict = field(repr=False)

    @property
    def dim(self) -> int:
        return 2**self.K - 1


@dataclass(frozen=True, eq=False)
class CornerPointSet:
    points: np.ndarray
    source: tuple

    def __len__(self) -> int:
        return self.points.shape[0]

    def __iter__(self):
        return iter(self.points)

    def restrict(self, mask) -> "CornerPointSet":
        mask = np.asarray(mask)
        return CornerPointSet(self.points[mask], tuple(np.asarray(self.source, dtype=object)[mask]))


# ---------------------------------------------------------------------------
# region construction

def _user_rows(groups: GroupIndex) -> np.ndarray:
    return groups.incidence


def _subspace_rows(groups: GroupIndex) -> tuple[np.ndarray, list[int]]:
    """Rows ``(|A|-1) sum(d) + d_A + sum_{B > A} d_B`` for every ``|A| >= 2``."""
    n = len(groups)
    rows, owners = [], []
    for j, A in enumerate(groups):
        if len(A) < 2:
            continue
        row = np.full(n, float(len(A) - 1))
        for k, B in enumerate(groups):
            if A <= B:
                row[k] += 1.0
        rows.append(row)
        owners.append(j)
    return np.array(rows).reshape(-1, n), owners


def outer_bound(cfg: SystemConfig) -> Polytope:
    """Cut-set outer bound: per-user load ``<= N`` and total ``<= M``."""
    groups = canonical_groups(cfg.K)
    A = np.vstack([_user_rows(groups), np.ones(len(groups))])
    c = np.r_[np.full(cfg.K, float(cfg.N)), float(cfg.M)]
    labels = tuple(f"user {i + 1}" for i in range(cfg.K)) + ("BS",)
    return Polytope(A, c, labels)


def _d2_polytope(K: int, M: float, N: float) -> Polytope:
    groups = canonical_groups(K)
    sub, owners = _subspace_rows(groups)
    A = np.vstack([_user_rows(groups), np.ones(len(groups)), sub])
    c = np.r_[np.full(K, float(N)), float(M), [len(groups[j]) * float(N) for j in owners]]
    labels = (
        tuple(f"user {i + 1}" for i in range(K))
        + ("BS",)
        + tuple(f"subspace {groups.labels()[j]}" for j in owners)
    )
    cond = [-1] * (K + 1) + owners
    return Polytope(A, c, labels, tuple(cond))


def inner_bound(cfg: SystemConfig) -> RegionSpec:
    """Regime-dependent achievable region."""
    K, M, N = cfg.K, cfg.M, cfg.N
    groups = canonical_groups(K)
    n = len(groups)
    users = tuple(f"user {i + 1}" for i in range(K))
    regime = cfg.regime
    if regime is Regime.LOW_M:
        polys = {"inner": Polytope(np.ones((1, n)), [float(M)], ("BS",))}
    elif regime is Regime.HIGH_M:
        polys = {"inner": Polytope(_user_rows(groups), np.full(K, float(N)), users)}
    else:
        polys = {
            "D1": Polytope(_user_rows(groups), np.full(K, M / K), users),
            "D2": _d2_polytope(K, M, N),
        }
    return RegionSpec(K, M, N, regime, polys)


# ---------------------------------------------------------------------------
# parametric support enumeration

@dataclass(frozen=True, eq=False)
class _Candidates:
    """Vertices ``P + r * Q`` valid for ``lo <= r <= hi`` (full coordinates)."""

    P: np.ndarray
    Q: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    perms: np.ndarray  # position maps to apply when only orbit representatives were visited

    def at(self, r: float) -> np.ndarray:
        sel = (self.lo <= r + 1e-12) & (self.hi >= r - 1e-12)
        X = self.P[sel] + r * self.Q[sel]
        X = _unique_rows(X)
        if len(self.perms) > 1 and len(X):
            X = _unique_rows(np.vstack([X[:, np.argsort(pm)] for pm in self.perms]))
        return X


def _unique_rows(X: np.ndarray, tol: float = DEDUP_TOL) -> np.ndarray:
    if len(X) == 0:
        return X.reshape(0, X.shape[1] if X.ndim == 2 else 0)
    X = np.where(np.abs(X) < tol, 0.0, X)
    keys = np.round(X / tol).astype(np.int64)
    _, first = np.unique(keys, axis=0, return_index=True)
    return X[np.sort(first)]


def _canonical_sort(X: np.ndarray) -> np.ndarray:
    if len(X) == 0:
        return X
    order = np.lexsort(np.round(X, 9).T[::-1])
    return X[order]


def _symmetry_maps(A, alpha, beta, cond, K) -> np.ndarray:
    """User relabelings that map the row system onto itself."""
    groups = canonical_groups(K)
    n = len(groups)
    ident = np.arange(n)

    def signature(A_, cond_):
        return sorted(
            tuple(np.round(row, 9)) + (round(a, 9), round(b, 9), g)
            for row, a, b, g in zip(A_, alpha, beta, cond_)
        )

    base = signature(A, cond)
    maps = []
    for perm in itertools.permutations(range(K)):
        pm = groups.user_permutation_map(perm)
        # column j of the relabeled system is column inverse(pm)[j] of the original
        A_perm = np.empty_like(A)
        A_perm[:, pm] = A
        cond_perm = [int(pm[g]) if g >= 0 else -1 for g in cond]
        if signature(A_perm, cond_perm) == base:
            maps.append(pm)
    return np.array(maps) if maps else ident[None, :]


def _orbit_representatives(n: int, maps: np.ndarray) -> np.ndarray:
    masks = np.arange(1, 2**n, dtype=np.int64)
    canon = masks.copy()
    for pm in maps:
        image = np.zeros_like(masks)
        for j in range(n):
            image |= ((masks >> j) & 1) << int(pm[j])
        canon = np.minimum(canon, image)
    return masks[canon == masks]


def _enumerate_candidates(A, alpha, beta, cond, K=None, eps=MEMBERSHIP_EPS) -> _Candidates:
    """Support-wise vertex candidates of ``{x >= 0 : A x <= alpha + r beta}``.

    With ``K`` given the columns are group coordinates and user relabelings
    are exploited; otherwise every support is visited.
    """
    A = np.asarray(A, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    cond = np.asarray(cond, dtype=int)
    n = A.shape[1]
    if K is None:
        maps = np.arange(n)[None, :]
    else:
        maps = _symmetry_maps(A, alpha, beta, cond, K)
    reps = _orbit_representatives(n, maps)
    touches = A > 0
    out_P, out_Q, out_lo, out_hi = [], [], [], []
    combo_cache: dict = {}
    for mask in reps:
        support = np.array([j for j in range(n) if (mask >> j) & 1])
        size = support.size
        active = (cond < 0) | np.array([g >= 0 and bool((mask >> g) & 1) for g in cond])
        pool = np.flatnonzero(active & touches[:, support].any(axis=1))
        if pool.size < size:
            continue
        key = (pool.size, size)
        if key not in combo_cache:
            combo_cache[key] = np.array(list(itertools.combinations(range(pool.size), size)))
        combos = combo_cache[key]
        sub = A[np.ix_(pool, support)]
        systems = sub[combos]
        ok = np.abs(np.linalg.det(systems)) > 1e-9
        if not ok.any():
            continue
        systems, combos_ok = systems[ok], combos[ok]
        al, be = alpha[pool], beta[pool]
        P = np.linalg.solve(systems, al[combos_ok][..., None])[..., 0]
        Q = np.linalg.solve(systems, be[combos_ok][..., None])[..., 0]
        # feasibility on r >= 0:  coef * r <= rhs  for every pool row and x >= 0
        coef = np.concatenate([Q @ sub.T - be, -Q], axis=1)
        rhs = np.concatenate([al - P @ sub.T, P], axis=1) + eps
        pos, neg = coef > 1e-12, coef < -1e-12
        with np.errstate(divide="ignore", invalid="ignore"):
            bound = rhs / coef
        hi = np.where(pos, bound, np.inf).min(axis=1)
        lo = np.maximum(np.where(neg, bound, -np.inf).max(axis=1), 0.0)
        dead = (~pos & ~neg & (rhs < 0)).any(axis=1)
        keep = ~dead & (lo <= hi)
        if not keep.any():
            continue
        fullP = np.zeros((keep.sum(), n))
        fullQ = np.zeros((keep.sum(), n))
        fullP[:, support] = P[keep]
        fullQ[:, support] = Q[keep]
        out_P.append(fullP)
        out_Q.append(fullQ)
        out_lo.append(lo[keep])
        out_hi.append(hi[keep])
    if out_P:
        P, Q = np.vstack(out_P), np.vstack(out_Q)
        lo, hi = np.concatenate(out_lo), np.concatenate(out_hi)
    else:
        P = Q = np.zeros((0, n))
        lo = hi = np.zeros(0)
    return _Candidates(P, Q, lo, hi, maps)


_TEMPLATE_CACHE: dict = {}


def _template(kind: str, K: int) -> _Candidates:
    """Candidates for a region family in units of N, parametrized by ``r = M/N``."""
    key = (kind, K)
    if key in _TEMPLATE_CACHE:
        return _TEMPLATE_CACHE[key]
    groups = canonical_groups(K)
    n = len(groups)
    users = _user_rows(groups)
    if kind == "lowm":
        A, alpha, beta, cond = np.ones((1, n)), [0.0], [1.0], [-1]
    elif kind == "highm":
        A, alpha, beta, cond = users, np.ones(K), np.zeros(K), [-1] * K
    elif kind == "d1":
        A, alpha, beta, cond = users, np.zeros(K), np.full(K, 1.0 / K), [-1] * K
    elif kind == "outer":
        A = np.vstack([users, np.ones(n)])
        alpha, beta, cond = np.r_[np.ones(K), 0.0], np.r_[np.zeros(K), 1.0], [-1] * (K + 1)
    elif kind == "d2":
        sub, owners = _subspace_rows(groups)
        A = np.vstack([users, np.ones(n), sub])
        alpha = np.r_[np.ones(K), 0.0, [len(groups[j]) for j in owners]]
        beta = np.r_[np.zeros(K), 1.0, np.zeros(len(owners))]
        cond = [-1] * (K + 1) + owners
    else:
        raise ValueError(f"unknown region family {kind!r}")
    cands = _enumerate_candidates(A, alpha, beta, cond, K)
    _TEMPLATE_CACHE[key] = cands
    return cands


def _polytope_candidates(poly: Polytope) -> _Candidates:
    key = ("poly", poly.A.tobytes(), poly.A.shape, poly.c.tobytes(), poly.conditional)
    if key not in _TEMPLATE_CACHE:
        K = int(np.log2(poly.dim + 1))
        if 2**K - 1 != poly.dim:
            raise ConfigError(f"polytope dimension {poly.dim} is not 2**K - 1")
        _TEMPLATE_CACHE[key] = _enumerate_candidates(
            poly.A, poly.c, np.zeros(poly.n_rows), poly.cond_array, K
        )
    return _TEMPLATE_CACHE[key]


# ---------------------------------------------------------------------------
# corner points

def corner_points(region: Union[RegionSpec, Polytope]) -> CornerPointSet:
    """Nonzero corner points of a region, canonically sorted.

    For a :class:`RegionSpec` in the Mid regime this is the union of the
    vertices of ``D1`` and the support-wise vertices of ``D2``; the convex
    hull of these points and the origin is the inner bound. For a plain
    :class:`Polytope` without indicator rows the result is its vertex set
    minus the origin.
    """
    if isinstance(region, Polytope):
        pts = _canonical_sort(_polytope_candidates(region).at(0.0))
        return CornerPointSet(pts, ("polytope",) * len(pts))
    if not isinstance(region, RegionSpec):
        raise TypeError(f"expected RegionSpec or Polytope, got {type(region).__name__}")
    K, M, N = region.K, region.M, region.N
    r = M / N
    if region.regime is Regime.LOW_M:
        pts = _canonical_sort(M * np.eye(2**K - 1))
        return CornerPointSet(pts, ("axis",) * len(pts))
    if region.regime is Regime.HIGH_M:
        pts = _canonical_sort(N * _template("highm", K).at(r))
        return CornerPointSet(pts, ("inner",) * len(pts))
    d1 = N * _template("d1", K).at(r)
    d2 = N * _template("d2", K).at(r)
    both = np.vstack([d1, d2])
    tags = np.array(["D1"] * len(d1) + ["D2"] * len(d2), dtype=object)
    keys = np.round(np.where(np.abs(both) < DEDUP_TOL, 0.0, both) / DEDUP_TOL).astype(np.int64)
    _, first = np.unique(keys, axis=0, return_index=True)
    first = np.sort(first)
    pts, tags = both[first], tags[first]
    order = np.lexsort(np.round(pts, 9).T[::-1])
    return CornerPointSet(pts[order], tuple(tags[order]))


def disjoint_family_points(K: int, value: float) -> np.ndarray:
    """Points with ``value`` on a family of pairwise-disjoint groups, zero elsewhere.

    These are the corner points listed for the per-user box regions in the
    closed form; they are a subset of the true vertex set once ``K >= 3``.
    """
    groups = canonical_groups(K)
    n = len(groups)
    pts = []

    def extend(start, used, chosen):
        if chosen:
            x = np.zeros(n)
            x[chosen] = value
            pts.append(x)
        for j in range(start, n):
            if not (groups[j] & used):
                extend(j + 1, used | groups[j], chosen + [j])

    extend(0, frozenset(), [])
    return _canonical_sort(np.array(pts))


def brute_force_vertices(poly: Polytope, eps: float = MEMBERSHIP_EPS, max_systems: int = 2_000_000) -> CornerPointSet:
    """Every vertex (origin included) by solving all square subsystems.

    Candidate hyperplanes are the polytope rows (indicators ignored) and the
    coordinate planes. Independent of the support-based enumeration.
    """
    if not poly.is_bounded():
        raise UnboundedRegionError("some coordinate has no bounding row")
    n = poly.dim
    if n > 15:
        raise ValueError(f"brute force limited to dimension 15, got {n}")
    H = np.vstack([poly.A, np.eye(n)])
    h = np.r_[poly.c, np.zeros(n)]
    total = H.shape[0]
    from math import comb

    if comb(total, n) > max_systems:
        raise ValueError(f"{comb(total, n)} subsystems exceed the brute-force budget")
    found = []
    batch = []

    def flush():
        if not batch:
            return
        idx = np.array(batch)
        systems = H[idx]
        ok = np.abs(np.linalg.det(systems)) > 1e-9
        if ok.any():
            X = np.linalg.solve(systems[ok], h[idx[ok]][..., None])[..., 0]
            feas = np.all(X >= -eps, axis=1) & np.all(X @ poly.A.T <= poly.c + eps, axis=1)
            found.append(X[feas])
        batch.clear()

    for rows in itertools.combinations(range(total), n):
        batch.append(rows)
        if len(batch) >= 20000:
            flush()
    flush()
    pts = _canonical_sort(_unique_rows(np.vstack(found) if found else np.zeros((0, n))))
    return CornerPointSet(pts, ("brute",) * len(pts))


def same_point_sets(a: np.ndarray, b: np.ndarray, tol: float = DEDUP_TOL) -> bool:
    """Set equality of two point clouds under the infinity norm."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape[0] == 0 or b.shape[0] == 0:
        return a.shape[0] == b.shape[0]
    dist = np.abs(a[:, None, :] - b[None, :, :]).max(axis=2)
    return bool(np.all(dist.min(axis=1) < tol) and np.all(dist.min(axis=0) < tol))


# ---------------------------------------------------------------------------
# membership and gauges

def gauge(points: np.ndarray, d, eps: float = MEMBERSHIP_EPS):
    """Smallest ``t`` with ``d`` in ``t * conv(points ∪ {0})``.

    Returns ``(t, beta)`` with ``points.T @ beta == d`` and ``beta.sum() == t``;
    ``t`` is ``inf`` when no nonnegative combination reproduces ``d``.
    """
    d = np.asarray(d, dtype=float)
    if not np.any(d > eps):
        return 0.0, np.zeros(len(points))
    support = d > eps
    outside = ~support
    usable = np.all(np.abs(points[:, outside]) <= eps, axis=1)
    E = points[usable][:, support]
    if E.shape[0] == 0:
        return np.inf, np.zeros(len(points))
    try:
        res = solve_standard_form(np.ones(E.shape[0]), E.T, d[support])
    except InfeasibleLP:
        return np.inf, np.zeros(len(points))
    beta = np.zeros(len(points))
    beta[np.flatnonzero(usable)] = res.x
    return float(res.x.sum()), beta


def _polytope_contains(poly: Polytope, d: np.ndarray, eps: float) -> bool:
    if np.any(d < -eps):
        return False
    cond = poly.cond_array
    active = (cond < 0) | (d[np.maximum(cond, 0)] > eps)
    lhs = poly.A @ d
    return bool(np.all(lhs[active] <= poly.c[active] + eps))


def contains(region: Union[RegionSpec, Polytope], d, eps: float = MEMBERSHIP_EPS) -> bool:
    """Membership test honoring indicator-gated rows.

    For a Mid-regime :class:`RegionSpec` the answer comes from an LP over
    the corner points of ``D1`` and ``D2``.
    """
    d = np.asarray(d, dtype=float).reshape(-1)
    dim = region.dim
    if d.size != dim:
        raise ValueError(f"tuple has {d.size} entries, region has dimension {dim}")
    if isinstance(region, Polytope):
        return _polytope_contains(region, d, eps)
    if region.regime is not Regime.MID:
        return _polytope_contains(region.polytopes["inner"], d, eps)
    if np.any(d < -eps):
        return False
    if any(_polytope_contains(p, d, eps) for p in region.polytopes.values()):
        return True
    t, _ = gauge(corner_points(region).points, np.maximum(d, 0.0), eps)
    return t <= 1.0 + eps


def support_function(region: Union[RegionSpec, Polytope], w) -> float:
    """``max w @ d`` over the region (the origin included)."""
    w = np.asarray(w, dtype=float)
    if isinstance(region, Polytope) and region.has_conditional_rows:
        raise ValueError("support function of an indicator-gated set is taken via its RegionSpec")
    pts = corner_points(region).points
    return float(max(0.0, (pts @ w).max(initial=0.0)))


# ---------------------------------------------------------------------------
# serialization

def format_rational(x: float, max_den: int = 10_000, tol: float = 1e-9) -> str:
    """Exact decimal when ``x`` is a terminating fraction, ``p/q`` otherwise."""
    frac = Fraction(x).limit_denominator(max_den)
    if abs(float(frac) - x) > tol:
        return repr(float(x))
    den = frac.denominator
    while den % 2 == 0:
        den //= 2
    while den % 5 == 0:
        den //= 5
    if den != 1:
        return f"{frac.numerator}/{frac.denominator}"
    if frac.denominator == 1:
        return str(frac.numerator)
    digits = 0
    while (frac * 10**digits).denominator != 1:
        digits += 1
    return f"{float(frac):.{digits}f}"


def write_corner_points(points: CornerPointSet, K: int, stream: TextIO) -> None:
    """One record per point: 1-based index, source tag, coordinates in canonical group order."""
    labels = canonical_groups(K).labels()
    stream.write(",".join(["point", "source", *[f'"{lab}"' for lab in labels]]) + "\n")
    for j, (pt, src) in enumerate(zip(points.points, points.source), start=1):
        stream.write(",".join([str(j), str(src), *[format_rational(v) for v in pt]]) + "\n")
