"""Core domain types: system dimensions, multicast group indexing and the
dense vectors (DoF tuples, message lengths) defined over those groups.

Groups are handled internally as ``frozenset`` of 0-based user indices and
vectors are indexed 0-based in canonical group order. Everything that is
written out for humans uses 1-based users and positions.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "ConfigError",
    "Regime",
    "SystemConfig",
    "GroupIndex",
    "canonical_groups",
    "as_dof_tuple",
    "as_message_lengths",
    "format_group",
    "parse_group",
    "parse_number",
]


class ConfigError(ValueError):
    """Raised for invalid system or experiment parameters."""


class Regime(enum.Enum):
    """Antenna regime of a ``(M, N)`` pair for a given number of users."""

    LOW_M = "LowM"  # M/N <= 1
    MID = "Mid"  # 1 < M/N <= K
    HIGH_M = "HighM"  # M/N > K

    @classmethod
    def of(cls, K: int, M: float, N: float) -> "Regime":
        # integer cross-multiplication keeps the boundaries exact
        if M <= N:
            return cls.LOW_M
        if M <= K * N:
            return cls.MID
        return cls.HIGH_M


@dataclass(frozen=True)
class SystemConfig:
    """Dimensions of a K-user (M, N) cache-aided MIMO broadcast channel.

    Parameters
    ----------
    K : int
        Number of users, at least 2.
    M : int
        Transmit antennas at the base station.
    N : int
        Receive antennas per user.
    L : int
        Number of files in the library, ``L >= K``.
    F : int
        File length in bits (used by placement simulation and the link
        simulator only).
    mu : float
        Normalized cache size ``Q / L`` in ``[0, 1]``.
    P : float
        Transmit power relative to unit noise variance (link simulator only).
    """

    K: int
    M: int
    N: int
    L: int = 4
    F: int = 100
    mu: float = 0.0
    P: float = 1e3

    def __post_init__(self):
        for name in ("K", "M", "N", "L", "F"):
            value = getattr(self, name)
            if isinstance(value, bool) or int(value) != value:
                raise ConfigError(f"{name} must be an integer, got {value!r}")
            object.__setattr__(self, name, int(value))
        if self.K < 2:
            raise ConfigError(f"K must be >= 2, got {self.K}")
        if self.M < 1 or self.N < 1:
            raise ConfigError(f"antenna counts must be >= 1, got M={self.M}, N={self.N}")
        if self.L < self.K:
            raise ConfigError(f"library size L={self.L} must be >= K={self.K}")
        if self.F < 1:
            raise ConfigError(f"file length F must be positive, got {self.F}")
        if not 0.0 <= float(self.mu) <= 1.0:
            raise ConfigError(f"mu must lie in [0, 1], got {self.mu}")
        object.__setattr__(self, "mu", float(self.mu))
        if not float(self.P) > 0:
            raise ConfigError(f"P must be positive, got {self.P}")
        object.__setattr__(self, "P", float(self.P))

    @property
    def regime(self) -> Regime:
        return Regime.of(self.K, self.M, self.N)

    @property
    def ratio(self) -> float:
        return self.M / self.N

    @property
    def n_groups(self) -> int:
        return 2**self.K - 1

    @property
    def Q(self) -> float:
        """Cache size in files."""
        return self.mu * self.L

    def replace(self, **changes) -> "SystemConfig":
        return replace(self, **changes)

    @classmethod
    def from_mapping(cls, values: Mapping[str, object]) -> "SystemConfig":
        """Build from a flat key-value mapping (case-insensitive keys)."""
        lowered = {str(k).lower(): v for k, v in values.items()}
        kwargs = {}
        for name in ("K", "M", "N", "L", "F"):
            if name.lower() in lowered:
                kwargs[name] = int(parse_number(lowered[name.lower()]))
        for name in ("mu", "P"):
            if name.lower() in lowered:
                kwargs[name] = float(parse_number(lowered[name.lower()]))
        missing = {"K", "M", "N"} - kwargs.keys()
        if missing:
            raise ConfigError(f"missing config keys: {sorted(missing)}")
        return cls(**kwargs)


@dataclass(frozen=True)
class GroupIndex:
    """Canonical ordering of the ``2**K - 1`` nonempty user subsets.

    Smaller groups come first; groups of equal size are ordered
    lexicographically on their sorted members.
    """

    K: int
    order: tuple = field(repr=False)

    def __len__(self) -> int:
        return len(self.order)

    def __iter__(self):
        return iter(self.order)

    def __getitem__(self, position: int) -> frozenset:
        return self.order[position]

    def index(self, group: Iterable[int]) -> int:
        return self._positions[frozenset(group)]

    @property
    def _positions(self) -> dict:
        return _positions(self.K)

    @property
    def sizes(self) -> np.ndarray:
        return np.array([len(g) for g in self.order])

    @property
    def incidence(self) -> np.ndarray:
        """``(K, n_groups)`` 0/1 matrix, entry ``[i, j]`` set when user i is in group j."""
        return _incidence(self.K).copy()

    def labels(self) -> list[str]:
        return [format_group(g) for g in self.order]

    def supersets(self, position: int) -> list[int]:
        """Positions of the strict supersets of the group at ``position``."""
        group = self.order[position]
        return [j for j, other in enumerate(self.order) if group < other]

    def user_permutation_map(self, perm: Sequence[int]) -> np.ndarray:
        """Position map induced by relabeling user ``u`` as ``perm[u]``."""
        return np.array([self.index(perm[u] for u in g) for g in self.order])


def canonical_groups(K: int) -> GroupIndex:
    """Return the canonical :class:`GroupIndex` for ``K`` users."""
    if isinstance(K, bool) or int(K) != K or K < 2:
        raise ConfigError(f"K must be an integer >= 2, got {K!r}")
    return _group_index(int(K))


@lru_cache(maxsize=None)
def _group_index(K: int) -> GroupIndex:
    order = tuple(
        frozenset(c)
        for size in range(1, K + 1)
        for c in itertools.combinations(range(K), size)
    )
    return GroupIndex(K, order)


@lru_cache(maxsize=None)
def _positions(K: int) -> dict:
    return {g: j for j, g in enumerate(_group_index(K).order)}


@lru_cache(maxsize=None)
def _incidence(K: int) -> np.ndarray:
    order = _group_index(K).order
    out = np.zeros((K, len(order)))
    for j, g in enumerate(order):
        out[list(g), j] = 1.0
    out.setflags(write=False)
    return out


def _as_group_vector(values, K: int | None, what: str) -> np.ndarray:
    arr = np.array(values, dtype=float).reshape(-1)
    n = arr.size
    if K is not None and n != 2**K - 1:
        raise ConfigError(f"{what} must have {2**K - 1} entries for K={K}, got {n}")
    if n < 3 or (n + 1) & n:
        raise ConfigError(f"{what} length {n} is not of the form 2**K - 1")
    if not np.all(np.isfinite(arr)):
        raise ConfigError(f"{what} has non-finite entries")
    arr.setflags(write=False)
    return arr


def as_dof_tuple(values, K: int | None = None, eps: float = 1e-12) -> np.ndarray:
    """Validate a DoF tuple and return it as a read-only float array."""
    arr = _as_group_vector(values, K, "DoF tuple")
    if np.any(arr < -eps):
        raise ConfigError("DoF tuple entries must be nonnegative")
    return arr


def as_message_lengths(values, K: int | None = None, eps: float = 1e-12) -> np.ndarray:
    """Validate a message-length vector (fractions of F, each in ``[0, 1]``)."""
    arr = _as_group_vector(values, K, "message length vector")
    if np.any(arr < -eps) or np.any(arr > 1 + eps):
        raise ConfigError("message lengths must lie in [0, 1]")
    return arr


def format_group(group: Iterable[int]) -> str:
    """``{0, 2}`` -> ``"{1,3}"`` (1-based, sorted)."""
    return "{" + ",".join(str(u + 1) for u in sorted(group)) + "}"


def parse_group(text: str) -> frozenset:
    """Inverse of :func:`format_group`; accepts ``{}`` or ``∅`` for the empty set."""
    body = text.strip()
    if body in ("∅", "{}", "()", "-"):
        return frozenset()
    body = body.strip("{}() ")
    try:
        members = [int(tok) - 1 for tok in body.replace(";", ",").split(",") if tok.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse user set {text!r}") from None
    if any(m < 0 for m in members):
        raise ConfigError(f"user indices are 1-based, got {text!r}")
    return frozenset(members)


def parse_number(text) -> float:
    """Parse ``"0.25"``, ``"3/20"`` or a plain number."""
    if isinstance(text, (int, float, Fraction)):
        return float(text)
    try:
        return float(Fraction(str(text).strip()))
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"cannot parse number {text!r}") from None
