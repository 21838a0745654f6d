"""Cache placement and coded-message generation.

A cache state records, for every file and every subset of users, the
fraction of the file stored exactly at that subset. Subsets are encoded as
bitmasks (bit ``i`` set when user ``i`` holds the piece), so column 0 is the
uncached part. Coded messages follow the XOR rule: the message for group
``A`` combines, for every ``i`` in ``A``, the piece of user ``i``'s file
cached at ``A \\ {i}``; shorter pieces are zero-padded.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from importlib import resources
from math import comb
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .model import ConfigError, SystemConfig, canonical_groups, parse_group, parse_number

__all__ = [
    "CacheError",
    "CacheState",
    "DemandVector",
    "centralized_place",
    "decentralized_place",
    "load_cache_fixture",
    "parse_cache_table",
    "load_lengths_fixture",
    "table1_cache",
    "example1_lengths",
    "generate_coded_messages",
    "worst_case_demand",
    "random_demand",
    "all_demands",
    "DEFAULT_BITS",
]

DEFAULT_BITS = 10_000
PARTITION_TOL = 1e-9


class CacheError(ValueError):
    """A cache state violates the partition or memory constraint."""


def _mask(group: Iterable[int]) -> int:
    return sum(1 << u for u in group)


@dataclass(frozen=True, eq=False)
class CacheState:
    """Subfile lengths per file and caching subset.

    Parameters
    ----------
    lengths : ndarray, shape (L, 2**K)
        ``lengths[l, m]`` is the fraction of file ``l`` cached exactly at the
        user set encoded by bitmask ``m``.
    K : int
    kind : {"centralized", "decentralized", "fixture"}
    mu : float, optional
        Normalized cache size; when given the memory constraint is checked.
    """

    lengths: np.ndarray
    K: int
    kind: str = "fixture"
    mu: float | None = None

    def __post_init__(self):
        arr = np.array(self.lengths, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 2**self.K:
            raise CacheError(f"lengths must have shape (L, {2**self.K}), got {arr.shape}")
        if np.any(arr < -PARTITION_TOL) or np.any(arr > 1 + PARTITION_TOL):
            raise CacheError("subfile lengths must lie in [0, 1]")
        totals = arr.sum(axis=1)
        bad = np.flatnonzero(np.abs(totals - 1.0) > PARTITION_TOL)
        if bad.size:
            raise CacheError(
                f"file {bad[0] + 1}: subfiles sum to {totals[bad[0]]:.6g}, expected 1"
            )
        arr.setflags(write=False)
        object.__setattr__(self, "lengths", arr)
        if self.mu is not None:
            usage = self.memory_usage()
            budget = self.mu * self.L
            over = np.flatnonzero(usage > budget + 1e-6)
            if over.size:
                raise CacheError(
                    f"user {over[0] + 1} stores {usage[over[0]]:.6g} files, budget is {budget:.6g}"
                )

    @property
    def L(self) -> int:
        return self.lengths.shape[0]

    def length(self, file: int, group: Iterable[int]) -> float:
        """Fraction of ``file`` (0-based) cached exactly at ``group``."""
        return float(self.lengths[file, _mask(group)])

    def memory_usage(self) -> np.ndarray:
        """Files' worth of content stored at each user."""
        masks = np.arange(2**self.K)
        held = ((masks[None, :] >> np.arange(self.K)[:, None]) & 1).astype(float)
        return held @ self.lengths.sum(axis=0)

    def relabel(self, perm) -> "CacheState":
        """Cache state after user ``u`` is renamed ``perm[u]``."""
        masks = np.arange(2**self.K)
        image = np.zeros_like(masks)
        for u, v in enumerate(perm):
            image |= ((masks >> u) & 1) << v
        out = np.zeros_like(self.lengths)
        out[:, image] = self.lengths
        return CacheState(out, self.K, self.kind, self.mu)


@dataclass(frozen=True)
class DemandVector:
    """Requested file of every user, 0-based internally."""

    files: tuple
    L: int

    def __post_init__(self):
        files = tuple(int(x) for x in self.files)
        if any(not 0 <= x < self.L for x in files):
            raise ConfigError(f"demands must lie in [1, {self.L}], got {[x + 1 for x in files]}")
        object.__setattr__(self, "files", files)

    @classmethod
    def from_one_based(cls, files, L: int) -> "DemandVector":
        return cls(tuple(int(x) - 1 for x in files), L)

    def one_based(self) -> tuple:
        return tuple(x + 1 for x in self.files)

    def __len__(self) -> int:
        return len(self.files)


# ---------------------------------------------------------------------------
# placement

def centralized_place(cfg: SystemConfig) -> CacheState:
    """Every file split evenly over all user subsets of size ``K mu``."""
    K, L, mu = cfg.K, cfg.L, cfg.mu
    t = K * mu
    if abs(t - round(t)) > 1e-9:
        raise ConfigError(f"centralized placement needs K*mu integer, got {t:g}")
    t = int(round(t))
    lengths = np.zeros((L, 2**K))
    share = 1.0 / comb(K, t)
    for group in itertools.combinations(range(K), t):
        lengths[:, _mask(group)] = share
    return CacheState(lengths, K, "centralized", mu)


def decentralized_place(cfg: SystemConfig, seed: int = 0, bits: int = DEFAULT_BITS) -> CacheState:
    """Random placement: each user caches ``round(mu * bits)`` units of every file.

    Units are drawn uniformly without replacement, independently per user
    and file. ``bits=0`` returns the large-file limit, where a unit is
    cached at exactly the set ``S`` with probability
    ``mu**|S| * (1 - mu)**(K - |S|)``.
    """
    K, L, mu = cfg.K, cfg.L, cfg.mu
    masks = np.arange(2**K)
    if bits == 0:
        size = np.array([bin(m).count("1") for m in masks])
        row = mu**size * (1 - mu) ** (K - size)
        return CacheState(np.tile(row, (L, 1)), K, "decentralized", mu)
    if bits < 0:
        raise ConfigError(f"bits must be >= 0, got {bits}")
    q = int(round(mu * bits))
    rng = np.random.default_rng(seed)
    held = np.zeros((L, K, bits), dtype=bool)
    if 0 < q < bits:
        keys = rng.random((L, K, bits))
        chosen = np.argpartition(keys, q - 1, axis=2)[..., :q]
        np.put_along_axis(held, chosen, True, axis=2)
    elif q >= bits:
        held[:] = True
    owner = (held * (1 << np.arange(K))[None, :, None]).sum(axis=1)
    counts = np.stack([np.bincount(owner[l], minlength=2**K) for l in range(L)])
    return CacheState(counts / bits, K, "decentralized", q / bits)


# ---------------------------------------------------------------------------
# fixtures

def parse_cache_table(text: str, K: int | None = None, mu: float | None = None) -> CacheState:
    """Parse a whitespace table with a header of user-set labels and one row per file.

    A leading ``file`` column is optional. ``#`` starts a comment. The
    empty set is written ``∅`` or ``{}``.
    """
    rows = [ln.split("#", 1)[0].split() for ln in text.splitlines()]
    rows = [r for r in rows if r]
    if len(rows) < 2:
        raise CacheError("cache table needs a header and at least one file row")
    header = rows[0]
    has_index = header[0].lower() in ("file", "l", "ℓ")
    if has_index:
        header = header[1:]
    groups = [parse_group(h) for h in header]
    users = set().union(*groups)
    K = K if K is not None else max(users) + 1
    if len(groups) != 2**K or len(set(groups)) != 2**K or any(max(g, default=-1) >= K for g in groups):
        raise CacheError(f"header must list all {2**K} user subsets of {K} users exactly once")
    lengths = np.zeros((len(rows) - 1, 2**K))
    for l, row in enumerate(rows[1:]):
        cells = row[1:] if has_index else row
        if len(cells) != len(groups):
            raise CacheError(f"file row {l + 1} has {len(cells)} entries, expected {len(groups)}")
        for g, cell in zip(groups, cells):
            lengths[l, _mask(g)] = parse_number(cell)
    return CacheState(lengths, K, "fixture", mu)


def load_cache_fixture(source, K: int | None = None, mu: float | None = None) -> CacheState:
    """Load a cache table from a path, a text blob, or a nested mapping.

    A mapping has the form ``{file: {group_label: length}}`` with 1-based files.
    """
    if isinstance(source, dict):
        files = sorted(source, key=int)
        groups = {parse_group(g) for f in files for g in source[f]}
        K = K if K is not None else max(set().union(*groups)) + 1
        lengths = np.zeros((len(files), 2**K))
        for l, key in enumerate(files):
            cells = {parse_group(g): parse_number(v) for g, v in source[key].items()}
            if len(cells) != 2**K:
                raise CacheError(f"file {key}: expected {2**K} user subsets, got {len(cells)}")
            for g, v in cells.items():
                lengths[l, _mask(g)] = v
        return CacheState(lengths, K, "fixture", mu)
    if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source):
        text = Path(source).read_text(encoding="utf-8")
    else:
        text = str(source)
    return parse_cache_table(text, K, mu)


def load_lengths_fixture(source, K: int | None = None) -> np.ndarray:
    """Read a message-length vector given as a labeled two-row table."""
    if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source):
        text = Path(source).read_text(encoding="utf-8")
    else:
        text = str(source)
    rows = [ln.split("#", 1)[0].split() for ln in text.splitlines()]
    rows = [r for r in rows if r]
    if len(rows) != 2 or len(rows[0]) != len(rows[1]):
        raise ConfigError("length fixture needs one header row and one value row of equal width")
    groups = [parse_group(g) for g in rows[0]]
    K = K if K is not None else max(set().union(*groups)) + 1
    index = canonical_groups(K)
    f = np.zeros(len(index))
    for g, v in zip(groups, rows[1]):
        f[index.index(g)] = parse_number(v)
    if len(set(groups)) != len(index):
        raise ConfigError(f"length fixture must cover all {len(index)} groups")
    return f


def _data_text(name: str) -> str:
    return resources.files("cachedof").joinpath("data", name).read_text(encoding="utf-8")


def table1_cache() -> CacheState:
    """Shipped three-user placement with four files and ``mu = 0.4``."""
    return parse_cache_table(_data_text("table1.txt"), K=3, mu=0.4)


def example1_lengths() -> np.ndarray:
    """Shipped message lengths of the three-user worked example."""
    return load_lengths_fixture(_data_text("example1_f.txt"), K=3)


# ---------------------------------------------------------------------------
# delivery

def generate_coded_messages(cache: CacheState, demand: DemandVector) -> np.ndarray:
    """Zero-padded XOR message lengths in canonical group order."""
    if len(demand) != cache.K:
        raise ConfigError(f"demand has {len(demand)} entries for {cache.K} users")
    if demand.L != cache.L:
        raise ConfigError(f"demand refers to {demand.L} files, cache holds {cache.L}")
    groups = canonical_groups(cache.K)
    out = np.zeros(len(groups))
    for j, A in enumerate(groups):
        mask = _mask(A)
        out[j] = max(cache.lengths[demand.files[i], mask & ~(1 << i)] for i in A)
    return out


def worst_case_demand(cfg: SystemConfig) -> DemandVector:
    """Distinct demands: user ``i`` asks for file ``i``."""
    if cfg.L < cfg.K:
        raise ConfigError(f"distinct demands need L >= K, got L={cfg.L}, K={cfg.K}")
    return DemandVector(tuple(range(cfg.K)), cfg.L)


def random_demand(cfg: SystemConfig, rng: np.random.Generator) -> DemandVector:
    return DemandVector(tuple(rng.integers(0, cfg.L, size=cfg.K)), cfg.L)


def all_demands(cfg: SystemConfig) -> Iterator[DemandVector]:
    for files in itertools.product(range(cfg.L), repeat=cfg.K):
        yield DemandVector(files, cfg.L)
