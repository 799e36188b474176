"""Dynamical Phenomena Indicator (DPI) of a synchronization pattern.

    DPI = (N_sync / N_groups) / (N_unsync + N (N - 1) / 2)

``N_sync`` counts synchronized pairs, ``N_groups`` separately synchronized
groups and ``N_unsync`` the oscillators belonging to no group. The last one
is an oscillator count, not a pair count: only that reading reproduces the
reference DPI tables, and it is also what the closed forms for equal-size and
two-size group families reduce to.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .tdle import TdleSpectrum, pair_indices


@dataclass(frozen=True)
class SyncConfiguration:
    n: int
    group_sizes: tuple[int, ...] = ()

    def __post_init__(self):
        sizes = tuple(sorted((int(s) for s in self.group_sizes), reverse=True))
        if any(s < 2 for s in sizes):
            raise ValueError(f"synchronized groups need at least 2 members, got {sizes}")
        if sum(sizes) > self.n:
            raise ValueError(f"groups {sizes} hold more than n={self.n} oscillators")
        object.__setattr__(self, "group_sizes", sizes)

    @property
    def n_sync(self) -> int:
        return sum(s * (s - 1) // 2 for s in self.group_sizes)

    @property
    def n_unsync(self) -> int:
        return self.n - sum(self.group_sizes)

    @property
    def n_groups(self) -> int:
        return len(self.group_sizes)

    @property
    def triplet(self) -> tuple[int, int, int]:
        return self.n_sync, self.n_unsync, self.n_groups


@dataclass(frozen=True)
class DpiValue:
    value: float
    source: str = "measured-from-run"

    def __float__(self) -> float:
        return self.value


def dpi_from_counts(n: int, n_sync: float, n_unsync: float, n_groups: float) -> float:
    """DPI of a ``(N_sync, N_unsync, N_groups)`` triplet in an ``n``-node network."""
    if n_groups == 0:
        return 0.0
    return (n_sync / n_groups) / (n_unsync + n * (n - 1) / 2)


def dpi_exact(config: SyncConfiguration) -> Fraction:
    if config.n_groups == 0:
        return Fraction(0)
    n = config.n
    return Fraction(config.n_sync, config.n_groups) / (config.n_unsync + Fraction(n * (n - 1), 2))


def dpi(config: SyncConfiguration) -> DpiValue:
    return DpiValue(dpi_from_counts(config.n, *config.triplet))


def sync_groups(spectrum: TdleSpectrum, recent_norms, n: int | None = None,
                eps: float = 1e-12) -> SyncConfiguration:
    """Group the oscillators of a finished run.

    A pair counts as synchronized if it was frozen during the run, or if its
    largest distance over the closing window (``recent_norms``, one entry per
    pair) stayed below ``eps``. Groups are the connected components of the
    synchronized-pair graph, so synchronization is closed transitively;
    singletons are the unsynchronized oscillators.
    """
    n = spectrum.n if n is None else n
    recent_norms = np.asarray(recent_norms, dtype=float)
    linked = spectrum.frozen | (recent_norms < eps)
    return groups_from_pairs(n, linked)


def groups_from_pairs(n: int, linked) -> SyncConfiguration:
    """Connected components of the pair graph given as an upper-triangular mask."""
    linked = np.asarray(linked, dtype=bool)
    i, j = pair_indices(n)
    graph = coo_matrix((np.ones(int(linked.sum())), (i[linked], j[linked])), shape=(n, n))
    _, labels = connected_components(graph, directed=False)
    sizes = np.bincount(labels)
    return SyncConfiguration(n, tuple(int(s) for s in sizes if s >= 2))


def dpi_equal_groups(n, group_size, n_sync):
    """Closed form for groups of one common size ``group_size``.

    The group count is ``2 N_sync / ((N_G - 1) N_G)``; arguments may be arrays
    and need not describe an integer number of groups.
    """
    ng = np.asarray(group_size, dtype=float)
    if np.any(ng <= 1):
        raise ValueError("group size must exceed 1")
    n = np.asarray(n, dtype=float)
    out = (ng - 1) * ng / (2 * (n - 2 * np.asarray(n_sync, dtype=float) / (ng - 1) + (n - 1) * n / 2))
    return out if out.ndim else float(out)


def second_type_count(group_size1, groups1, n: int = 100) -> int:
    """Number of ``group_size1 + 1`` groups that fit in the oscillators left over."""
    return (n - groups1 * group_size1) // (group_size1 + 1)


def dpi_two_groups(group_size1, groups1, n: int = 100) -> float:
    """Closed form for ``groups1`` groups of ``group_size1`` plus maximal packing
    of groups one oscillator larger into the remainder."""
    if group_size1 < 2 or groups1 < 1:
        raise ValueError("need group size >= 2 and at least one first-type group")
    rest = n - groups1 * group_size1
    if rest < 0:
        raise ValueError(f"{groups1} groups of {group_size1} exceed n={n}")
    q = math.floor(rest / (group_size1 + 1))
    g1 = group_size1
    numer = groups1 * (g1 - 1) * g1 + q * g1 * (g1 + 1)
    denom = 2 * (groups1 + q) * (-groups1 * g1 - q * (g1 + 1) + n + n * (n - 1) // 2)
    return numer / denom


def two_groups_configuration(group_size1: int, groups1: int, n: int = 100) -> SyncConfiguration:
    q = second_type_count(group_size1, groups1, n)
    return SyncConfiguration(n, (group_size1,) * groups1 + (group_size1 + 1,) * q)


def _partitions(total: int, largest: int):
    if total == 0:
        yield ()
        return
    for part in range(min(total, largest), 1, -1):
        for rest in _partitions(total - part, part):
            yield (part,) + rest


def enumerate_configurations(n: int) -> list[SyncConfiguration]:
    """Every multiset of group sizes >= 2 with total <= n, by descending DPI."""
    if n > 12:
        raise ValueError("enumeration is limited to n <= 12")
    configs = [SyncConfiguration(n, parts)
               for total in range(2, n + 1)
               for parts in _partitions(total, total)]
    return sorted(configs, key=lambda c: (-dpi_exact(c), c.group_sizes))


def equal_groups_surface(n: int, group_sizes, n_sync_values) -> np.ndarray:
    """Grid of :func:`dpi_equal_groups`, rows over group size, columns over N_sync."""
    g = np.asarray(group_sizes, dtype=float)[:, None]
    s = np.asarray(n_sync_values, dtype=float)[None, :]
    return dpi_equal_groups(n, g, s)


def two_groups_surface(n: int, group_sizes, groups1_values) -> np.ndarray:
    """Grid of :func:`dpi_two_groups`; infeasible cells are NaN."""
    out = np.full((len(group_sizes), len(groups1_values)), np.nan)
    for a, g in enumerate(group_sizes):
        for b, k in enumerate(groups1_values):
            if k * g <= n:
                out[a, b] = dpi_two_groups(int(g), int(k), n)
    return out
