from fractions import Fraction
from itertools import combinations_with_replacement
from math import comb

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tdlescan.dpi import (
    SyncConfiguration,
    dpi,
    dpi_equal_groups,
    dpi_exact,
    dpi_from_counts,
    dpi_two_groups,
    enumerate_configurations,
    equal_groups_surface,
    groups_from_pairs,
    second_type_count,
    sync_groups,
    two_groups_configuration,
    two_groups_surface,
)
from tdlescan.tdle import TdleSpectrum, pair_index


@st.composite
def configurations(draw, max_n=40):
    n = draw(st.integers(2, max_n))
    sizes = []
    left = n
    while left >= 2 and draw(st.booleans()):
        s = draw(st.integers(2, left))
        sizes.append(s)
        left -= s
    return SyncConfiguration(n, tuple(sizes))


def test_configuration_counts():
    c = SyncConfiguration(8, (2, 3))
    assert c.group_sizes == (3, 2)
    assert c.triplet == (4, 3, 2)
    with pytest.raises(ValueError):
        SyncConfiguration(4, (1, 2))
    with pytest.raises(ValueError):
        SyncConfiguration(4, (3, 2))


@given(configurations())
def test_configuration_invariants(c):
    assert sum(c.group_sizes) + c.n_unsync == c.n
    assert c.n_sync == sum(comb(s, 2) for s in c.group_sizes)
    assert c.n_groups == len(c.group_sizes)


@given(configurations())
def test_dpi_range_and_extremes(c):
    v = dpi(c).value
    if c.n_groups == 0:
        assert v == 0
    else:
        assert 0 < v <= 1
    assert (v == 1) == (c.group_sizes == (c.n,))
    assert v == pytest.approx(float(dpi_exact(c)), rel=1e-14)


@pytest.mark.parametrize("n,triplet,expected", [
    (8, (28, 0, 1), 1.0),
    (8, (21, 1, 1), 0.724),
    (8, (2, 4, 2), 0.031),
    (8, (4, 3, 2), 0.065),
    (8, (1, 6, 1), 0.029),
    (4, (3, 1, 1), 0.43),
])
def test_dpi_examples(n, triplet, expected):
    digits = len(str(expected).split(".")[1])
    assert round(dpi_from_counts(n, *triplet), digits) == expected


def test_dpi_without_groups_is_zero():
    assert dpi(SyncConfiguration(5)).value == 0.0
    assert dpi(SyncConfiguration(5)).source == "measured-from-run"


def test_groups_from_pairs_closes_transitively():
    n = 8
    linked = np.zeros(28, dtype=bool)
    for i, j in [(0, 1), (1, 2), (3, 4)]:   # (0, 2) missing but implied
        linked[pair_index(n, i, j)] = True
    c = groups_from_pairs(n, linked)
    assert c.triplet == (4, 3, 2)
    assert round(dpi(c).value, 3) == 0.065


def test_sync_groups_uses_frozen_and_recent_norms():
    sp = TdleSpectrum(8)
    sp.frozen[:] = True
    assert sync_groups(sp, np.ones(28)).triplet == (28, 0, 1)
    sp.frozen[:] = False
    assert sync_groups(sp, np.ones(28)).triplet == (0, 8, 0)
    norms = np.ones(28)
    norms[pair_index(8, 5, 7)] = 1e-13
    sp.frozen[pair_index(8, 0, 3)] = True
    assert sync_groups(sp, norms).group_sizes == (2, 2)


def test_equal_groups_closed_form_examples():
    assert dpi_equal_groups(8, 8, 28) == pytest.approx(1.0)
    assert round(dpi_equal_groups(8, 2, 1), 3) == 0.029
    with pytest.raises(ValueError):
        dpi_equal_groups(8, 1, 0)


def test_equal_groups_matches_configurations_n8():
    for g in range(2, 9):
        for k in range(1, 8 // g + 1):
            c = SyncConfiguration(8, (g,) * k)
            exact = dpi_exact(c)
            assert abs(dpi_equal_groups(8, g, c.n_sync) - float(exact)) <= 1e-12 * float(exact)


@given(st.integers(2, 100), st.integers(1, 50), st.integers(2, 100))
def test_equal_groups_monotone_in_group_size(g, k, n):
    if (g + 1) * k > n:
        return
    low = dpi_equal_groups(n, g, k * comb(g, 2))
    high = dpi_equal_groups(n, g + 1, k * comb(g + 1, 2))
    assert high > low


def test_two_groups_examples():
    assert dpi_two_groups(100, 1) == pytest.approx(1.0)
    assert dpi_two_groups(2, 50) == pytest.approx(1 / 4950)
    assert second_type_count(2, 50) == 0
    with pytest.raises(ValueError):
        dpi_two_groups(10, 11)
    with pytest.raises(ValueError):
        dpi_two_groups(1, 3)


def test_two_groups_matches_configurations_n100():
    for g in range(2, 101):
        for k in range(1, 100 // g + 1):
            c = two_groups_configuration(g, k)
            assert sum(c.group_sizes) <= 100
            exact = float(dpi_exact(c))
            assert abs(dpi_two_groups(g, k) - exact) <= 1e-12 * exact


def test_surfaces():
    eq = equal_groups_surface(100, [2, 5, 10], [10, 100])
    assert eq.shape == (3, 2)
    two = two_groups_surface(100, [2, 60], [1, 2])
    assert np.isnan(two[1, 1]) and np.isfinite(two[0, 0])


def test_enumeration_small_cases():
    four = enumerate_configurations(4)
    assert [c.triplet for c in four] == [(6, 0, 1), (3, 1, 1), (2, 0, 2), (1, 2, 1)]
    two = enumerate_configurations(2)
    assert len(two) == 1 and dpi(two[0]).value == 1.0
    assert len(enumerate_configurations(8)) == 21
    with pytest.raises(ValueError):
        enumerate_configurations(13)


@pytest.mark.parametrize("n", range(2, 13))
def test_enumeration_is_sorted_and_complete(n):
    configs = enumerate_configurations(n)
    values = [dpi_exact(c) for c in configs]
    assert values == sorted(values, reverse=True)
    multisets = {tuple(sorted(combo, reverse=True))
                 for k in range(1, n // 2 + 1)
                 for combo in combinations_with_replacement(range(2, n + 1), k)
                 if sum(combo) <= n}
    assert len(configs) == len(multisets)
    assert {c.group_sizes for c in configs} == multisets


@pytest.mark.parametrize("n", [2, 3, 4, 5, 6, 7, 8, 10])
def test_dpi_distinct_where_injective(n):
    values = [dpi_exact(c) for c in enumerate_configurations(n)]
    assert len(set(values)) == len(values)


def test_dpi_collision_at_nine_oscillators():
    """Distinct patterns can share a DPI value; the first such case is n = 9."""
    a = SyncConfiguration(9, (5,))
    b = SyncConfiguration(9, (6, 3))
    assert dpi_exact(a) == dpi_exact(b) == Fraction(1, 4)
