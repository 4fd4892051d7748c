import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from pairsel.bandwidths import build_grid, window
from pairsel.errors import EmptyGridError, InvalidParameterError


def enumerate_window(m, d):
    """Independent enumeration of dyadic vectors in the window by brute force."""
    lo, hi = math.log(m) / m, math.exp(-math.sqrt(math.log(m)))
    kmax = int(math.ceil(-math.log2(lo))) + 1
    out = set()

    def rec(prefix):
        if len(prefix) == d:
            v = 2.0 ** -sum(prefix)
            if lo <= v <= hi:
                out.add(tuple(2.0 ** -k for k in prefix))
            return
        for k in range(kmax + 1):
            rec(prefix + [k])

    rec([])
    return out


def test_window_values():
    lo, hi = window(100)
    assert lo == pytest.approx(0.0461, abs=1e-4)
    assert hi == pytest.approx(0.1169, abs=1e-4)
    lo, hi = window(10000)
    assert lo == pytest.approx(9.21e-4, abs=1e-6)
    assert hi == pytest.approx(0.0481, abs=1e-4)


def test_small_examples():
    assert [h.h for h in build_grid(100)] == [(2.0 ** -4,)]
    assert [h.h[0] for h in build_grid(10000)] == [2.0 ** -k for k in range(5, 11)]


@given(st.integers(3, 2 ** 20), st.integers(1, 3))
def test_grid_matches_enumeration(m, d):
    try:
        grid = build_grid(m, d)
    except EmptyGridError:
        assert not enumerate_window(m, d)
        return
    members = [h.h for h in grid]
    assert set(members) == enumerate_window(m, d)
    assert len(set(members)) == len(members)
    lo, hi = window(m)
    for h in grid:
        assert lo <= h.v_h <= hi
        assert all(math.log2(v) == int(math.log2(v)) for v in h.h)
    keys = [h.sort_key() for h in grid]
    assert keys == sorted(keys)
    assert len(grid) <= (math.log2(m) + 1) ** d


@given(st.integers(16, 2 ** 20), st.integers(1, 3))
def test_isotropic_subset(m, d):
    try:
        full = build_grid(m, d)
    except EmptyGridError:
        return
    try:
        iso = build_grid(m, d, "isotropic")
    except EmptyGridError:
        return
    assert set(h.h for h in iso) <= set(h.h for h in full)
    assert all(len(set(h.h)) == 1 for h in iso)


def test_empty_window_names_bound():
    with pytest.raises(EmptyGridError, match="ln"):
        build_grid(3)


def test_small_m_rejected():
    with pytest.raises(InvalidParameterError):
        build_grid(2)
