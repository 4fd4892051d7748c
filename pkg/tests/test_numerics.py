import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, stats

from pairsel.errors import IncompatibleGridError, InvalidParameterError, InvalidStepError
from pairsel.numerics import (GriddedFunction, Sample, UniformGrid, central_gradient, convolve, finite_difference,
                              format_float, grid_tolerance, lp_norm, next_pow2, read_gridded_csv, read_sample_csv,
                              write_gridded_csv, write_sample_csv)


def on_grid(grid, fn):
    return GriddedFunction(grid, fn(grid.mesh()[..., 0]))


def test_grid_spacing_is_exact():
    g = UniformGrid((-1.0,), (2.0,), (31,))
    assert g.spacing == ((2.0 - -1.0) / 30,)
    assert g.size == 31 and g.shape == (31,)


def test_grid_rejects_bad_boxes():
    with pytest.raises(InvalidParameterError):
        UniformGrid((1.0,), (0.0,), (10,))
    with pytest.raises(InvalidParameterError):
        UniformGrid((0.0,), (1.0,), (1,))


def test_gridded_function_rejects_nan():
    g = UniformGrid((0.0,), (1.0,), (3,))
    with pytest.raises(InvalidParameterError):
        GriddedFunction(g, [0.0, np.nan, 1.0])


def test_sample_needs_points():
    with pytest.raises(InvalidParameterError):
        Sample(np.zeros((0, 1)))
    assert Sample(np.arange(5.0)).dim == 1


def test_next_pow2():
    assert [next_pow2(n) for n in (1, 2, 3, 1000, 1024)] == [1, 2, 4, 1024, 1024]


def test_lp_norm_indicator():
    g = UniformGrid.lattice(-1.0, 2.0, 2.0 ** -10)
    f = on_grid(g, lambda x: ((x > 0) & (x <= 1)).astype(float))
    assert lp_norm(f, 2) == pytest.approx(1.0, abs=grid_tolerance(g) + 2.0 ** -10)


@pytest.mark.parametrize("p", [1.0, 1.5, 2.0, 4.0])
def test_lp_norm_constant(p):
    g = UniformGrid((0.0, 0.0), (1.0, 2.0), (11, 21))
    f = GriddedFunction(g, np.full(g.shape, 3.0))
    vol = g.size * g.cell_volume
    assert lp_norm(f, p) == pytest.approx(3.0 * vol ** (1 / p), rel=1e-12)


def test_lp_norm_gaussian_matches_quadrature():
    g = UniformGrid.lattice(-8.0, 8.0, 2.0 ** -7)
    f = on_grid(g, stats.norm.pdf)
    oracle = math.sqrt(integrate.quad(lambda x: stats.norm.pdf(x) ** 2, -np.inf, np.inf)[0])
    assert oracle == pytest.approx(0.531126, abs=1e-6)
    assert lp_norm(f, 2) == pytest.approx(oracle, abs=1e-8)


def test_lp_norm_rejects_small_p():
    g = UniformGrid((0.0,), (1.0,), (3,))
    with pytest.raises(InvalidParameterError):
        lp_norm(GriddedFunction(g, [1.0, 1.0, 1.0]), 0.5)


values_1d = st.lists(st.floats(-10, 10, allow_nan=False), min_size=4, max_size=40)


@given(values_1d, st.floats(-5, 5, allow_nan=False), st.sampled_from([1.0, 1.5, 2.0, 3.0]))
def test_lp_norm_homogeneous(vals, c, p):
    g = UniformGrid((0.0,), (1.0,), (len(vals),))
    f = GriddedFunction(g, vals)
    assert lp_norm(f * c, p) == pytest.approx(abs(c) * lp_norm(f, p), rel=1e-12, abs=1e-300)


@given(st.data(), st.integers(4, 40), st.sampled_from([1.0, 2.0, 2.5]))
def test_lp_norm_triangle(data, n, p):
    g = UniformGrid((0.0,), (1.0,), (n,))
    a = data.draw(st.lists(st.floats(-10, 10), min_size=n, max_size=n))
    b = data.draw(st.lists(st.floats(-10, 10), min_size=n, max_size=n))
    f, h = GriddedFunction(g, a), GriddedFunction(g, b)
    assert lp_norm(f + h, p) <= lp_norm(f, p) + lp_norm(h, p) + 1e-12


def test_convolve_delta_shifts():
    sp = 0.05
    g = UniformGrid.lattice(-2.0, 2.0, sp)
    f = on_grid(g, stats.norm.pdf)
    dg = UniformGrid.lattice(0.5, 0.6, sp)
    delta = GriddedFunction(dg, np.array([1.0 / sp, 0.0, 0.0]))
    out = convolve(f, delta)
    x = out.grid.axes()[0]
    inside = (x >= -1.5 + 0.5) & (x <= 1.5 + 0.5)
    assert np.max(np.abs(out.values[inside] - stats.norm.pdf(x[inside] - 0.5))) < 1e-12


def test_convolve_boxes_gives_triangle():
    sp = 2.0 ** -8
    g = UniformGrid.lattice(0.0, 1.0 - sp, sp)
    box = GriddedFunction(g, np.ones(g.shape))
    tri = convolve(box, box)
    x = tri.grid.axes()[0]
    peak = np.argmin(np.abs(x - (1.0 - sp)))
    assert tri.values.max() == pytest.approx(1.0, abs=1e-12)
    assert tri.values[peak] == pytest.approx(1.0, abs=1e-12)
    assert tri.grid.lower[0] == 0.0


@given(st.data(), st.integers(2, 64), st.integers(2, 64))
def test_convolve_commutes_and_matches_direct_sum(data, n1, n2):
    sp = 0.125
    a = np.array(data.draw(st.lists(st.floats(-3, 3), min_size=n1, max_size=n1)))
    b = np.array(data.draw(st.lists(st.floats(-3, 3), min_size=n2, max_size=n2)))
    f = GriddedFunction(UniformGrid((0.0,), ((n1 - 1) * sp,), (n1,)), a)
    g = GriddedFunction(UniformGrid((-1.0,), (-1.0 + (n2 - 1) * sp,), (n2,)), b)
    fg, gf = convolve(f, g), convolve(g, f)
    assert np.max(np.abs(fg.values - gf.values)) <= 1e-12 * max(1.0, np.abs(fg.values).max())
    direct = np.convolve(a, b) * sp
    assert np.max(np.abs(fg.values - direct)) <= 1e-10


def test_convolve_2d_matches_direct():
    rng = np.random.default_rng(0)
    a, b = rng.normal(size=(7, 5)), rng.normal(size=(4, 6))
    sp = (0.5, 0.25)
    f = GriddedFunction(UniformGrid((0.0, 0.0), (3.0, 1.0), (7, 5)), a)
    g = GriddedFunction(UniformGrid((0.0, 0.0), (1.5, 1.25), (4, 6)), b)
    out = convolve(f, g)
    direct = np.zeros((10, 10))
    for i in range(7):
        for j in range(5):
            direct[i:i + 4, j:j + 6] += a[i, j] * b
    assert np.allclose(out.values, direct * sp[0] * sp[1], atol=1e-12)


def test_convolve_rejects_mismatched_spacing():
    f = GriddedFunction(UniformGrid((0.0,), (1.0,), (11,)), np.ones(11))
    g = GriddedFunction(UniformGrid((0.0,), (1.0,), (21,)), np.ones(21))
    with pytest.raises(IncompatibleGridError):
        convolve(f, g)


@given(st.integers(1, 4), st.sampled_from([0.5, 1.0, 2.0]))
def test_young_inequality(k, p):
    sp = 2.0 ** -6
    g = UniformGrid.lattice(-6.0, 6.0, sp)
    dens = on_grid(g, lambda x: stats.norm.pdf(x, scale=0.5 * k))
    other = on_grid(g, lambda x: np.sin(3 * x) * np.exp(-x * x))
    lhs = lp_norm(convolve(dens, other), 2.0)
    assert lhs <= lp_norm(dens, 1.0) * lp_norm(other, 2.0) + grid_tolerance(g)


def test_finite_difference_affine_and_constant():
    g = UniformGrid.lattice(-2.0, 2.0, 0.25)
    aff = on_grid(g, lambda x: 3.0 * x - 1.0)
    assert np.max(np.abs(finite_difference(aff, 0.5, 0, 2).values)) < 1e-12
    const = on_grid(g, lambda x: np.full_like(x, 7.0))
    assert np.all(finite_difference(const, -0.25, 0, 1).values == 0.0)


def test_finite_difference_square():
    g = UniformGrid.lattice(-3.0, 3.0, 0.5)
    sq = on_grid(g, lambda x: x * x)
    d = finite_difference(sq, 1.0, 0, 1)
    x = d.grid.axes()[0]
    assert np.allclose(d.values, 2 * x + 1, atol=1e-12)
    assert d.grid.points[0] == g.points[0] - 2


@given(st.integers(1, 4), st.integers(-3, 3).filter(lambda s: s != 0), st.integers(0, 1))
def test_finite_difference_is_composition(k, s, j):
    rng = np.random.default_rng(k * 10 + s)
    g = UniformGrid((0.0, 0.0), (3.0, 2.0), (31, 21))
    G = GriddedFunction(g, rng.normal(size=g.shape))
    u = s * g.spacing[j]
    composed = G
    for _ in range(k):
        composed = finite_difference(composed, u, j, 1)
    direct = finite_difference(G, u, j, k)
    assert direct.grid == composed.grid
    assert np.array_equal(direct.values, composed.values)


def test_finite_difference_rejects_incommensurate_step():
    g = UniformGrid.lattice(0.0, 1.0, 0.1)
    with pytest.raises(InvalidStepError):
        finite_difference(on_grid(g, np.sin), 0.15, 0, 1)


def test_central_gradient_of_quadratic():
    g = UniformGrid.lattice(-1.0, 1.0, 0.1)
    d = central_gradient(on_grid(g, lambda x: x * x))
    assert np.allclose(d.values, 2 * d.grid.axes()[0], atol=1e-12)


def test_gridded_csv_roundtrip(tmp_path):
    rng = np.random.default_rng(3)
    g = UniformGrid((-1.0, 0.5), (1.0, 2.0), (5, 4))
    f = GriddedFunction(g, rng.normal(size=g.shape))
    path = tmp_path / "f.csv"
    write_gridded_csv(path, f, ["# note: x"])
    text = path.read_text().splitlines()
    assert "# note: x" in text
    assert any(line.startswith("# grid: 2,") for line in text)
    back = read_gridded_csv(path)
    assert back.grid == g
    assert np.array_equal(back.values, f.values)


def test_sample_csv_roundtrip(tmp_path):
    s = Sample(np.random.default_rng(4).normal(size=(9, 2)))
    path = tmp_path / "s.csv"
    write_sample_csv(path, s, ["# hello"])
    assert np.array_equal(read_sample_csv(path).points, s.points)


def test_format_float_roundtrips():
    for x in (0.1, 1 / 3, 2.0 ** -40, -123456.789):
        assert float(format_float(x)) == x
