import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.polynomial.legendre import leggauss
from scipy import integrate, stats

from pairsel.errors import InvalidParameterError, UnsupportedOperationError
from pairsel.kernels import (BandLimitedKernel1D, BandwidthVec, ProductKernel, build_order_s, canonical_pair,
                             eval_scaled, eval_scaled_derivative, kernel_function, pair_kernel)
from pairsel.numerics import UniformGrid, lp_norm

BASES = ["gaussian", "bump"]


def binomial_moment(s, k):
    return sum(Fraction(math.comb(s, i) * (-1) ** (i + 1) * i ** k) for i in range(1, s + 1))


def kernel_moment(kern, k):
    r = kern.radius
    val, _ = integrate.quad(lambda y: y ** k * kern(y), -r, r, limit=400, epsabs=1e-12, epsrel=1e-12,
                            points=[-r / 2, 0.0, r / 2])
    return val


@pytest.mark.parametrize("s", [1, 2, 3, 4, 5, 6])
def test_binomial_identity_exact(s):
    assert binomial_moment(s, 0) == 1
    for k in range(1, s):
        assert binomial_moment(s, k) == 0


@pytest.mark.parametrize("base", BASES)
@pytest.mark.parametrize("s", [1, 2, 3, 4])
def test_order_s_moments(base, s):
    kern = build_order_s(base, s)
    assert abs(kernel_moment(kern, 0) - 1.0) <= 1e-8
    for k in range(1, s):
        assert abs(kernel_moment(kern, k)) <= 1e-6


def test_order_s_small_cases():
    y = np.linspace(-3, 3, 61)
    k1 = build_order_s("gaussian", 1)
    assert np.array_equal(k1(y), k1.base.eval(y))
    k2 = build_order_s("bump", 2)
    w = k2.base.eval
    assert np.allclose(k2(y), 2 * w(y) - 0.5 * w(y / 2), atol=1e-15)


def test_invalid_order():
    with pytest.raises(InvalidParameterError):
        build_order_s("gaussian", 0)
    with pytest.raises(InvalidParameterError):
        build_order_s("cauchy", 2)


@given(st.sampled_from(BASES), st.integers(1, 5), st.floats(-20, 20, allow_nan=False))
def test_order_s_even(base, s, y):
    kern = build_order_s(base, s)
    assert kern(np.array([-y]))[0] == kern(np.array([y]))[0]


@pytest.mark.parametrize("base", BASES)
@pytest.mark.parametrize("s", [1, 2, 3])
def test_l1_norm_at_least_one(base, s):
    n1 = build_order_s(base, s).norm(1)
    assert n1 >= 1.0 - 1e-12
    if s == 1:
        assert n1 == pytest.approx(1.0, abs=1e-10)


def test_gaussian_l2_norm():
    assert build_order_s("gaussian", 1).norm(2) == pytest.approx((2 * math.sqrt(math.pi)) ** -0.5, abs=1e-10)


@pytest.mark.parametrize("s", [2, 3])
def test_norm_against_quadrature(s):
    kern = build_order_s("gaussian", s)
    for p in (1.0, 2.0, 4.0):
        ref = integrate.quad(lambda y: abs(kern(y)) ** p, -kern.radius, kern.radius, limit=500)[0] ** (1 / p)
        assert kern.norm(p) == pytest.approx(ref, rel=1e-7)


@pytest.mark.parametrize("base", BASES)
@pytest.mark.parametrize("k", [1, 2, 3])
def test_base_derivatives_match_finite_differences(base, k):
    kern = build_order_s(base, 2)
    y = np.linspace(-1.7, 1.7, 57)
    step = 1e-4
    fd = (kern.derivative(y + step, k - 1) - kern.derivative(y - step, k - 1)) / (2 * step)
    scale = np.abs(kern.derivative(y, k)).max()
    assert np.max(np.abs(fd - kern.derivative(y, k))) <= 1e-5 * scale


@pytest.mark.parametrize("base", BASES)
def test_fourier_transform_matches_quadrature(base):
    kern = build_order_s(base, 2)
    r = kern.radius
    for t in (0.0, 0.7, 2.5, 6.0):
        ref = integrate.quad(lambda y: kern(y) * math.cos(t * y), -r, r, limit=400, points=[0.0])[0]
        assert kern.fourier(np.array([t]))[0] == pytest.approx(ref, abs=1e-9)


# -- band-limited ------------------------------------------------------------------


def test_band_limited_closed_form_matches_inverse_transform():
    bl = BandLimitedKernel1D()
    for x in (0.0, 0.3, 1.0, 2.5, math.pi, 7.0, 30.0):
        ref = integrate.quad(lambda t: bl.fourier(t) * math.cos(t * x), 0, 2, limit=200, points=[1.0])[0] / math.pi
        assert bl(np.array([x]))[0] == pytest.approx(ref, abs=1e-10)


def test_band_limited_fourier_flat_and_vanishing():
    bl = BandLimitedKernel1D()
    t = np.linspace(-1, 1, 2001)
    assert np.max(np.abs(bl.fourier(t) - 1.0)) <= 1e-8
    t = np.concatenate([np.linspace(2, 50, 2001), -np.linspace(2, 50, 2001)])
    assert np.max(np.abs(bl.fourier(t))) <= 1e-8
    mid = bl.fourier(np.linspace(1, 2, 1001))
    assert np.all(np.diff(mid) <= 0)


def test_band_limited_even_and_unit_mass():
    bl = BandLimitedKernel1D()
    x = np.linspace(0, 50, 1001)
    assert np.array_equal(bl(x), bl(-x))
    nodes, weights = leggauss(40)
    total = 0.0
    edges = np.arange(0, 4001) * math.pi
    for a, b in zip(edges[:-1], edges[1:]):
        xs = 0.5 * (b - a) * nodes + 0.5 * (a + b)
        total += 0.5 * (b - a) * float(weights @ bl(xs))
    assert 2 * total == pytest.approx(1.0, abs=1e-8)


def test_band_limited_norms():
    bl = BandLimitedKernel1D()
    assert bl.norm(2) == pytest.approx(math.sqrt(11 / (8 * math.pi)), rel=1e-14)
    # Parseval cross-check of the L2 norm
    ref = integrate.quad(lambda t: bl.fourier(t) ** 2, 0, 2, points=[1.0])[0] / math.pi
    assert bl.norm(2) ** 2 == pytest.approx(ref, rel=1e-10)
    assert bl.norm(1) >= 1.0
    assert bl.norm_tolerance[1.0] < 1e-6


def test_band_limited_has_no_derivatives():
    K = ProductKernel.band_limited(1)
    with pytest.raises(UnsupportedOperationError):
        eval_scaled_derivative(K, 0.5, (1,), np.array([0.1]))


def test_mixed_families_rejected():
    with pytest.raises(InvalidParameterError):
        ProductKernel([build_order_s("gaussian", 2), BandLimitedKernel1D()])


# -- scaling -----------------------------------------------------------------------


def test_bandwidth_validation():
    assert BandwidthVec((0.5, 0.25)).v_h == 0.125
    for bad in ((0.0,), (1.5,), (-0.1, 0.5)):
        with pytest.raises(InvalidParameterError):
            BandwidthVec(bad)


def test_eval_scaled_identity_and_mass():
    K = ProductKernel.order_s(2, 2)
    pts = np.random.default_rng(1).normal(size=(20, 2))
    assert np.array_equal(eval_scaled(K, (1.0, 1.0), pts), K(pts))
    K1 = ProductKernel.order_s(1, 2, "bump")
    g = UniformGrid.lattice(-1.0, 1.0, 2.0 ** -10)
    vals = eval_scaled(K1, 0.25, g.axes()[0])
    assert vals.sum() * g.cell_volume == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("base", BASES)
def test_scaled_norm_identity(base):
    K = ProductKernel.order_s(2, 2, base)
    h = BandwidthVec((0.5, 0.5))
    g = UniformGrid.lattice((-9.0, -9.0) if base == "gaussian" else (-2.0, -2.0),
                            (9.0, 9.0) if base == "gaussian" else (2.0, 2.0), 2.0 ** -6)
    from pairsel.numerics import GriddedFunction
    f = GriddedFunction(g, eval_scaled(K, h, g.mesh()))
    assert lp_norm(f, 2) == pytest.approx(h.v_h ** (0.5 - 1) * K.norm(2), rel=1e-6)


def test_gaussian_first_derivative_closed_form():
    K = ProductKernel.order_s(1, 1, "gaussian")
    t = np.linspace(-1, 1, 41)
    h = 0.3
    ref = -(t / h) * h ** -2 * stats.norm.pdf(t / h)
    assert np.allclose(eval_scaled_derivative(K, h, (1,), t), ref, rtol=1e-13, atol=1e-15)
    assert np.array_equal(eval_scaled_derivative(K, h, (0,), t), eval_scaled(K, h, t))


@pytest.mark.parametrize("base", BASES)
@pytest.mark.parametrize("m", [(1, 0), (0, 2), (1, 1), (2, 1)])
def test_scaled_derivative_matches_finite_differences(base, m):
    K = ProductKernel.order_s(2, 3, base)
    h = (0.5, 0.25)
    rng = np.random.default_rng(hash((base, m)) % 2 ** 32)
    # the bump base steepens sharply near its edge, so stay in the inner part of the support
    pts = rng.uniform(-0.75, 0.75, size=(100, 2)) * np.array(h)
    step = 1e-4
    # one central difference on top of the analytic derivative of order m - e_j
    j = 0 if m[0] else 1
    lower = list(m)
    lower[j] -= 1
    e = np.zeros(2)
    e[j] = step
    fd = (eval_scaled_derivative(K, h, lower, pts + e) - eval_scaled_derivative(K, h, lower, pts - e)) / (2 * step)
    exact = eval_scaled_derivative(K, h, m, pts)
    assert np.max(np.abs(fd - exact)) <= 1e-5 * np.abs(exact).max()


# -- pair kernels ------------------------------------------------------------------


def test_pair_kernel_symmetric_and_unit_mass():
    K = ProductKernel.order_s(1, 2)
    g = UniformGrid.lattice(-4.0, 4.0, 2.0 ** -8)
    a = pair_kernel(K, 0.25, 0.0625, g)
    b = pair_kernel(K, 0.0625, 0.25, g)
    assert np.array_equal(a.values, b.values)
    assert a.integral() == pytest.approx(1.0, abs=1e-6)


def test_pair_kernel_gaussian_closed_form():
    K = ProductKernel.order_s(1, 1)
    g = UniformGrid.lattice(-3.0, 3.0, 2.0 ** -9)
    h, eta = 0.25, 0.125
    x = g.axes()[0]
    ref = stats.norm.pdf(x, scale=math.hypot(h, eta))
    assert np.max(np.abs(pair_kernel(K, h, eta, g).values - ref)) < 1e-10


@given(st.integers(2, 5), st.integers(2, 5), st.sampled_from([1.0, 2.0, 3.0]), st.sampled_from(BASES))
def test_pair_kernel_young_bound(ka, kb, p, base):
    K = ProductKernel.order_s(1, 2, base)
    h, eta = 2.0 ** -ka, 2.0 ** -kb
    g = UniformGrid.lattice(-3.0, 3.0, 2.0 ** -9)
    lhs = lp_norm(pair_kernel(K, h, eta, g), p)
    kh = lp_norm(kernel_function(K, h, g.spacing), p)
    ke = lp_norm(kernel_function(K, eta, g.spacing), p)
    assert lhs <= K.norm(1) * min(kh, ke) + 1e-6 * max(kh, ke)


def test_canonical_pair_orders_by_volume():
    a, b = BandwidthVec((0.5,)), BandwidthVec((0.25,))
    assert canonical_pair(a, b) == canonical_pair(b, a) == (a, b)
