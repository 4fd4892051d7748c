import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, stats

from pairsel.errors import IllPosedModelError, InvalidParameterError
from pairsel.models import (DatasetPair, GaussianMixture, GriddedDensity, NoiseSpec, ProductLaplace, VarianceGamma,
                            check_well_posedness, contamination_indicators, density_eval, derivative_eval,
                            observed_density, require_well_posed, sample_contaminated, substream, truncation_mass)
from pairsel.numerics import GriddedFunction, UniformGrid, lp_norm

BOX = UniformGrid.lattice(-8.0, 8.0, 2.0 ** -7)


def test_substream_test_vectors():
    # frozen first draws of the per-family streams; any change breaks reproducibility
    draws = [substream(2024, r, fam).random() for r in (0, 1) for fam in (0, 1, 2)]
    ref = [np.random.Generator(np.random.PCG64(np.random.SeedSequence(2024, spawn_key=(r, fam)))).random()
           for r in (0, 1) for fam in (0, 1, 2)]
    assert draws == ref
    assert len(set(draws)) == 6


def test_density_values():
    std = GaussianMixture.standard()
    assert float(std.pdf(0.0)) == pytest.approx(0.398942, abs=1e-6)
    mix = GaussianMixture((0.5, 0.5), ((-1.0,), (1.0,)), ((1.0,), (1.0,)))
    assert float(mix.pdf(0.0)) == pytest.approx(stats.norm.pdf(1.0), abs=1e-15)
    assert density_eval(std, BOX).integral() == pytest.approx(1.0, abs=1e-6)
    assert abs(truncation_mass(std, BOX)) < 1e-6


def test_mixture_validation():
    with pytest.raises(InvalidParameterError):
        GaussianMixture((0.5, 0.6), ((0.0,), (1.0,)), ((1.0,), (1.0,)))
    with pytest.raises(InvalidParameterError):
        GaussianMixture((1.0,), ((0.0,),), ((-1.0,),))


def test_mixture_derivatives_symbolic():
    x = sp.symbols("x")
    expr = sum(w * sp.exp(-(x - mu) ** 2 / (2 * s ** 2)) / (s * sp.sqrt(2 * sp.pi))
               for w, mu, s in ((sp.Rational(3, 10), -1, sp.Rational(1, 2)), (sp.Rational(7, 10), 1, 2)))
    f = GaussianMixture((0.3, 0.7), ((-1.0,), (1.0,)), ((0.5,), (2.0,)))
    pts = np.linspace(-3, 3, 13)
    for k in (1, 2, 3):
        ref = sp.lambdify(x, sp.diff(expr, x, k), "numpy")(pts)
        assert np.allclose(f.derivative(pts[:, None], (k,)), ref, rtol=1e-12, atol=1e-14)


def test_2d_mixture_mass_and_mixed_derivative():
    f = GaussianMixture((1.0,), ((0.0, 0.0),), ((1.0, 0.5),))
    g = UniformGrid.lattice((-8.0, -4.0), (8.0, 4.0), 2.0 ** -4)
    assert density_eval(f, g).integral() == pytest.approx(1.0, abs=1e-6)
    p = np.array([[0.3, -0.2]])
    ref = (-0.3 * stats.norm.pdf(0.3)) * (0.2 / 0.25 * stats.norm.pdf(-0.2, scale=0.5) / 1.0)
    assert f.derivative(p, (1, 1))[0] == pytest.approx(ref, rel=1e-12)


@pytest.mark.parametrize("f", [
    GaussianMixture((0.5, 0.5), ((-1.0,), (1.0,)), ((1.0,), (1.0,))),
    ProductLaplace((0.0,), (0.7,)),
    VarianceGamma(1.25, 0.8),
])
def test_histogram_total_variation(f):
    x = f.sample(100_000, np.random.default_rng(5))[:, 0]
    edges = np.linspace(-6, 6, 65)
    counts, _ = np.histogram(x, edges)
    probs = [integrate.quad(lambda t: float(f.pdf(t)), a, b)[0] for a, b in zip(edges[:-1], edges[1:])]
    assert 0.5 * np.abs(counts / len(x) - np.array(probs)).sum() < 0.02


def test_variance_gamma_char_fn_and_mass():
    f = VarianceGamma(1.25, 0.5)
    assert density_eval(f, UniformGrid.lattice(-20.0, 20.0, 2.0 ** -8)).integral() == pytest.approx(1.0, abs=1e-5)
    for t in (0.5, 2.0, 7.0):
        ref = integrate.quad(lambda y: float(f.pdf(y)) * math.cos(t * y), -40, 40, limit=400, points=[0])[0]
        assert complex(f.char_fn(t)).real == pytest.approx(ref, abs=1e-6)


def test_gridded_density_renormalises_and_samples():
    g = UniformGrid.lattice(-2.0, 2.0, 2.0 ** -6)
    raw = GriddedFunction(g, 3.0 * np.exp(-np.abs(g.axes()[0])))
    f = GriddedDensity(raw)
    assert density_eval(f, g).integral() == pytest.approx(1.0, abs=1e-2)
    x = f.sample(50_000, np.random.default_rng(0))[:, 0]
    assert x.min() >= -2.0 - g.spacing[0] and x.max() <= 2.0 + g.spacing[0]
    assert abs(np.mean(np.abs(x)) - 0.6869) < 0.02


@pytest.mark.parametrize("noise", [
    NoiseSpec("gaussian", {"sigma": 0.7}),
    NoiseSpec("laplace", {"b": 1.3}),
    NoiseSpec("gamma", {"k": 2.0, "theta": 1.5}),
    NoiseSpec("gamma", {"k": 2.0, "theta": 1.5, "centered": False}),
])
def test_noise_empirical_characteristic_function(noise):
    n = 100_000
    y = noise.sample(n, np.random.default_rng(11))[:, 0]
    t = np.linspace(-4, 4, 20)
    ecf = np.exp(1j * np.outer(t, y)).mean(axis=1)
    assert np.max(np.abs(ecf - noise.char_fn(t))) <= 3 / math.sqrt(n)
    assert complex(noise.char_fn(0.0)) == 1.0
    assert np.all(np.abs(noise.char_fn(np.linspace(-50, 50, 1001))) <= 1.0 + 1e-15)


def test_noise_pdf_matches_char_fn():
    noise = NoiseSpec("gamma", {"k": 3.0, "theta": 2.0})
    for t in (0.3, 1.1):
        re = integrate.quad(lambda y: float(noise.pdf(y)) * math.cos(t * y), -5, 30, limit=300)[0]
        im = integrate.quad(lambda y: float(noise.pdf(y)) * math.sin(t * y), -5, 30, limit=300)[0]
        assert complex(re, im) == pytest.approx(complex(noise.char_fn(t)), abs=1e-8)


def test_noise_rejects_unknown():
    with pytest.raises(InvalidParameterError):
        NoiseSpec("cauchy")
    with pytest.raises(InvalidParameterError):
        NoiseSpec("gaussian", {"b": 1.0})


def test_sample_contaminated_halves_and_determinism():
    f = GaussianMixture.standard()
    noise = NoiseSpec("laplace", {"b": 1.0})
    a = sample_contaminated(f, noise, 0.3, 101, seed=9, replication=4)
    b = sample_contaminated(f, noise, 0.3, 101, seed=9, replication=4)
    assert len(a.first_half) == 50 and len(a.second_half) == 51
    assert np.array_equal(a.points, b.points)
    c = sample_contaminated(f, noise, 0.3, 101, seed=9, replication=5)
    assert not np.array_equal(a.points, c.points)


def test_contamination_extremes():
    f = GaussianMixture.standard()
    noise = NoiseSpec("gaussian", {"sigma": 2.0})
    x = f.sample(64, substream(3, 0, 0))
    y = noise.sample(64, substream(3, 0, 1))
    assert np.array_equal(sample_contaminated(f, noise, 0.0, 64, 3).points, x)
    assert np.array_equal(sample_contaminated(f, None, 0.0, 64, 3).points, x)
    assert np.array_equal(sample_contaminated(f, noise, 1.0, 64, 3).points, x + y)


def test_contamination_rate():
    eps = contamination_indicators(100_000, 0.3, seed=17)
    assert abs(eps.mean() - 0.3) <= 0.01
    f = GaussianMixture.standard()
    noise = NoiseSpec("gaussian", {"sigma": 1.0})
    d = sample_contaminated(f, noise, 0.3, 1000, 17)
    x = f.sample(1000, substream(17, 0, 0))
    moved = np.any(d.points != x, axis=1)
    assert np.array_equal(moved, contamination_indicators(1000, 0.3, 17))


def test_dataset_pair_from_points():
    d = DatasetPair.from_points(np.arange(7.0))
    assert len(d.first_half) == 3 and len(d.second_half) == 4
    with pytest.raises(InvalidParameterError):
        DatasetPair.from_points([1.0])


@given(st.sampled_from(["gaussian", "laplace", "gamma"]), st.floats(0.0, 0.49))
def test_well_posedness_partial_contamination(family, alpha):
    rep = check_well_posedness(NoiseSpec(family), alpha)
    assert rep.satisfied
    assert rep.varpi >= 1 - 2 * alpha - 1e-12


def test_well_posedness_positive_char_fn():
    rep = check_well_posedness(NoiseSpec("gaussian", {"sigma": 1.0}), 0.9)
    assert rep.varpi == pytest.approx(0.1, abs=1e-12)


def test_well_posedness_laplace_full_contamination():
    t = sp.symbols("t", real=True)
    mu = sp.symbols("mu")
    # |g_hat| = (1 + t^2)^(-1) equals (1 + t^2)^(-mu/2) exactly when mu = 2
    assert sp.solve(sp.Eq(sp.log(1 / (1 + t ** 2)), -mu / 2 * sp.log(1 + t ** 2)), mu) == [2]
    rep = check_well_posedness(NoiseSpec("laplace", {"b": 1.0}), 1.0)
    assert rep.satisfied
    assert rep.mu == (2.0,)
    assert rep.g1 == pytest.approx(1.0, abs=1e-12) and rep.g2 == pytest.approx(1.0, abs=1e-12)


def test_well_posedness_laplace_scale_invariant_exponent():
    for b in (0.05, 0.3, 4.0):
        rep = check_well_posedness(NoiseSpec("laplace", {"b": b}), 1.0)
        assert rep.mu == pytest.approx((2.0,), abs=1e-9)


def test_well_posedness_gaussian_full_contamination_fails():
    rep = check_well_posedness(NoiseSpec("gaussian", {"sigma": 1.0}), 1.0)
    assert not rep.satisfied
    with pytest.raises(IllPosedModelError):
        require_well_posed(NoiseSpec("gaussian", {"sigma": 1.0}), 1.0)


def test_observed_density_cases():
    f = GaussianMixture.standard()
    g = NoiseSpec("gaussian", {"sigma": 1.0})
    grid = UniformGrid.lattice(-8.0, 8.0, 2.0 ** -6)
    assert np.array_equal(observed_density(f, g, 0.0, grid).values, density_eval(f, grid).values)
    full = observed_density(f, g, 1.0, grid)
    assert np.max(np.abs(full.values - stats.norm.pdf(grid.axes()[0], scale=math.sqrt(2)))) <= 1e-6
    # the Laplace kink costs about spacing^2 / 12 of mass under the rectangle rule
    wide = UniformGrid.lattice(-30.0, 30.0, 2.0 ** -9)
    for alpha in (0.3, 0.7, 1.0):
        assert observed_density(f, NoiseSpec("laplace"), alpha, wide).integral() == pytest.approx(1.0, abs=1e-6)


def test_derivative_eval_matches_gradient():
    f = GaussianMixture.standard()
    g = UniformGrid.lattice(-6.0, 6.0, 2.0 ** -8)
    d1 = derivative_eval(f, (1,), g)
    assert lp_norm(d1, 2) == pytest.approx((1 / (4 * math.sqrt(math.pi))) ** 0.5, rel=1e-9)
