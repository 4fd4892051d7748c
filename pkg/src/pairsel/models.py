"""Ground-truth densities, noise laws and the contaminated observation scheme.

Observations are ``Z_i = X_i + eps_i * Y_i`` with ``X_i ~ f``, ``Y_i ~ g`` and
``eps_i ~ Bernoulli(alpha)``, all independent. Each variable family draws from its
own random stream derived from a master seed, so ``alpha = 0`` reproduces ``X``
exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.polynomial import hermite_e
from scipy import optimize, special, stats

from .errors import IllPosedModelError, InvalidParameterError
from .numerics import GriddedFunction, Sample, UniformGrid, convolve

FAMILY_X, FAMILY_Y, FAMILY_EPS = 0, 1, 2


def substream(seed: int, replication: int, family: int) -> np.random.Generator:
    """Independent generator for one variable family of one replication."""
    if not 0 <= int(seed) < 2 ** 64:
        raise InvalidParameterError("seed must be an unsigned 64-bit integer")
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(replication), int(family)))
    return np.random.Generator(np.random.PCG64(ss))


def _points(x, d: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if d == 1 and (x.ndim == 0 or x.shape[-1] != 1):
        x = x[..., None]
    if x.shape[-1] != d:
        raise InvalidParameterError(f"points must have trailing dimension {d}")
    return x


# -- densities ---------------------------------------------------------------------


class DensitySpec:
    """Interface shared by the truth densities."""

    dim: int

    def pdf(self, x) -> np.ndarray:
        raise NotImplementedError

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def derivative(self, x, m: Sequence[int]) -> np.ndarray:
        from .errors import UnsupportedOperationError

        if not any(m):
            return self.pdf(x)
        raise UnsupportedOperationError(f"{type(self).__name__} has no closed-form derivatives")

    def char_fn(self, t) -> np.ndarray:
        from .errors import UnsupportedOperationError

        raise UnsupportedOperationError(f"{type(self).__name__} has no closed-form characteristic function")

    def scaled(self, lam: float) -> "DensitySpec":
        """The density ``lam^d f(lam x)``."""
        from .errors import UnsupportedOperationError

        raise UnsupportedOperationError(f"{type(self).__name__} cannot be rescaled")


@dataclass(frozen=True)
class GaussianMixture(DensitySpec):
    """Mixture of axis-aligned Gaussians; ``means`` and ``scales`` have shape (k, d)."""

    weights: tuple
    means: tuple
    scales: tuple

    def __post_init__(self):
        w = np.atleast_1d(np.asarray(self.weights, dtype=float))
        mu = np.asarray(self.means, dtype=float).reshape(len(w), -1)
        sd = np.broadcast_to(np.asarray(self.scales, dtype=float).reshape(len(w), -1), mu.shape)
        if np.any(w < 0) or not math.isclose(w.sum(), 1.0, abs_tol=1e-12):
            raise InvalidParameterError("mixture weights must be nonnegative and sum to 1")
        if np.any(sd <= 0):
            raise InvalidParameterError("component scales must be positive")
        object.__setattr__(self, "weights", tuple(w))
        object.__setattr__(self, "means", tuple(map(tuple, mu)))
        object.__setattr__(self, "scales", tuple(map(tuple, sd)))

    @classmethod
    def standard(cls, d: int = 1) -> "GaussianMixture":
        return cls((1.0,), ((0.0,) * d,), ((1.0,) * d,))

    @property
    def dim(self) -> int:
        return len(self.means[0])

    def pdf(self, x) -> np.ndarray:
        return self.derivative(x, (0,) * self.dim)

    def derivative(self, x, m: Sequence[int]) -> np.ndarray:
        x = _points(x, self.dim)
        m = tuple(int(v) for v in np.atleast_1d(m))
        out = np.zeros(x.shape[:-1])
        for w, mu, sd in zip(self.weights, self.means, self.scales):
            term = np.full(x.shape[:-1], w)
            for j, (a, s, k) in enumerate(zip(mu, sd, m)):
                y = (x[..., j] - a) / s
                herm = hermite_e.hermeval(y, [0] * k + [1])
                term = term * (-1) ** k * herm * np.exp(-0.5 * y * y) / (math.sqrt(2 * math.pi) * s ** (1 + k))
            out += term
        return out

    def char_fn(self, t) -> np.ndarray:
        t = _points(t, self.dim)
        out = np.zeros(t.shape[:-1], dtype=complex)
        for w, mu, sd in zip(self.weights, self.means, self.scales):
            mu, sd = np.asarray(mu), np.asarray(sd)
            out += w * np.exp(1j * t @ mu - 0.5 * (t * t) @ (sd * sd))
        return out

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        comp = rng.choice(len(self.weights), size=n, p=np.asarray(self.weights))
        z = rng.standard_normal((n, self.dim))
        return np.asarray(self.means)[comp] + np.asarray(self.scales)[comp] * z

    def scaled(self, lam: float) -> "GaussianMixture":
        return GaussianMixture(self.weights, tuple(tuple(np.asarray(m) / lam) for m in self.means),
                               tuple(tuple(np.asarray(s) / lam) for s in self.scales))


@dataclass(frozen=True)
class ProductLaplace(DensitySpec):
    """Product of independent Laplace laws with given locations and scales."""

    loc: tuple
    scale: tuple

    def __post_init__(self):
        loc = tuple(float(v) for v in np.atleast_1d(self.loc))
        scale = tuple(float(v) for v in np.broadcast_to(np.atleast_1d(self.scale), (len(loc),)))
        if any(b <= 0 for b in scale):
            raise InvalidParameterError("Laplace scales must be positive")
        object.__setattr__(self, "loc", loc)
        object.__setattr__(self, "scale", scale)

    @property
    def dim(self) -> int:
        return len(self.loc)

    def pdf(self, x) -> np.ndarray:
        x = _points(x, self.dim)
        out = np.ones(x.shape[:-1])
        for j, (a, b) in enumerate(zip(self.loc, self.scale)):
            out = out * np.exp(-np.abs(x[..., j] - a) / b) / (2 * b)
        return out

    def char_fn(self, t) -> np.ndarray:
        t = _points(t, self.dim)
        out = np.ones(t.shape[:-1], dtype=complex)
        for j, (a, b) in enumerate(zip(self.loc, self.scale)):
            out = out * np.exp(1j * a * t[..., j]) / (1 + (b * t[..., j]) ** 2)
        return out

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return np.asarray(self.loc) + rng.laplace(0.0, 1.0, (n, self.dim)) * np.asarray(self.scale)

    def scaled(self, lam: float) -> "ProductLaplace":
        return ProductLaplace(tuple(np.asarray(self.loc) / lam), tuple(np.asarray(self.scale) / lam))


@dataclass(frozen=True)
class VarianceGamma(DensitySpec):
    """Product of symmetric variance-gamma laws: ``scale * (G - G')`` with ``G, G' ~ Gamma(shape)``.

    The characteristic function is ``(1 + scale^2 t^2)^(-shape)`` per axis, so the
    smoothness in the L_2 sense is ``2 * shape - 1/2``.
    """

    shape: float = 1.25
    scale: float = 1.0
    d: int = 1

    def __post_init__(self):
        if self.shape <= 0.5:
            raise InvalidParameterError("shape must exceed 1/2 so that the density is bounded")
        if self.scale <= 0:
            raise InvalidParameterError("scale must be positive")

    @property
    def dim(self) -> int:
        return self.d

    def _pdf1(self, x):
        lam, s = self.shape, self.scale
        a = np.abs(np.asarray(x, dtype=float)) / s
        nu = lam - 0.5
        const = math.sqrt(math.pi) * math.gamma(lam) * 2 ** nu
        at0 = math.gamma(nu) / (2 * math.sqrt(math.pi) * math.gamma(lam))
        safe = np.where(a > 0, a, 1.0)
        vals = np.where(a > 0, safe ** nu * special.kv(nu, safe) / const, at0)
        return vals / s

    def pdf(self, x) -> np.ndarray:
        x = _points(x, self.dim)
        out = np.ones(x.shape[:-1])
        for j in range(self.dim):
            out = out * self._pdf1(x[..., j])
        return out

    def char_fn(self, t) -> np.ndarray:
        t = _points(t, self.dim)
        return np.prod((1 + (self.scale * t) ** 2) ** (-self.shape), axis=-1).astype(complex)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        g = rng.standard_gamma(self.shape, (2, n, self.dim))
        return self.scale * (g[0] - g[1])

    def scaled(self, lam: float) -> "VarianceGamma":
        return VarianceGamma(self.shape, self.scale / lam, self.d)


class GriddedDensity(DensitySpec):
    """User-supplied nonnegative values on a grid, renormalised to unit mass.

    The density is piecewise constant on the cells centred at the grid nodes.
    Sampling uses the inverse CDF of the first coordinate, then of the second
    given the first (d <= 2), plus a uniform draw inside the cell.
    """

    def __init__(self, f: GriddedFunction):
        if f.grid.dim > 2:
            raise InvalidParameterError("gridded densities are supported for d <= 2")
        if np.any(f.values < 0):
            raise InvalidParameterError("gridded density values must be nonnegative")
        mass = f.values.sum() * f.grid.cell_volume
        if mass <= 0:
            raise InvalidParameterError("gridded density has zero mass")
        self.grid = f.grid
        self.values = f.values / mass
        self.dim = f.grid.dim

    def pdf(self, x) -> np.ndarray:
        x = _points(x, self.dim)
        idx = []
        inside = np.ones(x.shape[:-1], dtype=bool)
        for j, (lo, sp, n) in enumerate(zip(self.grid.lower, self.grid.spacing, self.grid.points)):
            k = np.rint((x[..., j] - lo) / sp).astype(np.intp)
            inside &= (k >= 0) & (k < n)
            idx.append(np.clip(k, 0, n - 1))
        return np.where(inside, self.values[tuple(idx)], 0.0)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        sp = np.asarray(self.grid.spacing)
        lo = np.asarray(self.grid.lower)
        p = self.values / self.values.sum()
        marg = p.sum(axis=tuple(range(1, self.dim))) if self.dim > 1 else p
        i0 = _inverse_cdf(marg, rng.random(n))
        cols = [i0]
        if self.dim == 2:
            rows = p[i0]
            cdf = np.cumsum(rows, axis=1)
            u = rng.random(n) * cdf[:, -1]
            cols.append(np.minimum((cdf < u[:, None]).sum(axis=1), p.shape[1] - 1))
        idx = np.stack(cols, axis=1)
        jitter = rng.random((n, self.dim)) - 0.5
        return lo + (idx + jitter) * sp


def _inverse_cdf(weights: np.ndarray, u: np.ndarray) -> np.ndarray:
    cdf = np.cumsum(weights)
    cdf /= cdf[-1]
    return np.minimum(np.searchsorted(cdf, u, side="right"), len(weights) - 1)


# -- noise -------------------------------------------------------------------------


@dataclass(frozen=True)
class NoiseSpec:
    """d-fold product noise law.

    ``family`` is one of ``gaussian`` (``sigma``), ``laplace`` (``b``) or ``gamma``
    (shape ``k``, rate ``theta``; mean-centred unless ``centered=False``).
    """

    family: str
    params: dict = field(default_factory=dict)
    d: int = 1

    def __post_init__(self):
        defaults = {"gaussian": {"sigma": 1.0}, "laplace": {"b": 1.0},
                    "gamma": {"k": 2.0, "theta": 1.0, "centered": True}}
        if self.family not in defaults:
            raise InvalidParameterError(f"unknown noise family {self.family!r}")
        unknown = set(self.params) - set(defaults[self.family])
        if unknown:
            raise InvalidParameterError(f"unknown {self.family} noise parameters {sorted(unknown)}")
        merged = {**defaults[self.family], **self.params}
        for key, v in merged.items():
            if key != "centered" and not v > 0:
                raise InvalidParameterError(f"noise parameter {key} must be positive")
        object.__setattr__(self, "params", merged)

    def __hash__(self):
        return hash((self.family, tuple(sorted(self.params.items())), self.d))

    @property
    def dim(self) -> int:
        return self.d

    def _char1(self, t):
        p = self.params
        if self.family == "gaussian":
            return np.exp(-0.5 * (p["sigma"] * t) ** 2).astype(complex)
        if self.family == "laplace":
            return (1.0 / (1.0 + (p["b"] * t) ** 2)).astype(complex)
        k, theta = p["k"], p["theta"]
        out = (1 - 1j * t / theta) ** (-k)
        return out * np.exp(-1j * t * k / theta) if p["centered"] else out

    def char_fn(self, t) -> np.ndarray:
        """``E exp(i <t, Y>)``."""
        t = _points(t, self.dim)
        out = np.ones(t.shape[:-1], dtype=complex)
        for j in range(self.dim):
            out = out * self._char1(t[..., j])
        return out

    def _pdf1(self, y):
        p = self.params
        if self.family == "gaussian":
            return stats.norm.pdf(y, scale=p["sigma"])
        if self.family == "laplace":
            return stats.laplace.pdf(y, scale=p["b"])
        shift = p["k"] / p["theta"] if p["centered"] else 0.0
        return stats.gamma.pdf(y + shift, p["k"], scale=1.0 / p["theta"])

    def pdf(self, y) -> np.ndarray:
        y = _points(y, self.dim)
        out = np.ones(y.shape[:-1])
        for j in range(self.dim):
            out = out * self._pdf1(y[..., j])
        return out

    def support_radius(self, tail: float = 1e-13) -> float:
        p = self.params
        if self.family == "gaussian":
            return p["sigma"] * stats.norm.isf(tail)
        if self.family == "laplace":
            return p["b"] * math.log(1.0 / tail)
        q = stats.gamma.isf(tail, p["k"], scale=1.0 / p["theta"])
        return q

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        p = self.params
        shape = (n, self.dim)
        if self.family == "gaussian":
            return p["sigma"] * rng.standard_normal(shape)
        if self.family == "laplace":
            return rng.laplace(0.0, p["b"], shape)
        y = rng.standard_gamma(p["k"], shape) / p["theta"]
        return y - p["k"] / p["theta"] if p["centered"] else y


# -- observation scheme ------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DatasetPair:
    """Observations split into the first ``n // 2`` and the remaining points."""

    first_half: Sample
    second_half: Sample
    n: int
    seed: int | None = None
    replication: int = 0

    def __post_init__(self):
        if len(self.first_half) != self.n // 2 or len(self.second_half) != self.n - self.n // 2:
            raise InvalidParameterError("halves must have sizes n // 2 and n - n // 2")

    @classmethod
    def from_points(cls, points, seed=None, replication=0) -> "DatasetPair":
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        n = len(pts)
        if n < 2:
            raise InvalidParameterError("a split dataset needs at least 2 observations")
        return cls(Sample(pts[: n // 2]), Sample(pts[n // 2:]), n, seed, replication)

    @property
    def points(self) -> np.ndarray:
        return np.vstack([self.first_half.points, self.second_half.points])


def sample_contaminated(f: DensitySpec, g: NoiseSpec | None, alpha: float, n: int, seed: int,
                        replication: int = 0) -> DatasetPair:
    """Draw ``Z_i = X_i + eps_i Y_i`` and split into halves; deterministic in ``seed``."""
    if n < 4:
        raise InvalidParameterError("need n >= 4 observations")
    if not 0.0 <= alpha <= 1.0:
        raise InvalidParameterError("contamination level must lie in [0, 1]")
    x = f.sample(n, substream(seed, replication, FAMILY_X))
    if alpha > 0:
        if g is None:
            raise InvalidParameterError("a noise law is required when alpha > 0")
        if g.dim != f.dim:
            raise InvalidParameterError("noise and density dimensions differ")
        y = g.sample(n, substream(seed, replication, FAMILY_Y))
        if alpha == 1.0:
            z = x + y
        else:
            eps = substream(seed, replication, FAMILY_EPS).random(n) < alpha
            z = np.where(eps[:, None], x + y, x)
    else:
        z = x
    return DatasetPair(Sample(z[: n // 2]), Sample(z[n // 2:]), n, seed, replication)


def contamination_indicators(n: int, alpha: float, seed: int, replication: int = 0) -> np.ndarray:
    """The Bernoulli indicators used by :func:`sample_contaminated` (for diagnostics)."""
    if alpha in (0.0, 1.0):
        return np.full(n, alpha == 1.0)
    return substream(seed, replication, FAMILY_EPS).random(n) < alpha


# -- well-posedness ----------------------------------------------------------------


@dataclass
class WellPosednessReport:
    satisfied: bool
    varpi: float | None = None
    mu: tuple | None = None
    g1: float | None = None
    g2: float | None = None
    message: str = ""


def check_well_posedness(g: NoiseSpec, alpha: float, t_max: float = 200.0, points: int = 20001) -> WellPosednessReport:
    """Check that ``1 - alpha + alpha * g_hat`` stays away from zero, or decays polynomially.

    For ``alpha < 1`` the infimum of ``|1 - alpha + alpha g_hat(t)|`` over a frequency
    grid is reported. For ``alpha = 1`` each axis is fitted against
    ``(1 + t^2)^(-mu/2)`` and the ratio bounds are reported; super-polynomial decay
    fails the check.
    """
    if not 0.0 <= alpha <= 1.0:
        raise InvalidParameterError("alpha must lie in [0, 1]")
    t1 = np.linspace(-t_max, t_max, points)
    if alpha < 1.0:
        if g.dim == 1:
            vals = g.char_fn(t1)
        else:
            # product law: the infimum over the grid is attained on a coarser mesh check
            coarse = np.linspace(-t_max, t_max, 201)
            mesh = np.stack(np.meshgrid(*[coarse] * g.dim, indexing="ij"), axis=-1)
            vals = g.char_fn(mesh)
        varpi = float(np.min(np.abs(1 - alpha + alpha * vals)))
        ok = varpi > 1e-12
        return WellPosednessReport(ok, varpi=varpi, message="" if ok else "1 - alpha + alpha g_hat vanishes")
    probe = np.logspace(-4, 8, 1201)
    mus = []
    lo, hi = np.inf, 0.0
    for j in range(g.dim):
        pts = np.zeros((probe.size, g.dim))
        pts[:, j] = probe
        below = np.nonzero(np.abs(g.char_fn(pts)) <= 0.5)[0]
        t0 = 1.0
        if below.size and below[0] > 0:
            # frequency scale where |g_hat| halves; the fit starts a decade past it
            t0 = optimize.brentq(lambda t: abs(g.char_fn(t * np.eye(g.dim)[j])[()]) - 0.5,
                                 probe[below[0] - 1], probe[below[0]], xtol=1e-14, rtol=1e-14)
        tt = t0 * np.logspace(1, 4, 400)
        pts = np.zeros((tt.size, g.dim))
        pts[:, j] = tt
        mag = np.abs(g.char_fn(pts))
        if np.any(mag <= 1e-300):
            return WellPosednessReport(False, message=f"characteristic function underflows along axis {j}")
        xlog = 0.5 * np.log1p((tt / t0) ** 2)
        slope, icpt = np.polyfit(xlog, np.log(mag), 1)
        resid = np.log(mag) - (slope * xlog + icpt)
        if np.max(np.abs(resid)) > 0.5 * max(1.0, abs(slope) * xlog.max() * 0.1):
            return WellPosednessReport(False, message=f"decay along axis {j} is not polynomial")
        mus.append(float(-slope))
    mus = tuple(round(m, 9) for m in mus)
    mesh = np.linspace(-t_max, t_max, points)
    for j in range(g.dim):
        pts = np.zeros((mesh.size, g.dim))
        pts[:, j] = mesh
        ratio = np.abs(g.char_fn(pts)) / (1 + mesh * mesh) ** (-mus[j] / 2)
        lo, hi = min(lo, ratio.min()), max(hi, ratio.max())
    return WellPosednessReport(True, mu=mus, g1=float(lo), g2=float(hi))


def require_well_posed(g: NoiseSpec | None, alpha: float) -> WellPosednessReport:
    if alpha == 0.0:
        return WellPosednessReport(True, varpi=1.0)
    rep = check_well_posedness(g, alpha)
    if not rep.satisfied:
        raise IllPosedModelError(f"noise {g.family} with alpha={alpha}: {rep.message}")
    return rep


# -- gridded truths ----------------------------------------------------------------


def density_eval(f: DensitySpec, grid: UniformGrid) -> GriddedFunction:
    return GriddedFunction(grid, f.pdf(grid.mesh()))


def derivative_eval(f: DensitySpec, m: Sequence[int], grid: UniformGrid) -> GriddedFunction:
    return GriddedFunction(grid, f.derivative(grid.mesh(), m))


def truncation_mass(f: DensitySpec, grid: UniformGrid) -> float:
    """Mass of ``f`` outside the grid box (1 minus the rectangle-rule integral)."""
    return 1.0 - density_eval(f, grid).integral()


def observed_density(f: DensitySpec, g: NoiseSpec | None, alpha: float, grid: UniformGrid) -> GriddedFunction:
    """``(1 - alpha) f + alpha (g * f)`` on ``grid``."""
    fg = density_eval(f, grid)
    if alpha == 0.0:
        return fg
    sp = grid.spacing
    rad = [int(math.ceil(g.support_radius() / h)) for h in sp]
    ng = UniformGrid.symmetric(sp, rad)
    gg = GriddedFunction(ng, g.pdf(ng.mesh()))
    # widen the truth so that mass just outside the box is convolved in too
    wide = UniformGrid(tuple(lo - r * h for lo, r, h in zip(grid.lower, rad, sp)),
                       tuple(hi + r * h for hi, r, h in zip(grid.upper, rad, sp)),
                       tuple(n + 2 * r for n, r in zip(grid.points, rad)))
    conv = convolve(density_eval(f, wide), gg).crop(grid)
    return fg * (1 - alpha) + conv * alpha
