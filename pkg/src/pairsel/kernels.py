"""Kernel families, anisotropic scaling, analytic derivatives and kernel norms.

Two one-dimensional families are provided and combined into product kernels:

* :class:`OrderSKernel1D` -- ``sum_{i=1}^s C(s,i) (-1)^(i+1) (1/i) w(y/i)`` built from a
  smooth base density ``w`` (standard Gaussian or the C-infinity bump on [-1, 1]).
  Its moments of order 1..s-1 vanish.
* :class:`BandLimitedKernel1D` -- Fourier transform equal to 1 on [-1, 1], a
  ``cos^2`` taper on 1 < |t| < 2 and 0 beyond. Used for deconvolution.

Fourier transforms follow the characteristic-function convention
``Q_hat(t) = integral Q(x) exp(i t x) dx``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np
from numpy.polynomial import Polynomial
from numpy.polynomial import hermite_e
from scipy import integrate

from . import _backend
from .errors import IncompatibleGridError, InvalidParameterError, UnsupportedOperationError
from .numerics import GriddedFunction, UniformGrid, convolve

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(40)


def _piecewise_abs_power(func, breaks: np.ndarray, p: float) -> float:
    """Integral of |func|^p over consecutive intervals of ``breaks`` by Gauss-Legendre."""
    a = breaks[:-1][:, None]
    b = breaks[1:][:, None]
    x = 0.5 * (b - a) * _GL_NODES[None, :] + 0.5 * (a + b)
    vals = np.abs(func(x)) ** p
    return float(np.sum(0.5 * (b - a) * (vals @ _GL_WEIGHTS[:, None])))


def _refine(breaks: np.ndarray, max_width: float) -> np.ndarray:
    out = [breaks[0]]
    for lo, hi in zip(breaks[:-1], breaks[1:]):
        k = max(1, int(math.ceil((hi - lo) / max_width)))
        out.extend(lo + (hi - lo) * np.arange(1, k + 1) / k)
    return np.asarray(out)


def _sign_change_breaks(func, lo: float, hi: float, n: int = 20001) -> np.ndarray:
    from scipy.optimize import brentq

    x = np.linspace(lo, hi, n)
    y = func(x)
    roots = []
    for i in np.nonzero(np.sign(y[:-1]) * np.sign(y[1:]) < 0)[0]:
        roots.append(brentq(func, x[i], x[i + 1], xtol=1e-15))
    return np.unique(np.concatenate([[lo], roots, [hi]]))


# -- base densities ----------------------------------------------------------------


@dataclass(frozen=True)
class _Base:
    name: str

    @cached_property
    def code(self) -> int:
        return {"gaussian": _backend.GAUSSIAN, "bump": _backend.BUMP}[self.name]

    @cached_property
    def bump_constant(self) -> float:
        if self.name != "bump":
            return 1.0
        mass, _ = integrate.quad(lambda y: math.exp(-1.0 / (1.0 - y * y)), -1, 1, epsabs=0, epsrel=1e-13, limit=200)
        return 1.0 / mass

    def poly(self, k: int) -> np.ndarray:
        """Coefficients (ascending) of the polynomial factor in the k-th derivative."""
        return _base_poly(self.name, k)

    def eval(self, y, k: int = 0):
        return _backend._fallback._base(self.code, k, self.poly(k), self.bump_constant, np.asarray(y, dtype=float))

    def fourier(self, t):
        t = np.asarray(t, dtype=float)
        if self.name == "gaussian":
            return np.exp(-0.5 * t * t)
        breaks = np.linspace(-1.0, 1.0, 201)
        a, b = breaks[:-1, None], breaks[1:, None]
        y = (0.5 * (b - a) * _GL_NODES + 0.5 * (a + b)).ravel()
        wts = (0.5 * (b - a) * _GL_WEIGHTS).ravel() * self.eval(y)
        return np.reshape(np.cos(np.outer(np.ravel(t), y)) @ wts, t.shape)

    @property
    def radius(self) -> float:
        return 9.0 if self.name == "gaussian" else 1.0


_POLY_CACHE: dict = {}


def _base_poly(name: str, k: int) -> np.ndarray:
    key = (name, k)
    if key in _POLY_CACHE:
        return _POLY_CACHE[key]
    if name == "gaussian":
        # phi^(k)(y) = (-1)^k He_k(y) phi(y)
        coef = hermite_e.herme2poly([0] * k + [1]) * (-1) ** k
    else:
        # w^(k) = c P_k(y) q^(-2k) exp(-1/q), q = 1 - y^2
        y = Polynomial([0, 1])
        q = Polynomial([1, 0, -1])
        P = Polynomial([1])
        for j in range(k):
            P = P.deriv() * q * q + 4 * j * y * q * P - 2 * y * P
        coef = P.coef
    coef = np.asarray(coef, dtype=float)
    _POLY_CACHE[key] = coef
    return coef


# -- one-dimensional kernels -------------------------------------------------------


class OrderSKernel1D:
    """``K_s(y) = sum_{i=1}^s C(s,i)(-1)^(i+1) (1/i) w(y/i)``."""

    family = "order_s"

    def __init__(self, base: str = "gaussian", s: int = 2):
        if base not in ("gaussian", "bump"):
            raise InvalidParameterError(f"unknown base density {base!r}")
        if int(s) != s or s < 1:
            raise InvalidParameterError(f"kernel order must be an integer >= 1, got {s}")
        self.base = _Base(base)
        self.s = int(s)
        self.coefs = np.array([math.comb(self.s, i) * (-1) ** (i + 1) for i in range(1, self.s + 1)], dtype=float)
        self.scales = np.arange(1, self.s + 1, dtype=float)
        self._norms: dict[float, float] = {}
        self.norm_tolerance: dict[float, float] = {}

    def __repr__(self):
        return f"OrderSKernel1D(base={self.base.name!r}, s={self.s})"

    def __eq__(self, other):
        return isinstance(other, OrderSKernel1D) and (self.base.name, self.s) == (other.base.name, other.s)

    def __hash__(self):
        return hash(("order_s", self.base.name, self.s))

    def __getstate__(self):
        return {"base": self.base.name, "s": self.s}

    def __setstate__(self, state):
        self.__init__(state["base"], state["s"])

    @property
    def radius(self) -> float:
        """Half-width beyond which the kernel is (numerically) zero."""
        return self.base.radius * self.s

    def derivative(self, y, k: int = 0) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        out = np.zeros_like(y)
        for c, i in zip(self.coefs, self.scales):
            out += c * i ** (-1 - k) * self.base.eval(y / i, k)
        return out

    def __call__(self, y) -> np.ndarray:
        return self.derivative(y, 0)

    def fourier(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return sum(c * self.base.fourier(i * t) for c, i in zip(self.coefs, self.scales))

    def terms(self, h: float, k: int = 0):
        """Arguments for the backend mixture sums: amplitudes, scales, base code, poly."""
        return self.coefs, self.scales * h, self.base.code, k, self.base.poly(k), self.base.bump_constant

    def norm(self, p: float) -> float:
        p = float(p)
        if p not in self._norms:
            r = self.radius
            breaks = _refine(_sign_change_breaks(self, -r, r), 0.05 * self.s)
            self._norms[p] = _piecewise_abs_power(self, breaks, p) ** (1.0 / p)
            self.norm_tolerance[p] = 1e-12
        return self._norms[p]


class BandLimitedKernel1D:
    """Flat-top kernel: Fourier transform 1 on [-1,1], cos^2 taper to 0 at |t| = 2.

    Closed form ``K(x) = pi (sin x + sin 2x) / (2 x (pi^2 - x^2))``.
    """

    family = "band_limited"
    flat_radius = 1.0
    support_radius = 2.0
    _TAIL_CUT = 4000 * math.pi

    def __init__(self):
        self._norms: dict[float, float] = {}
        self.norm_tolerance: dict[float, float] = {}

    def __repr__(self):
        return "BandLimitedKernel1D()"

    def __eq__(self, other):
        return isinstance(other, BandLimitedKernel1D)

    def __hash__(self):
        return hash("band_limited")

    def __getstate__(self):
        return {}

    def __setstate__(self, state):
        self.__init__()

    radius = math.inf

    def __call__(self, y) -> np.ndarray:
        return _backend._fallback._band_limited(np.asarray(y, dtype=float))

    def derivative(self, y, k: int = 0):
        if k == 0:
            return self(y)
        raise UnsupportedOperationError("band-limited kernels are not differentiated")

    @staticmethod
    def fourier(t) -> np.ndarray:
        a = np.abs(np.asarray(t, dtype=float))
        taper = np.cos(0.5 * np.pi * (a - 1.0)) ** 2
        return np.where(a <= 1.0, 1.0, np.where(a >= 2.0, 0.0, taper))

    def terms(self, h: float, k: int = 0):
        if k:
            raise UnsupportedOperationError("band-limited kernels are not differentiated")
        return np.array([1.0]), np.array([h]), _backend.BAND_LIMITED, 0, np.array([1.0]), 1.0

    def norm(self, p: float) -> float:
        p = float(p)
        if p in self._norms:
            return self._norms[p]
        if p == 2.0:
            # Parseval: (1/2pi) int K_hat^2 = (1/pi)(1 + 3/8)
            self._norms[p] = math.sqrt(11.0 / (8.0 * math.pi))
            self.norm_tolerance[p] = 1e-15
            return self._norms[p]
        A = self._TAIL_CUT
        # zeros of sin x + sin 2x = 2 sin(3x/2) cos(x/2) on (0, A]
        z1 = 2 * math.pi * np.arange(1, int(3 * A / (2 * math.pi)) + 1) / 3
        z2 = math.pi * (2 * np.arange(0, int(A / (2 * math.pi)) + 1) + 1)
        breaks = np.unique(np.concatenate([[0.0, A], z1[z1 < A], z2[z2 < A]]))
        head = _piecewise_abs_power(self, breaks, p)
        # tail: |K| ~ pi |sin x + sin 2x| / (2 x^3)
        u = np.linspace(0, 2 * math.pi, 200001)[:-1]
        mean_osc = float(np.mean(np.abs(np.sin(u) + np.sin(2 * u)) ** p))
        tail = mean_osc * (math.pi / 2) ** p * A ** (1 - 3 * p) / (3 * p - 1)
        self._norms[p] = (2 * (head + tail)) ** (1.0 / p)
        self.norm_tolerance[p] = 2 * tail
        return self._norms[p]


Kernel1D = OrderSKernel1D | BandLimitedKernel1D


def build_order_s(w: str = "gaussian", s: int = 2) -> OrderSKernel1D:
    return OrderSKernel1D(w, s)


# -- bandwidths --------------------------------------------------------------------


@dataclass(frozen=True, order=False)
class BandwidthVec:
    """Anisotropic bandwidth with components in (0, 1]."""

    h: tuple[float, ...]

    def __post_init__(self):
        h = tuple(float(v) for v in np.atleast_1d(self.h))
        if not h or any(not (0.0 < v <= 1.0) for v in h):
            raise InvalidParameterError(f"bandwidth components must lie in (0, 1], got {h}")
        object.__setattr__(self, "h", h)

    @property
    def dim(self) -> int:
        return len(self.h)

    @property
    def v_h(self) -> float:
        return float(np.prod(self.h))

    def exponents(self) -> tuple[float, ...]:
        return tuple(-math.log2(v) for v in self.h)

    def sort_key(self):
        """Decreasing volume, then lexicographic exponent vector."""
        return (-self.v_h, self.exponents())

    def __str__(self):
        return "(" + ",".join(f"{v:.6g}" for v in self.h) + ")"


def as_bandwidth(h) -> BandwidthVec:
    return h if isinstance(h, BandwidthVec) else BandwidthVec(tuple(np.atleast_1d(h)))


def canonical_pair(h: BandwidthVec, eta: BandwidthVec) -> tuple[BandwidthVec, BandwidthVec]:
    return (h, eta) if h.sort_key() <= eta.sort_key() else (eta, h)


# -- product kernels ---------------------------------------------------------------


class ProductKernel:
    """``K(x) = prod_j k_j(x_j)`` with all factors from one family."""

    def __init__(self, factors: Sequence[Kernel1D]):
        factors = tuple(factors)
        if not factors:
            raise InvalidParameterError("a product kernel needs at least one factor")
        fams = {f.family for f in factors}
        if len(fams) != 1:
            raise InvalidParameterError("product kernel factors must share one family")
        self.factors = factors
        self.family = fams.pop()

    @classmethod
    def order_s(cls, d: int = 1, s: int = 2, base: str = "gaussian") -> "ProductKernel":
        return cls([OrderSKernel1D(base, s)] * d)

    @classmethod
    def band_limited(cls, d: int = 1) -> "ProductKernel":
        return cls([BandLimitedKernel1D()] * d)

    def __repr__(self):
        return f"ProductKernel({list(self.factors)!r})"

    def __eq__(self, other):
        return isinstance(other, ProductKernel) and self.factors == other.factors

    def __hash__(self):
        return hash(self.factors)

    @property
    def dim(self) -> int:
        return len(self.factors)

    @property
    def smooth(self) -> bool:
        return self.family == "order_s"

    def __call__(self, x) -> np.ndarray:
        return self.derivative(x, (0,) * self.dim)

    def derivative(self, x, m: Sequence[int]) -> np.ndarray:
        """Analytic partial derivative ``K^(m)`` at points ``x`` of shape (..., d)."""
        x = _as_points(x, self.dim)
        m = _multi_index(m, self.dim)
        out = np.ones(x.shape[:-1])
        for j, (f, k) in enumerate(zip(self.factors, m)):
            out = out * f.derivative(x[..., j], k)
        return out

    def fourier(self, t) -> np.ndarray:
        t = _as_points(t, self.dim)
        out = np.ones(t.shape[:-1])
        for j, f in enumerate(self.factors):
            out = out * f.fourier(t[..., j])
        return out

    def norm(self, p: float) -> float:
        return float(np.prod([f.norm(p) for f in self.factors]))

    def norm_tolerance(self, p: float) -> float:
        self.norm(p)
        return float(sum(f.norm_tolerance[float(p)] for f in self.factors))

    def tabulation_radius(self, h: BandwidthVec, spacing: Sequence[float], cap: float = 128.0) -> tuple[int, ...]:
        """Lattice radius (nodes per axis) outside of which ``K_h`` is treated as zero.

        Band-limited factors decay only like |x|^-3; they are cut at ``cap * h_j``.
        """
        out = []
        for f, hj, sp in zip(self.factors, h.h, spacing):
            r = f.radius if math.isfinite(f.radius) else cap
            out.append(int(math.ceil(r * hj / sp)))
        return tuple(out)

    def tabulate(self, h: BandwidthVec, spacing: Sequence[float], radius: Sequence[int],
                 m: Sequence[int] | None = None) -> np.ndarray:
        """``(K_h)^(m)`` at lattice offsets ``l * spacing``, ``|l_j| <= radius_j``."""
        m = _multi_index(m, self.dim)
        arrays = []
        for f, hj, sp, r, k in zip(self.factors, h.h, spacing, radius, m):
            u = np.arange(-r, r + 1) * sp
            arrays.append(f.derivative(u / hj, k) / hj ** (1 + k))
        out = arrays[0]
        for a in arrays[1:]:
            out = np.multiply.outer(out, a)
        return out


def _multi_index(m, d: int) -> tuple[int, ...]:
    if m is None:
        return (0,) * d
    m = tuple(int(v) for v in np.atleast_1d(m))
    if len(m) != d or any(v < 0 for v in m):
        raise InvalidParameterError(f"multi-index {m} invalid for dimension {d}")
    return m


def _as_points(x, d: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if d == 1 and (x.ndim == 0 or x.shape[-1] != 1):
        x = x[..., None]
    if x.shape[-1] != d:
        raise InvalidParameterError(f"points must have trailing dimension {d}")
    return x


def eval_scaled(K: ProductKernel, h, t) -> np.ndarray:
    """``K_h(t) = V_h^{-1} K(t_1/h_1, ..., t_d/h_d)``."""
    return eval_scaled_derivative(K, h, (0,) * K.dim, t)


def eval_scaled_derivative(K: ProductKernel, h, m, t) -> np.ndarray:
    """``(K_h)^(m)(t) = V_h^{-1} prod_j h_j^{-m_j} K^(m)(t/h)``."""
    h = as_bandwidth(h)
    m = _multi_index(m, K.dim)
    if any(m) and not K.smooth:
        raise UnsupportedOperationError("derivatives need an order-s kernel with a smooth base")
    t = _as_points(t, K.dim)
    hv = np.asarray(h.h)
    scale = 1.0 / h.v_h * float(np.prod(hv ** (-np.asarray(m, dtype=float))))
    return scale * K.derivative(t / hv, m)


def kernel_function(K: ProductKernel, h, spacing, radius=None, m=None) -> GriddedFunction:
    """``K_h`` (or a derivative) tabulated on the centred lattice with the given spacing."""
    h = as_bandwidth(h)
    radius = K.tabulation_radius(h, spacing) if radius is None else radius
    grid = UniformGrid.symmetric(spacing, radius)
    return GriddedFunction(grid, K.tabulate(h, grid.spacing, radius, m))


def pair_kernel(K: ProductKernel, h, eta, grid: UniformGrid) -> GriddedFunction:
    """``K_h * K_eta`` on ``grid``; the arguments are put in canonical order first."""
    a, b = canonical_pair(as_bandwidth(h), as_bandwidth(eta))
    sp = grid.spacing
    fa = kernel_function(K, a, sp)
    fb = kernel_function(K, b, sp)
    full = convolve(fa, fb)
    try:
        return _embed(full, grid)
    except IncompatibleGridError:
        raise IncompatibleGridError("pair_kernel needs a grid whose nodes are multiples of its spacing")


def _embed(f: GriddedFunction, grid: UniformGrid) -> GriddedFunction:
    """Values of ``f`` on ``grid`` (zero outside f's grid); both must share a lattice."""
    off = f.grid.offset_index(grid)
    out = np.zeros(grid.points)
    src, dst = [], []
    for o, n_dst, n_src in zip(off, grid.points, f.grid.points):
        lo = max(0, -o)
        hi = min(n_dst, n_src - o)
        if hi <= lo:
            return GriddedFunction(grid, out)
        dst.append(slice(lo, hi))
        src.append(slice(lo + o, hi + o))
    out[tuple(dst)] = f.values[tuple(src)]
    return GriddedFunction(grid, out)
