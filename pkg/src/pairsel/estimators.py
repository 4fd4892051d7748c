"""Kernel estimators on grids: density, pairwise, deconvolution and derivative.

Two evaluation methods are available everywhere:

``direct``
    exact kernel sums ``(1/m) sum_i k(T_i - x)`` at every grid node;
``binned-fft``
    linear binning of the sample onto the grid lattice followed by one FFT
    convolution with the tabulated kernel.
"""
from __future__ import annotations

import math
import string
import threading
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import _backend
from .errors import IncompatibleGridError, InvalidParameterError, UnsupportedOperationError
from .kernels import BandwidthVec, ProductKernel, as_bandwidth, canonical_pair, kernel_function
from .models import NoiseSpec, require_well_posed
from .numerics import (BinnedSpectrum, GriddedFunction, Sample, UniformGrid, convolve, lp_norm,
                       next_pow2, write_gridded_csv)

METHODS = ("direct", "binned-fft")
# frequency resolution of the deconvolution kernel, points per unit frequency
FREQ_DENSITY = 32.0
_DIRECT_CHUNK = 1 << 12


@dataclass(frozen=True, eq=False)
class EstimateRecord:
    bandwidth: BandwidthVec | tuple[BandwidthVec, BandwidthVec]
    estimate: GriddedFunction
    family: str
    half: str | None = None
    method: str = "binned-fft"

    def header(self) -> list[str]:
        if isinstance(self.bandwidth, tuple):
            bw = " ".join(str(b) for b in self.bandwidth)
        else:
            bw = str(self.bandwidth)
        return [f"# estimate: family={self.family} bandwidth={bw} half={self.half} method={self.method}"]

    def write_csv(self, path, extra_header: Sequence[str] = ()) -> None:
        write_gridded_csv(path, self.estimate, list(extra_header) + self.header())


def _check(sample: Sample, K: ProductKernel, grid: UniformGrid, method: str) -> None:
    if method not in METHODS:
        raise InvalidParameterError(f"unknown evaluation method {method!r}")
    if not (sample.dim == grid.dim == K.dim):
        raise IncompatibleGridError(f"dimensions differ: sample {sample.dim}, grid {grid.dim}, kernel {K.dim}")


def _einsum_outer(mats: list[np.ndarray]) -> np.ndarray:
    """``sum_i prod_j mats[j][i, a_j]`` as an array indexed by ``(a_1, ..., a_d)``."""
    letters = string.ascii_lowercase[1:len(mats) + 1]
    spec = ",".join("a" + c for c in letters) + "->" + letters
    return np.einsum(spec, *mats)


def direct_sum(points: np.ndarray, K: ProductKernel, h: BandwidthVec, grid: UniformGrid,
               m: Sequence[int] | None = None, impl=None) -> np.ndarray:
    """``sum_i (K_h)^(m)(T_i - x)`` at the grid nodes by exact summation."""
    m = (0,) * K.dim if m is None else tuple(m)
    axes = grid.axes()
    terms = [f.terms(hj, k) for f, hj, k in zip(K.factors, h.h, m)]
    if K.dim == 1:
        return _backend.kernel_sum_1d(points[:, 0], axes[0], *terms[0], impl=impl)
    out = np.zeros(grid.points)
    for start in range(0, len(points), _DIRECT_CHUNK):
        block = points[start:start + _DIRECT_CHUNK]
        mats = [_backend.kernel_matrix_1d(block[:, j], axes[j], *terms[j], impl=impl) for j in range(K.dim)]
        out += _einsum_outer(mats)
    return out


class BinnedFamily:
    """Binned sample shared by many bandwidths, with the pairwise kernels ``K_h * K_eta``."""

    def __init__(self, sample: Sample, K: ProductKernel, candidates: Iterable, grid: UniformGrid,
                 pairs: bool = True, m: Sequence[int] | None = None):
        self.K = K
        self.grid = grid
        self.m = (0,) * K.dim if m is None else tuple(m)
        self.sign = (-1) ** sum(self.m)
        self.radius = {}
        for h in candidates:
            h = as_bandwidth(h)
            self.radius[h] = K.tabulation_radius(h, grid.spacing)
        big = tuple(max(r[j] for r in self.radius.values()) for j in range(K.dim))
        pad = tuple(2 * r for r in big) if pairs else big
        self.binned = BinnedSpectrum(sample, grid, pad, max_kernel_radius=pad)
        self._spec = {}
        for h, r in self.radius.items():
            self._spec[h] = self.binned.kernel_spectrum(K.tabulate(h, grid.spacing, r, self.m))

    @property
    def n(self) -> int:
        return self.binned.n

    def estimate(self, h) -> GriddedFunction:
        h = as_bandwidth(h)
        vals = self.binned.apply(self._spec[h], self.radius[h])
        return GriddedFunction(self.grid, self.sign * vals)

    def pair(self, h, eta) -> GriddedFunction:
        a, b = canonical_pair(as_bandwidth(h), as_bandwidth(eta))
        spec = self._spec[a] * self._spec[b] * self.grid.cell_volume
        r = tuple(x + y for x, y in zip(self.radius[a], self.radius[b]))
        return GriddedFunction(self.grid, self.binned.apply(spec, r))


def kde(sample: Sample, K: ProductKernel, h, grid: UniformGrid, method: str = "binned-fft",
        half: str | None = None) -> EstimateRecord:
    """``x -> (1/m) sum_i K_h(T_i - x)`` on ``grid``."""
    h = as_bandwidth(h)
    _check(sample, K, grid, method)
    if method == "direct":
        vals = direct_sum(sample.points, K, h, grid) / len(sample)
        est = GriddedFunction(grid, vals)
    else:
        est = BinnedFamily(sample, K, [h], grid, pairs=False).estimate(h)
    return EstimateRecord(h, est, "A", half, method)


def _gaussian_pair_terms(f, a: float, b: float):
    amps = np.multiply.outer(f.coefs, f.coefs).ravel()
    scales = np.sqrt(np.add.outer((f.scales * a) ** 2, (f.scales * b) ** 2)).ravel()
    return amps, scales, _backend.GAUSSIAN, 0, f.base.poly(0), 1.0


def kde_pair(sample: Sample, K: ProductKernel, h, eta, grid: UniformGrid, method: str = "binned-fft",
             half: str | None = None) -> EstimateRecord:
    """Kernel estimate with the pairwise kernel ``K_h * K_eta``."""
    a, b = canonical_pair(as_bandwidth(h), as_bandwidth(eta))
    _check(sample, K, grid, method)
    if method == "direct":
        if not (K.smooth and all(f.base.name == "gaussian" for f in K.factors)):
            raise UnsupportedOperationError("direct pairwise sums need a Gaussian-based order-s kernel")
        axes = grid.axes()
        pts = sample.points
        terms = [_gaussian_pair_terms(f, x, y) for f, x, y in zip(K.factors, a.h, b.h)]
        if K.dim == 1:
            vals = _backend.kernel_sum_1d(pts[:, 0], axes[0], *terms[0])
        else:
            vals = np.zeros(grid.points)
            for start in range(0, len(pts), _DIRECT_CHUNK):
                block = pts[start:start + _DIRECT_CHUNK]
                vals += _einsum_outer([_backend.kernel_matrix_1d(block[:, j], axes[j], *terms[j])
                                       for j in range(K.dim)])
        est = GriddedFunction(grid, vals / len(sample))
    else:
        est = BinnedFamily(sample, K, [a, b], grid).pair(a, b)
    return EstimateRecord((a, b), est, "A-pair", half, method)


def derivative_estimate(second_half: Sample, K: ProductKernel, h, m: Sequence[int], grid: UniformGrid,
                        method: str = "binned-fft") -> EstimateRecord:
    """``x -> (1/m) sum_i (-1)^|m| (K_h)^(m)(X_i - x)``, the m-th derivative of the kde."""
    h = as_bandwidth(h)
    m = tuple(int(v) for v in np.atleast_1d(m))
    if len(m) != K.dim or any(v < 0 for v in m):
        raise InvalidParameterError(f"invalid multi-index {m}")
    if any(m) and not K.smooth:
        raise UnsupportedOperationError("derivative estimates need an order-s kernel with a smooth base")
    _check(second_half, K, grid, method)
    if method == "direct":
        vals = (-1) ** sum(m) * direct_sum(second_half.points, K, h, grid, m) / len(second_half)
        est = GriddedFunction(grid, vals)
    else:
        est = BinnedFamily(second_half, K, [h], grid, pairs=False, m=m).estimate(h)
    return EstimateRecord(h, est, "B-deriv", "second", method)


# -- deconvolution -----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DeconvKernel:
    """``M(., h)`` tabulated on a centred lattice, with the data needed to rebuild it."""

    function: GriddedFunction
    kernel: ProductKernel
    h: BandwidthVec
    noise: NoiseSpec | None
    alpha: float

    @property
    def radius(self) -> tuple[int, ...]:
        return tuple((n - 1) // 2 for n in self.function.grid.points)

    def fourier(self, t) -> np.ndarray:
        return deconv_fourier(self.kernel, self.h, self.noise, self.alpha, t)


def deconv_fourier(K: ProductKernel, h: BandwidthVec, g: NoiseSpec | None, alpha: float, t) -> np.ndarray:
    """``K_hat(t h) / ((1 - alpha) + alpha g_hat(-t))``."""
    t = np.asarray(t, dtype=float)
    if K.dim == 1 and (t.ndim == 0 or t.shape[-1] != 1):
        t = t[..., None]
    num = K.fourier(t * np.asarray(h.h))
    if alpha == 0.0:
        return num.astype(complex)
    return num / ((1 - alpha) + alpha * g.char_fn(-t))


_DECONV_CACHE: dict = {}
_DECONV_LOCK = threading.Lock()


def _freq_support(K: ProductKernel, h: BandwidthVec) -> list[float]:
    return [f.support_radius / hj for f, hj in zip(K.factors, h.h)]


def deconv_kernel(K: ProductKernel, h, g: NoiseSpec | None, alpha: float, grid: UniformGrid,
                  radius_cap: float = 128.0) -> DeconvKernel:
    """Deconvolution kernel ``M(., h)`` with Fourier transform ``K_hat(t h) / (1 - alpha + alpha g_hat(-t))``.

    The inverse transform is taken on a periodic lattice with the spacing of ``grid``
    and a period long enough for ``FREQ_DENSITY`` frequency points per unit. The
    result is kept on ``|x_j| <= radius_cap * h_j`` (clipped to the period).
    """
    h = as_bandwidth(h)
    if K.family != "band_limited":
        raise UnsupportedOperationError("deconvolution needs a band-limited kernel")
    if K.dim != grid.dim:
        raise IncompatibleGridError("kernel and grid dimensions differ")
    require_well_posed(g, alpha)
    key = (K, h, g if alpha > 0 else None, float(alpha), grid.spacing, float(radius_cap))
    with _DECONV_LOCK:
        hit = _DECONV_CACHE.get(key)
    if hit is not None:
        return hit
    sp = np.asarray(grid.spacing)
    for s, t in zip(sp, _freq_support(K, h)):
        if math.pi / s < t:
            raise IncompatibleGridError(f"spacing {s} cannot resolve frequencies up to {t}")
    sizes = [next_pow2(int(math.ceil(2 * math.pi * FREQ_DENSITY / s))) for s in sp]
    freqs = [2 * math.pi * np.fft.fftfreq(n, d=s) for n, s in zip(sizes, sp)]
    tmesh = np.stack(np.meshgrid(*freqs, indexing="ij"), axis=-1)
    spec = deconv_fourier(K, h, g, alpha, tmesh)
    # M(x_l) = (1 / prod(N s)) sum_k M_hat(t_k) exp(-i t_k x_l)
    vals = np.fft.fftn(spec).real / float(np.prod(np.asarray(sizes) * sp))
    vals = np.fft.fftshift(vals)
    rad = [min(n // 2 - 1, int(math.ceil(radius_cap * hj / s))) for n, hj, s in zip(sizes, h.h, sp)]
    sl = tuple(slice(n // 2 - r, n // 2 + r + 1) for n, r in zip(sizes, rad))
    fn = GriddedFunction(UniformGrid.symmetric(sp, rad), vals[sl])
    out = DeconvKernel(fn, K, h, g if alpha > 0 else None, float(alpha))
    with _DECONV_LOCK:
        _DECONV_CACHE.setdefault(key, out)
    return out


def clear_deconv_cache() -> None:
    with _DECONV_LOCK:
        _DECONV_CACHE.clear()


def deconv_estimate(second_half: Sample, M: DeconvKernel, grid: UniformGrid,
                    method: str = "binned-fft") -> EstimateRecord:
    """``x -> (1/m) sum_i M(Z_i - x, h)`` on ``grid``.

    ``direct`` integrates ``M_hat(t) * (1/m) sum_i exp(-i t Z_i)`` against
    ``exp(i t x)`` over the frequency support (d = 1); ``binned-fft`` convolves the
    binned sample with the tabulated kernel.
    """
    if method not in METHODS:
        raise InvalidParameterError(f"unknown evaluation method {method!r}")
    if second_half.dim != grid.dim:
        raise IncompatibleGridError("sample and grid dimensions differ")
    if method == "direct":
        if grid.dim != 1:
            raise UnsupportedOperationError("direct deconvolution estimates are implemented for d = 1")
        vals = _deconv_direct_1d(second_half.points[:, 0], M, grid.axes()[0])
    else:
        if not M.function.grid.same_spacing(grid):
            raise IncompatibleGridError("deconvolution kernel and grid spacing differ")
        rad = M.radius
        binned = BinnedSpectrum(second_half, grid, rad, rad)
        vals = binned.apply(binned.kernel_spectrum(M.function.values), rad)
    return EstimateRecord(M.h, GriddedFunction(grid, vals), "B-deconv", "second", method)


def _deconv_direct_1d(z: np.ndarray, M: DeconvKernel, x: np.ndarray, per_unit: int = 64) -> np.ndarray:
    top = _freq_support(M.kernel, M.h)[0]
    nt = int(math.ceil(2 * top * per_unit)) | 1
    t = np.linspace(-top, top, nt)
    w = np.full(nt, t[1] - t[0])
    w[[0, -1]] *= 0.5
    ecf = np.zeros(nt, dtype=complex)
    for start in range(0, len(z), _DIRECT_CHUNK):
        ecf += np.exp(-1j * np.outer(t, z[start:start + _DIRECT_CHUNK])).sum(axis=1)
    ecf /= len(z)
    weights = w * M.fourier(t) * ecf / (2 * math.pi)
    out = np.zeros(x.size)
    for start in range(0, x.size, _DIRECT_CHUNK):
        xs = x[start:start + _DIRECT_CHUNK]
        out[start:start + xs.size] = (np.exp(1j * np.outer(xs, t)) @ weights).real
    return out


# -- bias diagnostics --------------------------------------------------------------


def smoothed_truth(f_true: GriddedFunction, K: ProductKernel, h) -> GriddedFunction:
    """``K_h * f`` on the grid of ``f`` (``f`` taken as zero outside its box)."""
    kf = kernel_function(K, as_bandwidth(h), f_true.grid.spacing)
    return convolve(f_true, kf).crop(f_true.grid)


def bias_profile(f_true: GriddedFunction, K: ProductKernel, h, p: float = 2.0) -> float:
    """``||K_h * f - f||_p``."""
    return lp_norm(smoothed_truth(f_true, K, h) - f_true, p)
