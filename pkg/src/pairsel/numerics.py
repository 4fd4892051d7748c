"""Functions on uniform grids: norms, FFT convolution, finite differences, CSV I/O.

Every function on R^d is represented by its values on a uniform box grid.
Integrals are rectangle-rule sums over the grid nodes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _backend
from .errors import IncompatibleGridError, InvalidParameterError, InvalidStepError

_REL_TOL = 1e-9


def next_pow2(n: int) -> int:
    return 1 << max(0, int(n - 1).bit_length())


@dataclass(frozen=True)
class UniformGrid:
    """Box ``[lower, upper]`` in R^d with ``points`` nodes per axis (both ends included)."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]
    points: tuple[int, ...]

    def __post_init__(self):
        lower = tuple(float(v) for v in np.atleast_1d(self.lower))
        upper = tuple(float(v) for v in np.atleast_1d(self.upper))
        points = tuple(int(v) for v in np.atleast_1d(self.points))
        if not (len(lower) == len(upper) == len(points)):
            raise InvalidParameterError("lower, upper and points must have the same length")
        for lo, hi, n in zip(lower, upper, points):
            if not lo < hi:
                raise InvalidParameterError(f"grid needs lower < upper, got {lo} >= {hi}")
            if n < 2:
                raise InvalidParameterError(f"grid needs at least 2 points per axis, got {n}")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        object.__setattr__(self, "points", points)

    @classmethod
    def lattice(cls, lower, upper, spacing) -> "UniformGrid":
        """Grid whose nodes are integer multiples of ``spacing``, covering ``[lower, upper]``."""
        lower = np.atleast_1d(np.asarray(lower, dtype=float))
        upper = np.atleast_1d(np.asarray(upper, dtype=float))
        spacing = np.broadcast_to(np.asarray(spacing, dtype=float), lower.shape)
        lo_idx = np.floor(lower / spacing + 1e-9)
        hi_idx = np.ceil(upper / spacing - 1e-9)
        return cls(tuple(lo_idx * spacing), tuple(hi_idx * spacing), tuple((hi_idx - lo_idx + 1).astype(int)))

    @classmethod
    def symmetric(cls, spacing, radius_points) -> "UniformGrid":
        """Lattice ``{l * spacing : |l| <= radius_points}`` centred on the origin."""
        spacing = np.atleast_1d(np.asarray(spacing, dtype=float))
        rad = np.broadcast_to(np.asarray(radius_points, dtype=int), spacing.shape)
        return cls(tuple(-rad * spacing), tuple(rad * spacing), tuple(2 * rad + 1))

    @property
    def dim(self) -> int:
        return len(self.points)

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple((hi - lo) / (n - 1) for lo, hi, n in zip(self.lower, self.upper, self.points))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def shape(self) -> tuple[int, ...]:
        return self.points

    @property
    def size(self) -> int:
        return int(np.prod(self.points))

    def axes(self) -> list[np.ndarray]:
        return [lo + np.arange(n) * sp for lo, n, sp in zip(self.lower, self.points, self.spacing)]

    def mesh(self) -> np.ndarray:
        """Node coordinates, shape ``points + (d,)``."""
        return np.stack(np.meshgrid(*self.axes(), indexing="ij"), axis=-1)

    def same_spacing(self, other: "UniformGrid") -> bool:
        return self.dim == other.dim and all(
            math.isclose(a, b, rel_tol=_REL_TOL) for a, b in zip(self.spacing, other.spacing)
        )

    def offset_index(self, other: "UniformGrid") -> tuple[int, ...]:
        """Integer node offset of ``other.lower`` inside this grid; raises when not aligned."""
        out = []
        for lo_self, lo_other, sp in zip(self.lower, other.lower, self.spacing):
            k = (lo_other - lo_self) / sp
            if abs(k - round(k)) > 1e-6:
                raise IncompatibleGridError("grid nodes are not on a common lattice")
            out.append(int(round(k)))
        return tuple(out)

    def header(self) -> str:
        vals = [str(self.dim)] + [repr(v) for v in self.lower] + [repr(v) for v in self.upper]
        vals += [str(n) for n in self.points]
        return "# grid: " + ",".join(vals)


@dataclass(frozen=True, eq=False)
class GriddedFunction:
    """Values of a real function at the nodes of ``grid``."""

    grid: UniformGrid
    values: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64).reshape(self.grid.points)
        if not np.all(np.isfinite(vals)):
            raise InvalidParameterError("gridded values must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def __add__(self, other):
        return GriddedFunction(self.grid, self.values + _values_like(self, other))

    def __sub__(self, other):
        return GriddedFunction(self.grid, self.values - _values_like(self, other))

    def __mul__(self, c):
        return GriddedFunction(self.grid, self.values * float(c))

    __rmul__ = __mul__

    def __neg__(self):
        return GriddedFunction(self.grid, -self.values)

    def integral(self) -> float:
        return float(self.values.sum() * self.grid.cell_volume)

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def crop(self, grid: UniformGrid) -> "GriddedFunction":
        """Restrict to the nodes of ``grid`` (which must lie on this grid's lattice)."""
        if not self.grid.same_spacing(grid):
            raise IncompatibleGridError("crop requires identical spacing")
        off = self.grid.offset_index(grid)
        sl = []
        for o, n, nn in zip(off, grid.points, self.grid.points):
            if o < 0 or o + n > nn:
                raise IncompatibleGridError("target grid is not inside the source grid")
            sl.append(slice(o, o + n))
        return GriddedFunction(grid, self.values[tuple(sl)])


def _values_like(f: GriddedFunction, other) -> np.ndarray | float:
    if isinstance(other, GriddedFunction):
        if other.grid != f.grid:
            raise IncompatibleGridError("arithmetic on functions over different grids")
        return other.values
    return float(other)


@dataclass(frozen=True, eq=False)
class Sample:
    """``n`` observations in R^d, stored as an ``(n, d)`` array."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise InvalidParameterError("a sample needs at least one d-dimensional point")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.points.shape[0]

    def concat(self, other: "Sample") -> "Sample":
        return Sample(np.vstack([self.points, other.points]))


def grid_tolerance(grid: UniformGrid) -> float:
    """Nominal discretisation error of rectangle-rule integrals on ``grid``."""
    return max(grid.spacing) ** 2


def lp_norm(f: GriddedFunction, p: float) -> float:
    """Rectangle-rule approximation of the L_p norm over the grid box."""
    if not p >= 1:
        raise InvalidParameterError(f"L_p norm needs p >= 1, got {p}")
    a = np.abs(f.values)
    vol = f.grid.cell_volume
    if p == 1:
        return float(a.sum() * vol)
    if p == 2:
        sq = float(np.dot(a.ravel(), a.ravel()))
        # outside the normal range the squares under- or overflow; use the scaled form
        if np.finfo(float).tiny <= sq < math.inf:
            return float(math.sqrt(sq * vol))
    scale = a.max()
    if scale == 0:
        return 0.0
    return float(scale * (np.sum((a / scale) ** p) * vol) ** (1.0 / p))


def fft_convolve_arrays(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Full linear convolution of two real arrays via zero-padded real FFT."""
    out_shape = tuple(x + y - 1 for x, y in zip(a.shape, b.shape))
    pad = tuple(next_pow2(x + y) for x, y in zip(a.shape, b.shape))
    axes = tuple(range(a.ndim))
    spec = np.fft.rfftn(a, pad, axes=axes) * np.fft.rfftn(b, pad, axes=axes)
    full = np.fft.irfftn(spec, pad, axes=axes)
    return full[tuple(slice(0, n) for n in out_shape)]


def convolve(f: GriddedFunction, g: GriddedFunction) -> GriddedFunction:
    """``(f * g)(x) = integral f(y) g(x - y) dy`` on the Minkowski-sum grid."""
    if not f.grid.same_spacing(g.grid):
        raise IncompatibleGridError(f"spacings differ: {f.grid.spacing} vs {g.grid.spacing}")
    vals = fft_convolve_arrays(f.values, g.values) * f.grid.cell_volume
    out_points = tuple(a + b - 1 for a, b in zip(f.grid.points, g.grid.points))
    lower = tuple(a + b for a, b in zip(f.grid.lower, g.grid.lower))
    upper = tuple(lo + (n - 1) * sp for lo, n, sp in zip(lower, out_points, f.grid.spacing))
    return GriddedFunction(UniformGrid(lower, upper, out_points), vals)


def finite_difference(G: GriddedFunction, u: float, j: int, k: int = 1) -> GriddedFunction:
    """k-th order difference ``Delta_{u,j}^k G``, computed as k first differences.

    The result lives on the shrunken grid where every stencil point is a node.
    """
    if k < 1:
        raise InvalidParameterError("difference order must be >= 1")
    if not 0 <= j < G.grid.dim:
        raise InvalidParameterError(f"axis {j} out of range")
    sp = G.grid.spacing[j]
    steps = u / sp
    s = int(round(steps))
    if s == 0 or abs(steps - s) > 1e-6 * max(1.0, abs(steps)):
        raise InvalidStepError(f"step {u} is not a nonzero multiple of the spacing {sp}")
    if k * abs(s) >= G.grid.points[j] - 1:
        raise InvalidStepError("k * |u| must be smaller than the box extent")
    out = G
    for _ in range(k):
        out = _first_difference(out, s, j)
    return out


def _first_difference(G: GriddedFunction, s: int, j: int) -> GriddedFunction:
    n = G.grid.points[j]
    v = np.moveaxis(G.values, j, 0)
    if s > 0:
        diff = v[s:] - v[: n - s]
        lo_shift = 0
    else:
        diff = v[: n + s] - v[-s:]
        lo_shift = -s
    diff = np.moveaxis(diff, 0, j)
    sp = G.grid.spacing[j]
    lower = list(G.grid.lower)
    points = list(G.grid.points)
    lower[j] = G.grid.lower[j] + lo_shift * sp
    points[j] = n - abs(s)
    upper = [lo + (m - 1) * h for lo, m, h in zip(lower, points, G.grid.spacing)]
    upper[j] = lower[j] + (points[j] - 1) * sp
    return GriddedFunction(UniformGrid(tuple(lower), tuple(upper), tuple(points)), diff)


def central_gradient(G: GriddedFunction, j: int = 0) -> GriddedFunction:
    """Second-order central difference along axis ``j``; drops one node at each end."""
    sp = G.grid.spacing[j]
    v = np.moveaxis(G.values, j, 0)
    d = np.moveaxis((v[2:] - v[:-2]) / (2 * sp), 0, j)
    lower = list(G.grid.lower)
    upper = list(G.grid.upper)
    points = list(G.grid.points)
    lower[j] += sp
    upper[j] -= sp
    points[j] -= 2
    return GriddedFunction(UniformGrid(tuple(lower), tuple(upper), tuple(points)), d)


class BinnedSpectrum:
    """Linearly binned sample held in the frequency domain.

    Evaluating ``x -> (1/n) sum_i k(t_i - x)`` for many kernels ``k`` tabulated on a
    centred lattice of radius up to ``max_kernel_radius`` nodes costs one inverse FFT
    each. Points farther than ``pad_radius`` nodes outside the grid are dropped.
    """

    def __init__(self, sample: Sample, grid: UniformGrid, pad_radius: Sequence[int],
                 max_kernel_radius: Sequence[int] | None = None):
        if sample.dim != grid.dim:
            raise IncompatibleGridError("sample and grid dimensions differ")
        self.grid = grid
        self.n = len(sample)
        self.pad = tuple(int(r) for r in pad_radius)
        kr = self.pad if max_kernel_radius is None else tuple(int(r) for r in max_kernel_radius)
        self.max_kernel_radius = kr
        sp = grid.spacing
        ext_lower = [lo - r * h for lo, r, h in zip(grid.lower, self.pad, sp)]
        ext_shape = [n + 2 * r for n, r in zip(grid.points, self.pad)]
        self.weights = _backend.linear_bin(sample.points, ext_lower, sp, ext_shape)
        self.binned_mass = float(self.weights.sum())
        self.fft_shape = tuple(next_pow2(e + 2 * r + 1) for e, r in zip(ext_shape, kr))
        self._axes = tuple(range(grid.dim))
        self.spectrum_w = np.fft.rfftn(self.weights, self.fft_shape, axes=self._axes)

    def kernel_spectrum(self, kernel_values: np.ndarray) -> np.ndarray:
        """Spectrum of a kernel tabulated at offsets ``-R..R`` (reflected for correlation)."""
        for n, r in zip(kernel_values.shape, self.max_kernel_radius):
            if n > 2 * r + 1:
                raise IncompatibleGridError("kernel radius exceeds the padding of this spectrum")
        rev = kernel_values[tuple(slice(None, None, -1) for _ in kernel_values.shape)]
        return np.fft.rfftn(rev, self.fft_shape, axes=self._axes)

    def apply(self, kernel_spectrum: np.ndarray, radius: Sequence[int]) -> np.ndarray:
        """Evaluate the averaged kernel sum on the grid from a kernel spectrum of given radius."""
        full = np.fft.irfftn(self.spectrum_w * kernel_spectrum, self.fft_shape, axes=self._axes)
        sl = tuple(slice(p + r, p + r + n) for p, r, n in zip(self.pad, radius, self.grid.points))
        return full[sl] / self.n


# -- CSV ---------------------------------------------------------------------------


def format_float(x: float) -> str:
    return f"{x:.17g}"


def write_gridded_csv(path, f: GriddedFunction, extra_header: Sequence[str] = ()) -> None:
    lines = [f.grid.header()]
    lines += [h if h.startswith("#") else "# " + h for h in extra_header]
    lines += [format_float(v) for v in f.values.ravel(order="C")]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_gridded_csv(path) -> GriddedFunction:
    grid = None
    vals = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("# grid:"):
                parts = line[len("# grid:"):].split(",")
                d = int(parts[0])
                nums = parts[1:]
                grid = UniformGrid(
                    tuple(float(v) for v in nums[:d]),
                    tuple(float(v) for v in nums[d:2 * d]),
                    tuple(int(v) for v in nums[2 * d:3 * d]),
                )
            elif line.startswith("#"):
                continue
            else:
                vals.append(float(line))
    if grid is None:
        raise InvalidParameterError(f"{path}: missing '# grid:' header")
    return GriddedFunction(grid, np.array(vals))


def write_sample_csv(path, sample: Sample, extra_header: Sequence[str] = ()) -> None:
    lines = [h if h.startswith("#") else "# " + h for h in extra_header]
    lines.append(",".join(f"x_{j + 1}" for j in range(sample.dim)))
    lines += [",".join(format_float(v) for v in row) for row in sample.points]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_sample_csv(path) -> Sample:
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#") or line.startswith("x_"):
                continue
            rows.append([float(v) for v in line.split(",")])
    return Sample(np.array(rows))
