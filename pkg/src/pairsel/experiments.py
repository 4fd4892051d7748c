"""One Monte Carlo replication of a full select-then-estimate experiment."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bandwidths import DyadicGrid, build_grid
from .errors import InvalidParameterError
from .kernels import ProductKernel
from .models import DensitySpec, NoiseSpec, density_eval, derivative_eval, observed_density, sample_contaminated
from .numerics import GriddedFunction, UniformGrid, lp_norm
from .selector import PipelineResult, Problem, plugin_pipeline
from .upper import UpperFunctionConfig

DEFAULT_POINTS = {1: 2 ** 10, 2: 2 ** 8}


@dataclass(frozen=True)
class PipelineSpec:
    """Everything needed to run the pipeline on simulated data of any size ``n``.

    The evaluation grid is a dyadic lattice over ``box``. Its spacing is the finer of
    ``box width / (DEFAULT_POINTS - 1)`` and ``resolution * smallest candidate
    bandwidth``, rounded down to a power of two.
    """

    problem: Problem
    density: DensitySpec
    kernel: ProductKernel
    noise: NoiseSpec | None = None
    alpha: float = 0.0
    grid_mode: str = "full"
    p: float = 2.0
    c_scale: float = 1.0
    d_factor: float = 4.0
    box: tuple = ((-8.0,), (8.0,))
    resolution: float = 0.5
    method: str = "binned-fft"
    grid_m: int | None = None

    def __post_init__(self):
        d = self.kernel.dim
        if self.density.dim != d:
            raise InvalidParameterError("density and kernel dimensions differ")
        lo, hi = (tuple(float(v) for v in np.atleast_1d(b)) for b in self.box)
        if len(lo) != d or len(hi) != d:
            raise InvalidParameterError("box dimension differs from the kernel dimension")
        object.__setattr__(self, "box", (lo, hi))
        if not 0 < self.resolution <= 1:
            raise InvalidParameterError("resolution must lie in (0, 1]")

    @property
    def dim(self) -> int:
        return self.kernel.dim

    @property
    def upper_config(self) -> UpperFunctionConfig:
        return UpperFunctionConfig(self.p, self.c_scale, self.d_factor)

    def candidates(self, n: int) -> DyadicGrid:
        m = self.grid_m if self.grid_m is not None else n // 2
        return build_grid(m, self.dim, self.grid_mode)

    def eval_grid(self, n: int) -> UniformGrid:
        grid = self.candidates(n)
        hmin = grid.min_component()
        lo, hi = self.box
        spacing = []
        for j in range(self.dim):
            base = (hi[j] - lo[j]) / (DEFAULT_POINTS.get(self.dim, 2 ** 6) - 1)
            sp = min(base, self.resolution * hmin[j])
            spacing.append(2.0 ** math.floor(math.log2(sp)))
        return UniformGrid.lattice(lo, hi, spacing)

    def target(self, grid: UniformGrid) -> GriddedFunction:
        kind = self.problem.kind
        if kind == "derivative":
            return derivative_eval(self.density, self.problem.m, grid)
        if kind == "deconvolution":
            return density_eval(self.density, grid)
        return observed_density(self.density, self.noise, self.alpha, grid)

    def dataset(self, n: int, seed: int, replication: int = 0):
        return sample_contaminated(self.density, self.noise, self.alpha, n, seed, replication)

    def run(self, n: int, seed: int, replication: int = 0, with_fixed: bool = False) -> PipelineResult:
        data = self.dataset(n, seed, replication)
        return plugin_pipeline(data, self.problem, self.kernel, self.candidates(n), self.upper_config,
                               self.eval_grid(n), self.method, with_fixed)


@dataclass
class ReplicationOutcome:
    replication: int
    chosen: tuple
    loss: float
    fixed_losses: dict = field(default_factory=dict)


def run_replication(spec: PipelineSpec, n: int, seed: int, replication: int, p: float,
                    with_fixed: bool = False, target: GriddedFunction | None = None) -> ReplicationOutcome:
    """Loss ``|estimate - target|_p`` of the selected estimator (and of every candidate)."""
    res = spec.run(n, seed, replication, with_fixed)
    grid = res.final_estimate.estimate.grid
    target = spec.target(grid) if target is None else target
    loss = lp_norm(res.final_estimate.estimate - target, p)
    fixed = {h.h: lp_norm(v - target, p) for h, v in res.fixed.items()}
    return ReplicationOutcome(replication, res.selector.chosen.h, loss, fixed)
