"""Majorants for the stochastic error of kernel estimators.

``delta_m`` has three regimes in the loss exponent ``p``:

* ``1 <= p < 2``: ``128 |K|_1 |K|_p (m V_h)^(1/p - 1)``
* ``p = 2``: ``9 |K|_1 |K|_2 (m V_h)^(-1/2)``
* ``p > 2``: ``(480 p |K|_1 / ln p) * (m^(-1/2) || ((1/m) sum_i K_h^2(T_i - .))^(1/2) ||_p
  + 2 |K|_p (m V_h)^(-1/2))``

and every value is multiplied by ``c_scale``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import InvalidParameterError
from .kernels import BandwidthVec, ProductKernel, as_bandwidth
from .numerics import BinnedSpectrum, GriddedFunction, Sample, UniformGrid, lp_norm


@dataclass(frozen=True)
class UpperFunctionConfig:
    p: float = 2.0
    c_scale: float = 1.0
    # upper envelope constant for p > 2, as a multiple of the lower one (diagnostics only)
    d_factor: float = 4.0

    def __post_init__(self):
        if not self.p >= 1:
            raise InvalidParameterError(f"p must be >= 1, got {self.p}")
        if not self.c_scale > 0:
            raise InvalidParameterError(f"c_scale must be positive, got {self.c_scale}")
        if not self.d_factor >= 1:
            raise InvalidParameterError("d_factor must be >= 1")


def _constants(K: ProductKernel, p: float) -> tuple[float, float]:
    """Leading constants ``(lower, upper)`` of the non-random envelope."""
    n1 = K.norm(1)
    if p < 2:
        c = 128.0 * n1 * K.norm(p)
        return c, c
    if p == 2:
        c = 9.0 * n1 * K.norm(2)
        return c, c
    c = 960.0 * p * n1 * K.norm(p) / math.log(p)
    return c, c


def psi_bounds(m: int, h, p: float, K: ProductKernel, cfg: UpperFunctionConfig | None = None) -> tuple[float, float]:
    """Envelope ``C (m V_h)^(1/min(p,2) - 1)`` as ``(lower, upper)``.

    The two coincide for ``p <= 2``; for ``p > 2`` the upper constant is
    ``cfg.d_factor`` times the lower one.
    """
    cfg = cfg or UpperFunctionConfig(p=p)
    h = as_bandwidth(h)
    lo, hi = _constants(K, p)
    if p > 2:
        hi = cfg.d_factor * lo
    rate = (m * h.v_h) ** (1.0 / min(p, 2.0) - 1.0)
    return cfg.c_scale * lo * rate, cfg.c_scale * hi * rate


def _check_m(m: int) -> None:
    if m < 2:
        raise InvalidParameterError(f"the upper function needs at least 2 observations, got {m}")


def delta_m(sample_half: Sample, K: ProductKernel, h, cfg: UpperFunctionConfig,
            grid: UniformGrid | None = None) -> float:
    """``c_scale * Delta_m(h)`` for one bandwidth. ``grid`` is required when ``p > 2``."""
    return UpperFunction(sample_half, K, [h], cfg, grid).values[as_bandwidth(h)]


class UpperFunction:
    """``Delta_m`` over a whole candidate set, sharing one binned sample when ``p > 2``."""

    def __init__(self, sample_half: Sample, K: ProductKernel, candidates: Iterable, cfg: UpperFunctionConfig,
                 grid: UniformGrid | None = None):
        m = len(sample_half)
        _check_m(m)
        self.cfg = cfg
        self.m = m
        p = cfg.p
        cands = [as_bandwidth(h) for h in candidates]
        self.values: dict[BandwidthVec, float] = {}
        self.empirical_term: dict[BandwidthVec, float] = {}
        n1 = K.norm(1)
        if p < 2:
            c = 128.0 * n1 * K.norm(p)
            for h in cands:
                self.values[h] = cfg.c_scale * c * (m * h.v_h) ** (1.0 / p - 1.0)
            return
        if p == 2:
            c = 9.0 * n1 * K.norm(2)
            for h in cands:
                self.values[h] = cfg.c_scale * c * (m * h.v_h) ** -0.5
            return
        if grid is None:
            raise InvalidParameterError("p > 2 needs the evaluation grid for the empirical integral")
        lead = 480.0 * p * n1 / math.log(p)
        rad = {h: K.tabulation_radius(h, grid.spacing) for h in cands}
        big = tuple(max(r[j] for r in rad.values()) for j in range(K.dim))
        binned = BinnedSpectrum(sample_half, grid, big, big)
        kp = K.norm(p)
        for h in cands:
            sq = K.tabulate(h, grid.spacing, rad[h]) ** 2
            mean_sq = np.maximum(binned.apply(binned.kernel_spectrum(sq), rad[h]), 0.0)
            emp = m ** -0.5 * lp_norm(GriddedFunction(grid, np.sqrt(mean_sq)), p)
            self.empirical_term[h] = emp
            self.values[h] = cfg.c_scale * lead * (emp + 2.0 * kp * (m * h.v_h) ** -0.5)

    def __getitem__(self, h) -> float:
        return self.values[as_bandwidth(h)]
