"""Bandwidth selection by pairwise comparison and the split-sample plug-in pipeline.

For every candidate ``h`` the selector computes

    R(h) = max_eta [ |A_{h,eta} - A_eta|_p - 2 Psi(eta) ]_+

and picks the minimiser of ``R(h) + 2 Psi(h)``. Exact ties go to the largest
bandwidth volume.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .bandwidths import DyadicGrid
from .errors import EmptyGridError, IncompleteFamilyError, InvalidParameterError
from .estimators import (BinnedFamily, EstimateRecord, deconv_estimate, deconv_kernel, derivative_estimate,
                         kde, kde_pair)
from .kernels import BandwidthVec, ProductKernel, as_bandwidth, canonical_pair
from .models import DatasetPair, NoiseSpec, require_well_posed
from .numerics import GriddedFunction, UniformGrid, format_float, lp_norm
from .upper import UpperFunction, UpperFunctionConfig


@dataclass(frozen=True)
class CriterionRow:
    h: BandwidthVec
    r_hat: float
    psi: float

    @property
    def criterion(self) -> float:
        return self.r_hat + 2.0 * self.psi


@dataclass(frozen=True)
class SelectorResult:
    chosen: BandwidthVec
    table: tuple[CriterionRow, ...]
    chosen_value: float
    slack_used: float = 0.0
    tie_break_applied: bool = False

    def row(self, h) -> CriterionRow:
        h = as_bandwidth(h)
        for r in self.table:
            if r.h == h:
                return r
        raise KeyError(h)

    def csv_lines(self) -> list[str]:
        d = self.chosen.dim
        lines = [",".join([f"h_{j + 1}" for j in range(d)] + ["V_h", "R_hat", "Psi", "criterion", "chosen"])]
        for r in self.table:
            vals = [format_float(v) for v in r.h.h]
            vals += [format_float(r.h.v_h), format_float(r.r_hat), format_float(r.psi), format_float(r.criterion)]
            vals.append("1" if r.h == self.chosen else "0")
            lines.append(",".join(vals))
        return lines

    def write_csv(self, path, extra_header: Sequence[str] = ()) -> None:
        head = [h if h.startswith("#") else "# " + h for h in extra_header]
        with open(path, "w") as fh:
            fh.write("\n".join(head + self.csv_lines()) + "\n")


def _values(x) -> GriddedFunction:
    return x.estimate if isinstance(x, EstimateRecord) else x


def _lookup_pair(pair_estimates: Mapping, h: BandwidthVec, eta: BandwidthVec) -> GriddedFunction:
    key = canonical_pair(h, eta)
    if key in pair_estimates:
        return _values(pair_estimates[key])
    if (key[1], key[0]) in pair_estimates:
        return _values(pair_estimates[(key[1], key[0])])
    raise IncompleteFamilyError(f"pairwise estimate for ({h}, {eta}) is missing")


def _lookup(mapping: Mapping, h: BandwidthVec, what: str):
    try:
        return mapping[h]
    except KeyError:
        raise IncompleteFamilyError(f"{what} for {h} is missing") from None


def r_hat(h, estimates: Mapping, pair_estimates: Mapping, psi: Mapping, p: float,
          candidates: Sequence | None = None) -> float:
    """``max_eta [ |A_{h,eta} - A_eta|_p - 2 Psi(eta) ]_+`` over ``candidates`` (default: keys of ``estimates``)."""
    h = as_bandwidth(h)
    cands = list(estimates) if candidates is None else [as_bandwidth(c) for c in candidates]
    best = 0.0
    for eta in cands:
        diff = _lookup_pair(pair_estimates, h, eta) - _values(_lookup(estimates, eta, "estimate"))
        best = max(best, lp_norm(diff, p) - 2.0 * _lookup(psi, eta, "majorant"))
    return best


def select(grid: DyadicGrid | Sequence, estimates: Mapping, pair_estimates: Mapping, psi: Mapping,
           p: float) -> SelectorResult:
    """Minimise ``R(h) + 2 Psi(h)`` over the candidate set."""
    members = [as_bandwidth(h) for h in grid]
    if not members:
        raise EmptyGridError("cannot select from an empty candidate set")
    rows = []
    for h in members:
        _lookup(estimates, h, "estimate")
        rows.append(CriterionRow(h, r_hat(h, estimates, pair_estimates, psi, p, members), float(psi[h])))
    # ties: largest volume first, then exponent vector
    ordered = sorted(rows, key=lambda r: r.h.sort_key())
    best = min(r.criterion for r in ordered)
    winners = [r for r in ordered if r.criterion == best]
    return SelectorResult(winners[0].h, tuple(rows), best, 0.0, len(winners) > 1)


# -- plug-in pipeline --------------------------------------------------------------


@dataclass(frozen=True)
class Problem:
    """``density`` | ``deconvolution`` (noise, alpha) | ``derivative`` (multi-index)."""

    kind: str = "density"
    noise: NoiseSpec | None = None
    alpha: float = 0.0
    m: tuple | None = None

    def __post_init__(self):
        if self.kind not in ("density", "deconvolution", "derivative"):
            raise InvalidParameterError(f"unknown problem {self.kind!r}")
        if self.kind == "derivative":
            if self.m is None:
                raise InvalidParameterError("the derivative problem needs a multi-index")
            object.__setattr__(self, "m", tuple(int(v) for v in np.atleast_1d(self.m)))
        if self.kind == "deconvolution":
            if not 0.0 <= self.alpha <= 1.0:
                raise InvalidParameterError("alpha must lie in [0, 1]")
            if self.alpha > 0 and self.noise is None:
                raise InvalidParameterError("deconvolution with alpha > 0 needs a noise law")


@dataclass
class PipelineResult:
    selector: SelectorResult
    final_estimate: EstimateRecord
    # second-half estimates at every candidate (filled when requested)
    fixed: dict = field(default_factory=dict)
    psi: dict = field(default_factory=dict)


def first_half_family(data: DatasetPair, K: ProductKernel, grid: DyadicGrid | Sequence, eval_grid: UniformGrid,
                      method: str = "binned-fft"):
    """``(estimates, pair_estimates)`` on the first half for every candidate and pair."""
    members = [as_bandwidth(h) for h in grid]
    sample = data.first_half
    est, pairs = {}, {}
    if method == "binned-fft":
        fam = BinnedFamily(sample, K, members, eval_grid)
        for i, a in enumerate(members):
            est[a] = fam.estimate(a)
            for b in members[i:]:
                pairs[canonical_pair(a, b)] = fam.pair(a, b)
    else:
        for i, a in enumerate(members):
            est[a] = kde(sample, K, a, eval_grid, method, "first").estimate
            for b in members[i:]:
                pairs[canonical_pair(a, b)] = kde_pair(sample, K, a, b, eval_grid, method, "first").estimate
    return est, pairs


def final_estimate(data: DatasetPair, problem: Problem, K: ProductKernel, h, eval_grid: UniformGrid,
                   method: str = "binned-fft") -> EstimateRecord:
    """Second-half estimate at bandwidth ``h`` for the target of ``problem``."""
    h = as_bandwidth(h)
    second = data.second_half
    if problem.kind == "density":
        return kde(second, K, h, eval_grid, method, "second")
    if problem.kind == "derivative":
        return derivative_estimate(second, K, h, problem.m, eval_grid, method)
    M = deconv_kernel(K, h, problem.noise, problem.alpha, eval_grid)
    return deconv_estimate(second, M, eval_grid, method)


def fixed_estimates(data: DatasetPair, problem: Problem, K: ProductKernel, grid, eval_grid: UniformGrid,
                    method: str = "binned-fft") -> dict:
    """Second-half estimates for every candidate bandwidth."""
    members = [as_bandwidth(h) for h in grid]
    if method == "binned-fft" and problem.kind in ("density", "derivative"):
        m = problem.m if problem.kind == "derivative" else None
        fam = BinnedFamily(data.second_half, K, members, eval_grid, pairs=False, m=m)
        return {h: fam.estimate(h) for h in members}
    return {h: final_estimate(data, problem, K, h, eval_grid, method).estimate for h in members}


def plugin_pipeline(data: DatasetPair, problem: Problem, K: ProductKernel, grid: DyadicGrid | Sequence,
                    cfg: UpperFunctionConfig, eval_grid: UniformGrid, method: str = "binned-fft",
                    with_fixed: bool = False) -> PipelineResult:
    """Select on the first half, estimate on the second half.

    The selection always compares ordinary kernel estimates built with ``K``; the
    second stage reuses the chosen bandwidth for the target of ``problem``.
    """
    if problem.kind == "deconvolution":
        require_well_posed(problem.noise, problem.alpha)
        if K.family != "band_limited":
            raise InvalidParameterError("deconvolution needs a band-limited kernel")
    if problem.kind == "derivative" and not K.smooth:
        raise InvalidParameterError("derivative estimation needs an order-s kernel")
    members = [as_bandwidth(h) for h in grid]
    est, pairs = first_half_family(data, K, members, eval_grid, method)
    psi = UpperFunction(data.first_half, K, members, cfg, eval_grid).values
    result = select(members, est, pairs, psi, cfg.p)
    fixed = {}
    if with_fixed:
        fixed = fixed_estimates(data, problem, K, members, eval_grid, method)
        final = EstimateRecord(result.chosen, fixed[result.chosen], _family_tag(problem), "second", method)
    else:
        final = final_estimate(data, problem, K, result.chosen, eval_grid, method)
    return PipelineResult(result, final, fixed, psi)


def _family_tag(problem: Problem) -> str:
    return {"density": "A", "deconvolution": "B-deconv", "derivative": "B-deriv"}[problem.kind]
