"""Monte Carlo risk, oracle ratios, rate fitting and smoothness-class checks."""
from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import (InconsistencyRegionError, InvalidParameterError, PairselError, ReplicationError,
                     UnsupportedOperationError)
from .estimators import smoothed_truth
from .experiments import PipelineSpec, run_replication
from .kernels import ProductKernel, as_bandwidth, eval_scaled
from .models import DensitySpec
from .numerics import GriddedFunction, UniformGrid, finite_difference, format_float, lp_norm
from .upper import UpperFunctionConfig, psi_bounds


@dataclass(frozen=True)
class RiskConfig:
    p: float = 2.0
    q: float | None = None
    replications: int = 100
    sample_sizes: tuple = (2 ** 10, 2 ** 12, 2 ** 14, 2 ** 16)
    seed: int = 20240101

    def __post_init__(self):
        q = self.p if self.q is None else self.q
        object.__setattr__(self, "q", float(q))
        object.__setattr__(self, "sample_sizes", tuple(int(n) for n in self.sample_sizes))
        if not (self.p >= 1 and q >= 1):
            raise InvalidParameterError("p and q must be >= 1")
        if self.replications < 2:
            raise InvalidParameterError("at least 2 replications are needed")
        if any(b <= a for a, b in zip(self.sample_sizes, self.sample_sizes[1:])):
            raise InvalidParameterError("sample sizes must be strictly increasing")


@dataclass
class RiskRow:
    n: int
    method: str
    risk: float
    mc_stderr: float
    values: tuple


@dataclass
class RateExponents:
    l_exponent: float
    n_exponent: float
    source: str


@dataclass
class RateFit:
    slope: float
    stderr: float
    theoretical: float | None
    tolerance: float
    passed: bool | None


@dataclass
class RiskReport:
    rows: list
    theoretical: RateExponents | None = None
    fit: RateFit | None = None

    def risks(self, method: str | None = None):
        rows = [r for r in self.rows if method is None or r.method == method]
        return np.array([r.n for r in rows]), np.array([r.risk for r in rows])

    def csv_lines(self) -> list[str]:
        out = ["n,method,risk,mc_stderr"]
        for r in self.rows:
            out.append(f"{r.n},{r.method},{format_float(r.risk)},{format_float(r.mc_stderr)}")
        return out

    def summary(self) -> dict:
        out = {"risks": {str(r.n): r.risk for r in self.rows}}
        if self.fit is not None:
            stderr = None if math.isnan(self.fit.stderr) else self.fit.stderr
            out.update(slope=self.fit.slope, slope_stderr=stderr, theoretical=self.fit.theoretical,
                       tolerance=self.fit.tolerance, passed=self.fit.passed)
        if self.theoretical is not None:
            out.update(L_exponent=self.theoretical.l_exponent, rate_source=self.theoretical.source)
        return out

    def write(self, csv_path, json_path, header: Sequence[str] = (), meta: dict | None = None) -> None:
        """CSV table plus JSON summary; ``meta`` entries are merged into the summary."""
        head = [h if h.startswith("#") else "# " + h for h in header]
        with open(csv_path, "w") as fh:
            fh.write("\n".join(head + self.csv_lines()) + "\n")
        with open(json_path, "w") as fh:
            json.dump({**self.summary(), **(meta or {})}, fh, indent=2, sort_keys=True, allow_nan=False)
            fh.write("\n")


def aggregate(losses: Sequence[float], q: float) -> tuple[float, float]:
    """``(mean L^q)^(1/q)`` and its delta-method standard error."""
    x = np.asarray(losses, dtype=float) ** q
    mean = float(x.mean())
    if mean == 0.0:
        return 0.0, 0.0
    se_mean = float(x.std(ddof=1) / math.sqrt(len(x))) if len(x) > 1 else 0.0
    return mean ** (1.0 / q), (1.0 / q) * mean ** (1.0 / q - 1.0) * se_mean


# -- replication driver ------------------------------------------------------------


def _replicate(args):
    spec, n, seed, rep, p, with_fixed = args
    try:
        return run_replication(spec, n, seed, rep, p, with_fixed)
    except PairselError as exc:
        raise ReplicationError(str(exc), rep, seed) from exc
    except (ArithmeticError, ValueError, FloatingPointError) as exc:
        raise ReplicationError(str(exc), rep, seed) from exc


def run_replications(spec: PipelineSpec, n: int, seed: int, replications: int, p: float,
                     with_fixed: bool = False, jobs: int = 1) -> list:
    """All replications for one sample size, returned in replication order."""
    tasks = [(spec, n, seed, r, p, with_fixed) for r in range(replications)]
    if jobs <= 1:
        return [_replicate(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_replicate, tasks))


def mc_risk(cfg: RiskConfig, pipeline: PipelineSpec | Callable, target=None, jobs: int = 1,
            method: str = "selected") -> RiskReport:
    """Monte Carlo ``L_p`` risk of an estimator for every sample size in ``cfg``.

    ``pipeline`` is either a :class:`PipelineSpec` (the selected estimator is scored) or a
    callable ``(n, seed, replication) -> GriddedFunction``. ``target`` is a
    ``GriddedFunction``, a callable ``grid -> GriddedFunction``, or ``None`` to use the
    spec's own ground truth.
    """
    rows = []
    for n in cfg.sample_sizes:
        if isinstance(pipeline, PipelineSpec) and target is None:
            outs = run_replications(pipeline, n, cfg.seed, cfg.replications, cfg.p, jobs=jobs)
            losses = [o.loss for o in outs]
        else:
            if isinstance(pipeline, PipelineSpec):
                def fn(r, n=n):
                    return pipeline.run(n, cfg.seed, r).final_estimate.estimate
            else:
                def fn(r, n=n):
                    return pipeline(n, cfg.seed, r)
            losses = [_score(fn, r, target, cfg) for r in range(cfg.replications)]
        risk, se = aggregate(losses, cfg.q)
        rows.append(RiskRow(n, method, risk, se, tuple(losses)))
    return RiskReport(rows)


def _score(fn, rep: int, target, cfg: RiskConfig) -> float:
    try:
        est = fn(rep)
    except PairselError as exc:
        raise ReplicationError(str(exc), rep, cfg.seed) from exc
    tgt = target(est.grid) if callable(target) else target
    return lp_norm(est - tgt, cfg.p)


# -- oracle inequality -------------------------------------------------------------


@dataclass
class OracleRow:
    n: int
    median: float
    q90: float
    aggregate: float
    selected_risk: float
    best_fixed_risk: float
    bound: float
    ratios: tuple
    chosen: tuple


def oracle_ratio(cfg: RiskConfig, spec: PipelineSpec, jobs: int = 1) -> list[OracleRow]:
    """Per replication, loss(selected) / min_h loss(h) on the same second-half data.

    ``aggregate`` is the ratio of the selected risk to the best fixed-bandwidth risk.
    ``bound`` is ``min_h { bias(h) + upper envelope(h) }`` for the truth, a
    non-random reference value.
    """
    out = []
    for n in cfg.sample_sizes:
        outs = run_replications(spec, n, cfg.seed, cfg.replications, cfg.p, with_fixed=True, jobs=jobs)
        ratios = []
        for o in outs:
            best = min(o.fixed_losses.values())
            ratios.append(o.loss / best if best > 0 else 1.0)
        sel_risk, _ = aggregate([o.loss for o in outs], cfg.q)
        keys = list(outs[0].fixed_losses)
        fixed_risk = {k: aggregate([o.fixed_losses[k] for o in outs], cfg.q)[0] for k in keys}
        best_fixed = min(fixed_risk.values())
        out.append(OracleRow(n, float(np.median(ratios)), float(np.quantile(ratios, 0.9)),
                             sel_risk / best_fixed if best_fixed > 0 else 1.0, sel_risk, best_fixed,
                             theoretical_bound(spec, n), tuple(ratios), tuple(o.chosen for o in outs)))
    return out


def theoretical_bound(spec: PipelineSpec, n: int) -> float:
    grid = spec.eval_grid(n)
    truth = spec.target(grid)
    ucfg = spec.upper_config
    best = math.inf
    if spec.problem.kind != "density" or spec.alpha != 0 or not spec.kernel.smooth:
        return math.nan
    for h in spec.candidates(n):
        b = lp_norm(smoothed_truth(truth, spec.kernel, h) - truth, spec.p)
        best = min(best, b + psi_bounds(n // 2, h, spec.p, spec.kernel, ucfg)[1])
    return best


def oracle_csv_lines(rows: Sequence[OracleRow]) -> list[str]:
    out = ["n,median_ratio,q90_ratio,aggregate_ratio,selected_risk,best_fixed_risk,theoretical_bound"]
    for r in rows:
        vals = [r.median, r.q90, r.aggregate, r.selected_risk, r.best_fixed_risk, r.bound]
        out.append(f"{r.n}," + ",".join(format_float(v) for v in vals))
    return out


def kde_risk_decomposition(f_true: GriddedFunction, K: ProductKernel, h, n: int) -> tuple[float, float]:
    """``(bias, sd)`` of a fixed-bandwidth kde in L_2.

    ``sd^2 = (1/n) (int K_h^2 * f - int (K_h * f)^2)`` is the exact integrated variance.
    """
    from .kernels import kernel_function
    from .numerics import convolve

    h = as_bandwidth(h)
    smooth = smoothed_truth(f_true, K, h)
    bias = lp_norm(smooth - f_true, 2)
    kf = kernel_function(K, h, f_true.grid.spacing)
    sq = GriddedFunction(kf.grid, kf.values ** 2)
    second = convolve(f_true, sq).crop(f_true.grid).integral()
    var = (second - lp_norm(smooth, 2) ** 2) / n
    return bias, math.sqrt(max(var, 0.0))


# -- theoretical rates -------------------------------------------------------------


def theoretical_rate(problem: str, beta, p: float = 2.0, m=None, mu: float | None = None,
                     d: int | None = None) -> RateExponents:
    """Exponents of ``L`` and ``n`` in the minimax rate.

    ``problem``: ``density`` (also used for partial contamination), ``derivative``,
    ``deconvolution`` (target ``f`` under full contamination, Sobolev class) or
    ``deconvolution-observed`` (the observed density in the same setting).
    """
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    if d is not None and len(beta) == 1:
        beta = np.repeat(beta, d)
    if np.any(beta <= 0):
        raise InvalidParameterError("smoothness exponents must be positive")
    if problem in ("deconvolution", "deconvolution-observed"):
        if len(beta) != 1 or mu is None:
            raise InvalidParameterError("the deconvolution rates are for d = 1 with a given mu")
        b, u = float(beta[0]), float(mu)
        den = 2 * b + 2 * u + 1
        if problem == "deconvolution":
            return RateExponents((1 + 2 * u) / den, -b / den, "sobolev-deconvolution")
        return RateExponents(1 / den, -(b + u) / den, "sobolev-observed")
    r = 1.0 - 1.0 / min(p, 2.0)
    inv_beta = float(np.sum(1.0 / beta))
    if problem == "density":
        return RateExponents(r / (1.0 / inv_beta + 1.0 - 1.0 / min(p, 2.0)) if r > 0 else 0.0,
                             -r / (1.0 + r * inv_beta), "nikolskii-density")
    if problem == "derivative":
        m = np.atleast_1d(np.asarray(m if m is not None else 0, dtype=float))
        if len(m) == 1 and len(beta) > 1:
            m = np.repeat(m, len(beta))
        inv_omega = float(np.sum(m / beta))
        if inv_omega >= 1.0:
            raise InconsistencyRegionError(f"omega = {1 / inv_omega if inv_omega else math.inf} <= 1")
        l_exp = (inv_beta * r + inv_omega) / (1.0 + r * inv_beta)
        n_exp = -(1.0 - inv_omega) * r / (1.0 + r * inv_beta)
        return RateExponents(l_exp, n_exp, "nikolskii-derivative")
    raise InvalidParameterError(f"unknown problem {problem!r}")


def rate_fit(report_or_sizes, risks=None, theoretical: float | None = None, tolerance: float = 0.08) -> RateFit:
    """Least-squares slope of log risk against log n."""
    if isinstance(report_or_sizes, RiskReport):
        ns, rs = report_or_sizes.risks()
    else:
        ns, rs = np.asarray(report_or_sizes, dtype=float), np.asarray(risks, dtype=float)
    if len(ns) < 3:
        raise InvalidParameterError("a rate fit needs at least 3 sample sizes")
    if ns.max() / ns.min() < 16:
        raise InvalidParameterError("sample sizes must span at least a factor 16")
    if np.any(rs <= 0):
        raise InvalidParameterError("risks must be positive for a log-log fit")
    x, y = np.log(ns), np.log(rs)
    coef, cov = np.polyfit(x, y, 1, cov=True) if len(ns) > 3 else (np.polyfit(x, y, 1), None)
    slope = float(coef[0])
    stderr = float(math.sqrt(max(cov[0, 0], 0.0))) if cov is not None else math.nan
    passed = None if theoretical is None else abs(slope - theoretical) <= tolerance
    return RateFit(slope, stderr, theoretical, tolerance, passed)


# -- smoothness classes ------------------------------------------------------------


@dataclass(frozen=True)
class SmoothnessSpec:
    kind: str = "nikolskii"
    beta: tuple = (2.0,)
    L: float = 1.0
    p: float = 2.0
    k: tuple | None = None

    def __post_init__(self):
        beta = tuple(float(b) for b in np.atleast_1d(self.beta))
        object.__setattr__(self, "beta", beta)
        if any(b <= 0 for b in beta) or not self.L > 0:
            raise InvalidParameterError("beta and L must be positive")
        if self.kind == "nikolskii":
            k = tuple(math.floor(b) + 1 for b in beta) if self.k is None else tuple(int(v) for v in np.atleast_1d(self.k))
            if len(k) != len(beta) or any(kj <= bj for kj, bj in zip(k, beta)):
                raise InvalidParameterError("difference orders must satisfy k_j > beta_j")
            object.__setattr__(self, "k", k)
        elif self.kind != "sobolev":
            raise InvalidParameterError(f"unknown smoothness class {self.kind!r}")


@dataclass
class NikolskiiResult:
    max_ratio: float
    norm: float
    ratios: dict = field(default_factory=dict)

    def passes(self, L: float) -> bool:
        return self.max_ratio <= L and self.norm <= L


def nikolskii_check(f: GriddedFunction, spec: SmoothnessSpec) -> NikolskiiResult:
    """``max_{u,j} |Delta^{k_j}_{u,j} f|_p / |u|^beta_j`` over steps ``u = +-spacing * 2^i``."""
    if len(spec.beta) != f.grid.dim:
        raise InvalidParameterError("smoothness vector and grid dimensions differ")
    ratios = {}
    for j, (b, k) in enumerate(zip(spec.beta, spec.k)):
        sp = f.grid.spacing[j]
        extent = f.grid.upper[j] - f.grid.lower[j]
        i = 0
        while sp * 2 ** i <= extent / 4 and k * 2 ** i < f.grid.points[j] - 1:
            for sign in (1, -1):
                u = sign * sp * 2 ** i
                diff = finite_difference(f, u, j, k)
                ratios[(j, u)] = lp_norm(diff, spec.p) / abs(u) ** b
            i += 1
    return NikolskiiResult(max(ratios.values(), default=0.0), lp_norm(f, spec.p), ratios)


@dataclass
class SobolevResult:
    integral: float
    L: float

    @property
    def passes(self) -> bool:
        return self.integral <= self.L ** 2


def sobolev_check(f: GriddedFunction, beta1: float, L: float, oversample: int = 4) -> SobolevResult:
    """``int (1 + t^2)^beta |f_hat(t)|^2 dt`` with ``f_hat(t) = int f(x) exp(i t x) dx``."""
    if f.grid.dim != 1:
        raise UnsupportedOperationError("the Sobolev check is implemented for d = 1")
    sp = f.grid.spacing[0]
    n = f.grid.points[0]
    size = 1 << int(math.ceil(math.log2(n * oversample)))
    spec = np.fft.rfft(f.values, size) * sp
    t = 2 * math.pi * np.fft.rfftfreq(size, d=sp)
    dt = t[1] - t[0]
    w = np.full(t.size, 2.0)
    w[0] = 1.0
    if size % 2 == 0:
        w[-1] = 1.0
    val = float(np.sum(w * (1 + t * t) ** beta1 * np.abs(spec) ** 2) * dt)
    return SobolevResult(val, L)


@dataclass
class KolmogorovResult:
    lhs: float
    rhs_without_constant: float
    ratio: float
    omega: float
    L: float


def kolmogorov_check(f: DensitySpec, m, spec: SmoothnessSpec, grid: UniformGrid,
                     L: float | None = None) -> KolmogorovResult:
    """``|f^(m)|_p`` against ``L^(1/omega) |f|_p^(1 - 1/omega)`` with ``1/omega = sum m_j / beta_j``.

    When ``L`` is None the smallest difference-ratio constant of ``f`` is used. The norm
    part of the class bound is left out so the ratio is invariant under
    ``f -> lam f(lam x)``.
    """
    m = tuple(int(v) for v in np.atleast_1d(m))
    inv_omega = float(sum(mj / bj for mj, bj in zip(m, spec.beta)))
    if inv_omega >= 1.0:
        raise InconsistencyRegionError(f"1/omega = {inv_omega} >= 1")
    fg = GriddedFunction(grid, f.pdf(grid.mesh()))
    lhs = lp_norm(GriddedFunction(grid, f.derivative(grid.mesh(), m)), spec.p)
    fp = lp_norm(fg, spec.p)
    if L is None:
        L = nikolskii_check(fg, spec).max_ratio
    rhs = L ** inv_omega * fp ** (1.0 - inv_omega)
    omega = math.inf if inv_omega == 0 else 1.0 / inv_omega
    return KolmogorovResult(lhs, rhs, lhs / rhs if rhs > 0 else math.inf, omega, L)


def scaled_kernel_values(K: ProductKernel, h, grid: UniformGrid) -> GriddedFunction:
    """``K_h`` at the nodes of ``grid`` (handy for risk stubs and examples)."""
    return GriddedFunction(grid, eval_scaled(K, h, grid.mesh()))
