"""Strict JSON experiment configuration.

Top-level keys (all optional except ``problem``)::

    problem           "density" | "deconvolution" | "derivative"
    dim               dimension d (default 1)
    model             {"density": {...}, "noise": {...} | null, "alpha": float}
    kernel            {"family": "order_s" | "band_limited", "s": int, "base": "gaussian" | "bump"}
    grid_mode         "full" | "isotropic"
    derivative_order  list of d nonnegative integers (derivative problem)
    p, q              loss and risk exponents (q defaults to p)
    c_scale           multiplier of the majorant constants
    d_factor          upper envelope constant for p > 2, relative to the lower one
    sample_sizes      strictly increasing list of n
    replications      Monte Carlo replications per n
    seed              unsigned 64-bit master seed
    box               {"lower": [...], "upper": [...]}
    resolution        grid spacing as a fraction of the smallest candidate bandwidth
    method            "binned-fft" | "direct"
    grid_m            effective sample size for the candidate grid (overrides n // 2)
    slope_tolerance   allowed |fitted - theoretical| slope difference
    smoothness        {"beta": [...], "L": float, "mu": float, "k": [...]}
    data              path of a sample CSV used by ``select`` instead of simulated data
    output            default output directory

Density forms: ``gaussian_mixture`` (weights, means, scales), ``laplace`` (loc, scale),
``variance_gamma`` (shape, scale) and ``gridded`` (path to a gridded CSV).
Noise families: ``gaussian`` (sigma), ``laplace`` (b), ``gamma`` (k, theta, centered).
"""
from __future__ import annotations

import copy
import hashlib
import json
import os
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, PairselError
from .experiments import PipelineSpec
from .kernels import ProductKernel
from .models import (GaussianMixture, GriddedDensity, NoiseSpec, ProductLaplace, VarianceGamma,
                     check_well_posedness)
from .numerics import read_gridded_csv
from .selector import Problem

TOP_KEYS = {
    "problem", "dim", "model", "kernel", "grid_mode", "derivative_order", "p", "q", "c_scale", "d_factor",
    "sample_sizes", "replications", "seed", "box", "resolution", "method", "grid_m", "slope_tolerance",
    "smoothness", "data", "output",
}
MODEL_KEYS = {"density", "noise", "alpha"}
KERNEL_KEYS = {"family", "s", "base"}
BOX_KEYS = {"lower", "upper"}
SMOOTH_KEYS = {"beta", "L", "mu", "k"}
DENSITY_KEYS = {
    "gaussian_mixture": {"weights", "means", "scales"},
    "laplace": {"loc", "scale"},
    "variance_gamma": {"shape", "scale"},
    "gridded": {"path"},
}

DEFAULTS = {
    "dim": 1,
    "grid_mode": "full",
    "p": 2.0,
    "c_scale": 1.0,
    "d_factor": 4.0,
    "sample_sizes": [1024, 4096, 16384, 65536],
    "replications": 100,
    "seed": 1,
    "resolution": 0.5,
    "method": "binned-fft",
    "slope_tolerance": 0.08,
}


def _strict(section: dict, allowed: set, where: str) -> None:
    if not isinstance(section, dict):
        raise ConfigError(f"{where} must be a JSON object")
    unknown = sorted(set(section) - allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(unknown)}")


@dataclass
class ExperimentConfig:
    raw: dict
    spec: PipelineSpec
    q: float
    sample_sizes: tuple
    replications: int
    seed: int
    slope_tolerance: float
    smoothness: dict
    data: str | None
    output: str | None
    base_dir: str

    @property
    def c_scale(self) -> float:
        return self.spec.c_scale

    @property
    def p(self) -> float:
        return self.spec.p

    def config_hash(self) -> str:
        text = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    def header(self) -> list[str]:
        return [f"# config_hash: {self.config_hash()}", f"# c_scale: {self.c_scale!r}"]


def load_config(path: str, seed: int | None = None) -> ExperimentConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return parse_config(raw, seed=seed, base_dir=os.path.dirname(os.path.abspath(path)))


def _density(section: dict, dim: int, base_dir: str):
    if not isinstance(section, dict) or "form" not in section:
        raise ConfigError("model.density needs a 'form'")
    form = section["form"]
    if form not in DENSITY_KEYS:
        raise ConfigError(f"unknown density form {form!r}")
    _strict(section, DENSITY_KEYS[form] | {"form"}, f"model.density ({form})")
    if form == "gaussian_mixture":
        w = section.get("weights", [1.0])
        means = section.get("means", [[0.0] * dim for _ in w])
        scales = section.get("scales", [[1.0] * dim for _ in w])
        f = GaussianMixture(tuple(w), tuple(map(tuple, np.atleast_2d(means))), tuple(map(tuple, np.atleast_2d(scales))))
    elif form == "laplace":
        f = ProductLaplace(tuple(section.get("loc", [0.0] * dim)), tuple(section.get("scale", [1.0] * dim)))
    elif form == "variance_gamma":
        f = VarianceGamma(float(section.get("shape", 1.25)), float(section.get("scale", 1.0)), dim)
    else:
        f = GriddedDensity(read_gridded_csv(os.path.join(base_dir, section["path"])))
    if f.dim != dim:
        raise ConfigError(f"density dimension {f.dim} differs from dim = {dim}")
    return f


def _noise(section, dim: int):
    if section is None:
        return None
    if not isinstance(section, dict) or "family" not in section:
        raise ConfigError("model.noise needs a 'family'")
    params = {k: v for k, v in section.items() if k != "family"}
    return NoiseSpec(section["family"], params, dim)


def parse_config(raw: dict, seed: int | None = None, base_dir: str = ".") -> ExperimentConfig:
    """Validate a config mapping and build the pipeline description."""
    raw = copy.deepcopy(raw)
    _strict(raw, TOP_KEYS, "config")
    if "problem" not in raw:
        raise ConfigError("config needs a 'problem'")
    if seed is not None:
        raw["seed"] = int(seed)
    cfg = {**DEFAULTS, **raw}
    try:
        dim = int(cfg["dim"])
        if dim < 1:
            raise ConfigError("dim must be >= 1")
        model = cfg.get("model", {"density": {"form": "gaussian_mixture"}})
        _strict(model, MODEL_KEYS, "model")
        density = _density(model.get("density", {"form": "gaussian_mixture"}), dim, base_dir)
        noise = _noise(model.get("noise"), dim)
        alpha = float(model.get("alpha", 0.0))
        if not 0.0 <= alpha <= 1.0:
            raise ConfigError("model.alpha must lie in [0, 1]")
        if alpha > 0 and noise is None:
            raise ConfigError("model.alpha > 0 needs model.noise")

        problem_kind = cfg["problem"]
        default_family = "band_limited" if problem_kind == "deconvolution" else "order_s"
        ksec = cfg.get("kernel", {"family": default_family})
        _strict(ksec, KERNEL_KEYS, "kernel")
        family = ksec.get("family", default_family)
        if family == "order_s":
            kernel = ProductKernel.order_s(dim, int(ksec.get("s", 2)), ksec.get("base", "gaussian"))
        elif family == "band_limited":
            if set(ksec) - {"family"}:
                raise ConfigError("band-limited kernels take no parameters")
            kernel = ProductKernel.band_limited(dim)
        else:
            raise ConfigError(f"unknown kernel family {family!r}")

        m = cfg.get("derivative_order")
        if problem_kind == "derivative":
            if m is None:
                raise ConfigError("the derivative problem needs derivative_order")
            m = tuple(int(v) for v in np.atleast_1d(m))
            if len(m) != dim or any(v < 0 for v in m):
                raise ConfigError(f"derivative_order must list {dim} nonnegative integers")
            if family != "order_s":
                raise ConfigError("the derivative problem needs an order-s kernel")
            if len(set(m)) > 1 and cfg["grid_mode"] != "isotropic":
                raise ConfigError("derivative orders with unequal components need grid_mode = 'isotropic'")
        elif m is not None:
            raise ConfigError("derivative_order is only valid for the derivative problem")
        if problem_kind == "deconvolution":
            if family != "band_limited":
                raise ConfigError("the deconvolution problem needs a band-limited kernel")
            if alpha > 0:
                rep = check_well_posedness(noise, alpha)
                if not rep.satisfied:
                    raise ConfigError(f"noise law violates the well-posedness assumption: {rep.message}")
        problem = Problem(problem_kind, noise, alpha, m)

        box = cfg.get("box", {"lower": [-8.0] * dim, "upper": [8.0] * dim})
        _strict(box, BOX_KEYS, "box")
        lower = tuple(float(v) for v in np.atleast_1d(box.get("lower", [-8.0] * dim)))
        upper = tuple(float(v) for v in np.atleast_1d(box.get("upper", [8.0] * dim)))

        smooth = cfg.get("smoothness", {})
        _strict(smooth, SMOOTH_KEYS, "smoothness")

        sizes = tuple(int(n) for n in cfg["sample_sizes"])
        if not sizes or any(b <= a for a, b in zip(sizes, sizes[1:])):
            raise ConfigError("sample_sizes must be a strictly increasing nonempty list")
        reps = int(cfg["replications"])
        if reps < 1:
            raise ConfigError("replications must be >= 1")
        seed_val = int(cfg["seed"])
        if not 0 <= seed_val < 2 ** 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        p = float(cfg["p"])
        q = float(cfg.get("q", p))
        if p < 1 or q < 1:
            raise ConfigError("p and q must be >= 1")
        if cfg["method"] not in ("binned-fft", "direct"):
            raise ConfigError(f"unknown method {cfg['method']!r}")
        if cfg["grid_mode"] not in ("full", "isotropic"):
            raise ConfigError(f"unknown grid_mode {cfg['grid_mode']!r}")
        grid_m = cfg.get("grid_m")
        spec = PipelineSpec(problem, density, kernel, noise, alpha, cfg["grid_mode"], p, float(cfg["c_scale"]),
                            float(cfg["d_factor"]), (lower, upper), float(cfg["resolution"]), cfg["method"],
                            None if grid_m is None else int(grid_m))
    except ConfigError:
        raise
    except (PairselError, TypeError, KeyError) as exc:
        raise ConfigError(str(exc)) from exc
    return ExperimentConfig(raw, spec, q, sizes, reps, seed_val, float(cfg["slope_tolerance"]), smooth,
                            cfg.get("data"), cfg.get("output"), base_dir)
