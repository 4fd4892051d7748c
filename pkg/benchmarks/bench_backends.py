"""Time the compiled core against the numpy fallback and check that they agree.

    python benchmarks/bench_backends.py [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from pairsel import _backend, _fallback
from pairsel.kernels import ProductKernel


def kernel_sum_args(n_obs, n_eval, base):
    rng = np.random.default_rng(0)
    obs = rng.standard_normal(n_obs)
    nodes = np.linspace(-4.0, 4.0, n_eval)
    if base == _backend.BAND_LIMITED:
        return obs, nodes, np.ones(1), np.array([0.25]), base, 0, np.zeros(1), 0.0
    # order-2 combination of the Gaussian base at bandwidth 2^-4
    return obs, nodes, np.array([2.0, -0.5]), np.array([0.0625, 0.125]), base, 0, np.zeros(1), 0.0


def cases():
    for n_obs, n_eval in ((1000, 1024), (10000, 1024)):
        for name, base in (("gaussian", _backend.GAUSSIAN), ("band-limited", _backend.BAND_LIMITED)):
            args = kernel_sum_args(n_obs, n_eval, base)
            yield f"kernel_sum {name} n={n_obs} grid={n_eval}", lambda impl, a=args: _backend.kernel_sum_1d(*a, impl=impl)
    for n_obs in (10 ** 5, 10 ** 6):
        pts = np.random.default_rng(1).standard_normal((n_obs, 1))
        yield (f"linear_bin 1-d n={n_obs}",
               lambda impl, p=pts: _backend.linear_bin(p, (-8.0,), (2.0 ** -7,), (2049,), impl=impl))
        pts2 = np.random.default_rng(2).standard_normal((n_obs, 2))
        yield (f"linear_bin 2-d n={n_obs}",
               lambda impl, p=pts2: _backend.linear_bin(p, (-8.0, -8.0), (2.0 ** -4,) * 2, (257, 257), impl=impl))


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    if _backend.BACKEND != "compiled":
        raise SystemExit("the compiled core is not available; build it with `pip install -e . --no-build-isolation`")
    compiled = _backend._impl
    print(f"{'case':<44}{'compiled ms':>12}{'fallback ms':>13}{'speedup':>9}{'max rel diff':>14}")
    for label, fn in cases():
        a, b = fn(compiled), fn(_fallback)
        diff = float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300))
        tc = min(timeit.repeat(lambda: fn(compiled), number=1, repeat=args.repeat)) * 1e3
        tf = min(timeit.repeat(lambda: fn(_fallback), number=1, repeat=args.repeat)) * 1e3
        print(f"{label:<44}{tc:>12.2f}{tf:>13.2f}{tf / tc:>9.1f}{diff:>14.1e}")


if __name__ == "__main__":
    main()
