"""Pick the compiled core when it imports, the numpy fallback otherwise.

Set ``PAIRSEL_PURE_PYTHON=1`` to force the fallback.
"""
import os

import numpy as np

from . import _fallback

if os.environ.get("PAIRSEL_PURE_PYTHON") == "1":
    _impl = _fallback
    BACKEND = "python"
else:
    try:
        from . import _core as _impl
        BACKEND = "compiled"
    except ImportError:
        _impl = _fallback
        BACKEND = "python"

GAUSSIAN, BUMP, BAND_LIMITED = _fallback.GAUSSIAN, _fallback.BUMP, _fallback.BAND_LIMITED


def _f64(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def kernel_sum_1d(t, x, amps, scales, base, deriv, poly, bump_c, impl=None):
    impl = impl or _impl
    return impl.kernel_sum_1d(_f64(t), _f64(x), _f64(amps), _f64(scales), int(base),
                              int(deriv), _f64(poly), float(bump_c))


def kernel_matrix_1d(t, x, amps, scales, base, deriv, poly, bump_c, impl=None):
    impl = impl or _impl
    return impl.kernel_matrix_1d(_f64(t), _f64(x), _f64(amps), _f64(scales), int(base),
                                 int(deriv), _f64(poly), float(bump_c))


def linear_bin(points, lower, spacing, shape, impl=None):
    """Linear binning of ``points`` (n, d) onto a grid of ``shape`` nodes."""
    impl = impl or _impl
    points = _f64(points)
    d = points.shape[1]
    if d == 1:
        return impl.linear_bin_1d(_f64(points[:, 0]), float(lower[0]), float(spacing[0]), int(shape[0]))
    if d == 2:
        return impl.linear_bin_2d(points, float(lower[0]), float(lower[1]), float(spacing[0]),
                                  float(spacing[1]), int(shape[0]), int(shape[1]))
    return _linear_bin_nd(points, lower, spacing, shape)


def _linear_bin_nd(points, lower, spacing, shape):
    shape = tuple(int(s) for s in shape)
    pos = (points - np.asarray(lower)) / np.asarray(spacing)
    keep = np.all((pos >= 0) & (pos <= np.asarray(shape) - 1), axis=1)
    pos = pos[keep]
    k = np.minimum(np.floor(pos).astype(np.intp), np.asarray(shape) - 2)
    w = pos - k
    out = np.zeros(shape)
    d = points.shape[1]
    for corner in range(1 << d):
        bits = [(corner >> j) & 1 for j in range(d)]
        idx = tuple(k[:, j] + bits[j] for j in range(d))
        wt = np.prod([w[:, j] if bits[j] else 1 - w[:, j] for j in range(d)], axis=0)
        np.add.at(out, idx, wt)
    return out
