"""Pure numpy versions of the routines in ``_core.pyx``."""
import numpy as np

GAUSSIAN, BUMP, BAND_LIMITED = 0, 1, 2
_CHUNK = 1 << 22


def _band_limited(y):
    a = np.abs(y)
    return 0.75 * np.pi * np.sinc(1.5 * a / np.pi) * np.sinc((np.pi - a) / (2 * np.pi)) / (np.pi + a)


def _base(base, deriv, poly, bump_c, y):
    if base == GAUSSIAN:
        out = np.polynomial.polynomial.polyval(y, poly) * np.exp(-0.5 * y * y) / np.sqrt(2 * np.pi)
        return np.where(np.abs(y) > 40.0, 0.0, out)
    if base == BUMP:
        inside = np.abs(y) < 1.0
        q = np.where(inside, 1.0 - y * y, 1.0)
        out = np.polynomial.polynomial.polyval(y, poly) * bump_c * np.exp(-1.0 / q) / q ** (2 * deriv)
        return np.where(inside, out, 0.0)
    return _band_limited(y)


def _mixture(u, amps, scales, base, deriv, poly, bump_c):
    acc = np.zeros_like(u)
    for a, s in zip(amps, scales):
        acc += a / s ** (1 + deriv) * _base(base, deriv, poly, bump_c, u / s)
    return acc


def kernel_matrix_1d(t, x, amps, scales, base, deriv, poly, bump_c):
    t = np.asarray(t, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    return _mixture(t[:, None] - x[None, :], amps, scales, base, deriv, poly, bump_c)


def kernel_sum_1d(t, x, amps, scales, base, deriv, poly, bump_c):
    t = np.asarray(t, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    out = np.zeros(x.size)
    step = max(1, _CHUNK // max(1, x.size))
    for start in range(0, t.size, step):
        block = kernel_matrix_1d(t[start:start + step], x, amps, scales, base, deriv, poly, bump_c)
        out += block.sum(axis=0)
    return out


def _bin_axis(pos, nodes):
    k = np.floor(pos).astype(np.intp)
    k = np.minimum(k, nodes - 2)
    return k, pos - k


def linear_bin_1d(pts, lower, spacing, nodes):
    pos = (np.asarray(pts, dtype=np.float64) - lower) / spacing
    pos = pos[(pos >= 0.0) & (pos <= nodes - 1)]
    k, w = _bin_axis(pos, nodes)
    out = np.bincount(k, weights=1.0 - w, minlength=nodes)
    out[1:] += np.bincount(k, weights=w, minlength=nodes)[:-1]
    return out.astype(np.float64)


def linear_bin_2d(pts, lower0, lower1, sp0, sp1, n0, n1):
    pts = np.asarray(pts, dtype=np.float64)
    p0 = (pts[:, 0] - lower0) / sp0
    p1 = (pts[:, 1] - lower1) / sp1
    keep = (p0 >= 0) & (p0 <= n0 - 1) & (p1 >= 0) & (p1 <= n1 - 1)
    k0, w0 = _bin_axis(p0[keep], n0)
    k1, w1 = _bin_axis(p1[keep], n1)
    out = np.zeros((n0, n1))
    np.add.at(out, (k0, k1), (1 - w0) * (1 - w1))
    np.add.at(out, (k0 + 1, k1), w0 * (1 - w1))
    np.add.at(out, (k0, k1 + 1), (1 - w0) * w1)
    np.add.at(out, (k0 + 1, k1 + 1), w0 * w1)
    return out
