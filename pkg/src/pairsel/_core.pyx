# cython: language_level=3
"""Compiled hot loops: linear binning and direct kernel summation.

Semantics match ``_fallback`` exactly; ``_backend`` picks one at import.
"""
import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, cos, exp, fabs, floor, sin, M_PI

cnp.import_array()

DEF GAUSSIAN = 0
DEF BUMP = 1
DEF BAND_LIMITED = 2

cdef double INV_SQRT_2PI = 0.3989422804014327


cdef inline double _horner(const double* poly, Py_ssize_t npoly, double y) noexcept nogil:
    cdef Py_ssize_t k = npoly - 1
    cdef double acc = 0.0
    while k >= 0:
        acc = acc * y + poly[k]
        k -= 1
    return acc


cdef inline double _sinc(double z) noexcept nogil:
    if fabs(z) < 1e-12:
        return 1.0
    return sin(M_PI * z) / (M_PI * z)


cdef inline double _band_limited(double y) noexcept nogil:
    cdef double a = fabs(y), sh, ch
    if a < 1e-2 or fabs(a - M_PI) < 1e-2:
        # removable singularities: the product-of-sincs form is exact there
        return 0.75 * M_PI * _sinc(1.5 * a / M_PI) * _sinc((M_PI - a) / (2.0 * M_PI)) / (M_PI + a)
    # pi sin(3a/2) cos(a/2) / (a (pi^2 - a^2)) with one half-angle sine and cosine
    sh = sin(0.5 * a)
    ch = cos(0.5 * a)
    return M_PI * sh * (3.0 - 4.0 * sh * sh) * ch / (a * (M_PI * M_PI - a * a))


cdef struct Terms:
    Py_ssize_t count
    Py_ssize_t npoly
    int base
    int deriv
    double bump_c
    double* coef
    double* scale
    const double* poly


cdef inline double _base(const Terms* k, double y) noexcept nogil:
    cdef double q
    if k.base == GAUSSIAN:
        if fabs(y) > 40.0:
            return 0.0
        return _horner(k.poly, k.npoly, y) * INV_SQRT_2PI * exp(-0.5 * y * y)
    elif k.base == BUMP:
        if fabs(y) >= 1.0:
            return 0.0
        q = 1.0 - y * y
        return _horner(k.poly, k.npoly, y) * k.bump_c * exp(-1.0 / q) / (q ** (2 * k.deriv))
    else:
        return _band_limited(y)


cdef inline double _mixture(const Terms* k, double u) noexcept nogil:
    cdef Py_ssize_t i
    cdef double acc = 0.0
    for i in range(k.count):
        acc += k.coef[i] * _base(k, u / k.scale[i])
    return acc


cdef class _TermBuffer:
    """Owns the per-term coefficients ``amp / scale^(1 + deriv)`` for one call."""
    cdef double[::1] coef
    cdef double[::1] scale
    cdef const double[::1] poly
    cdef Terms terms

    def __cinit__(self, const double[::1] amps, const double[::1] scales, int base, int deriv,
                  const double[::1] poly, double bump_c):
        cdef Py_ssize_t i, n = amps.shape[0]
        self.coef = np.empty(n, dtype=np.float64)
        self.scale = np.array(scales, dtype=np.float64)
        self.poly = poly
        for i in range(n):
            self.coef[i] = amps[i] / (scales[i] ** (1 + deriv))
        self.terms.count = n
        self.terms.npoly = poly.shape[0]
        self.terms.base = base
        self.terms.deriv = deriv
        self.terms.bump_c = bump_c
        self.terms.coef = &self.coef[0] if n else NULL
        self.terms.scale = &self.scale[0] if n else NULL
        self.terms.poly = &self.poly[0] if poly.shape[0] else NULL

    cdef double reach(self):
        """Distance beyond which every term is exactly zero (infinite for band-limited)."""
        cdef Py_ssize_t i
        cdef double widest = 0.0
        if self.terms.base == BAND_LIMITED:
            return INFINITY
        for i in range(self.terms.count):
            widest = max(widest, fabs(self.terms.scale[i]))
        return widest * (40.0 if self.terms.base == GAUSSIAN else 1.0)


cdef inline Py_ssize_t _lower_bound(const double* a, Py_ssize_t n, double v) noexcept nogil:
    cdef Py_ssize_t lo = 0, hi = n, mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if a[mid] < v:
            lo = mid + 1
        else:
            hi = mid
    return lo


cdef inline Py_ssize_t _upper_bound(const double* a, Py_ssize_t n, double v) noexcept nogil:
    cdef Py_ssize_t lo = 0, hi = n, mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if a[mid] <= v:
            lo = mid + 1
        else:
            hi = mid
    return lo


def kernel_sum_1d(const double[:] t, const double[:] x, const double[::1] amps,
                  const double[::1] scales, int base, int deriv, const double[::1] poly,
                  double bump_c):
    """out[j] = sum_i k(t[i] - x[j]) for the term-mixture kernel k."""
    cdef _TermBuffer buf = _TermBuffer(amps, scales, base, deriv, poly, bump_c)
    cdef const Terms* k = &buf.terms
    cdef double reach = buf.reach()
    cdef Py_ssize_t n = t.shape[0], m = x.shape[0], i, j, lo, hi
    out_arr = np.zeros(m, dtype=np.float64)
    cdef double[::1] out = out_arr
    # terms vanish exactly outside the reach, so only a sorted window is visited
    cdef double[::1] ts = np.sort(np.asarray(t))
    cdef const double* tp = &ts[0] if n else NULL
    cdef double acc, xj
    with nogil:
        for j in range(m):
            xj = x[j]
            if reach == INFINITY:
                lo, hi = 0, n
            else:
                lo = _lower_bound(tp, n, xj - reach)
                hi = _upper_bound(tp, n, xj + reach)
            acc = 0.0
            for i in range(lo, hi):
                acc += _mixture(k, tp[i] - xj)
            out[j] = acc
    return out_arr


def kernel_matrix_1d(const double[:] t, const double[:] x, const double[::1] amps,
                     const double[::1] scales, int base, int deriv, const double[::1] poly,
                     double bump_c):
    """out[i, j] = k(t[i] - x[j])."""
    cdef _TermBuffer buf = _TermBuffer(amps, scales, base, deriv, poly, bump_c)
    cdef const Terms* k = &buf.terms
    cdef Py_ssize_t n = t.shape[0], m = x.shape[0], i, j
    out_arr = np.empty((n, m), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    with nogil:
        for i in range(n):
            for j in range(m):
                out[i, j] = _mixture(k, t[i] - x[j])
    return out_arr


def linear_bin_1d(const double[:] pts, double lower, double spacing, Py_ssize_t nodes):
    """Split unit mass of each point between its two neighbouring nodes."""
    out_arr = np.zeros(nodes, dtype=np.float64)
    cdef double[:] out = out_arr
    cdef Py_ssize_t i, k
    cdef double pos, w
    with nogil:
        for i in range(pts.shape[0]):
            pos = (pts[i] - lower) / spacing
            if pos < 0.0 or pos > nodes - 1:
                continue
            k = <Py_ssize_t>floor(pos)
            if k >= nodes - 1:
                k = nodes - 2
            w = pos - k
            out[k] += 1.0 - w
            out[k + 1] += w
    return out_arr


def linear_bin_2d(const double[:, :] pts, double lower0, double lower1, double sp0,
                  double sp1, Py_ssize_t n0, Py_ssize_t n1):
    out_arr = np.zeros((n0, n1), dtype=np.float64)
    cdef double[:, :] out = out_arr
    cdef Py_ssize_t i, k0, k1
    cdef double p0, p1, w0, w1
    with nogil:
        for i in range(pts.shape[0]):
            p0 = (pts[i, 0] - lower0) / sp0
            p1 = (pts[i, 1] - lower1) / sp1
            if p0 < 0.0 or p0 > n0 - 1 or p1 < 0.0 or p1 > n1 - 1:
                continue
            k0 = <Py_ssize_t>floor(p0)
            k1 = <Py_ssize_t>floor(p1)
            if k0 >= n0 - 1:
                k0 = n0 - 2
            if k1 >= n1 - 1:
                k1 = n1 - 2
            w0 = p0 - k0
            w1 = p1 - k1
            out[k0, k1] += (1.0 - w0) * (1.0 - w1)
            out[k0 + 1, k1] += w0 * (1.0 - w1)
            out[k0, k1 + 1] += (1.0 - w0) * w1
            out[k0 + 1, k1 + 1] += w0 * w1
    return out_arr
