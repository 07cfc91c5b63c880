# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: Mittag-Leffler evaluation on arrays and Hermite tables.

Same algorithms and regime codes as ``_kernels_py``.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport lgamma, exp, log, sin, cos, pow, fabs, sqrt, INFINITY, M_PI

from numpy.polynomial.legendre import leggauss

cnp.import_array()

cdef double SERIES_MAX = 4.0
cdef double ASYM_MIN = 40.0
cdef double ASYM_SAFETY = 8.0
cdef double LOG_MAX = 709.0

cdef double XH[20]
cdef double WH[20]
cdef double XL[16]
cdef double WL[16]

_xh, _wh = leggauss(20)
_xl, _wl = leggauss(16)
for _i in range(20):
    XH[_i] = _xh[_i]
    WH[_i] = _wh[_i]
for _i in range(16):
    XL[_i] = _xl[_i]
    WL[_i] = _wl[_i]

cdef enum:
    MAX_EDGES = 256


cdef void _series(double beta, double z, double* val, long* terms, double* est) noexcept nogil:
    cdef double lz, s = 0.0, comp = 0.0, abs_sum = 0.0, prev_lt = -INFINITY
    cdef double lt, lg, t, y, tmp, last = 0.0
    cdef long k = 0
    cdef bint neg
    if z == 0.0:
        val[0] = 1.0
        terms[0] = 1
        est[0] = 0.0
        return
    lz = log(fabs(z))
    neg = z < 0.0
    while k < 200000:
        lg = lgamma(beta * k + 1.0)
        lt = k * lz - lg
        if lt > LOG_MAX:
            val[0] = INFINITY
            terms[0] = k
            est[0] = INFINITY
            return
        t = exp(lt)
        if neg and (k & 1):
            t = -t
        y = t - comp
        tmp = s + y
        comp = (tmp - s) - y
        s = tmp
        abs_sum += fabs(t) * (2.0 + fabs(k * lz) + fabs(lg))
        k += 1
        if lt < prev_lt and lt < log(1e-17 * fabs(s) + 1e-300):
            last = exp(lt)
            break
        prev_lt = lt
    val[0] = s
    terms[0] = k
    est[0] = 2.0 * last + 2.3e-16 * abs_sum


cdef int _edges(double beta, double x, double* out) noexcept nogil:
    cdef double c = cos(beta * M_PI), sb = sin(beta * M_PI)
    cdef double wend = pow(42.0, beta)
    cdef double c0, d, p, lo
    cdef double buf[MAX_EDGES]
    cdef int nb = 0, k, n, i
    if c < 0.0:
        c0 = -x * c
        d = x * sb
    else:
        c0 = 0.0
        d = x
    # core points: left of the peak ascending, the peak, right ascending
    for k in range(60, -5, -1):
        p = c0 - d * pow(2.0, k)
        if 0.0 < p < wend:
            buf[nb] = p
            nb += 1
    if 0.0 < c0 < wend:
        buf[nb] = c0
        nb += 1
    for k in range(-4, 61):
        p = c0 + d * pow(2.0, k)
        if 0.0 < p < wend:
            buf[nb] = p
            nb += 1
    if nb > 0:
        lo = buf[0]
    else:
        lo = 0.5 * wend
        buf[0] = lo
        nb = 1
    n = 0
    out[n] = 0.0
    n += 1
    for k in range(39, 0, -1):
        p = lo * pow(2.0, -k)
        if p > out[n - 1] * (1.0 + 1e-14):
            out[n] = p
            n += 1
    for i in range(nb):
        if buf[i] > out[n - 1] * (1.0 + 1e-14):
            out[n] = buf[i]
            n += 1
    if wend > out[n - 1] * (1.0 + 1e-14):
        out[n] = wend
        n += 1
    return n


cdef void _integral(double beta, double x, double* val, long* terms, double* est) noexcept nogil:
    cdef double edges[MAX_EDGES]
    cdef int ne = _edges(beta, x, edges)
    cdef double c = cos(beta * M_PI), sb = sin(beta * M_PI)
    cdef double xc = x * c, xs2 = (x * sb) * (x * sb), inv = 1.0 / beta
    cdef double ihi = 0.0, ilo = 0.0, h, m, w, pref
    cdef int i, j
    for i in range(ne - 1):
        h = 0.5 * (edges[i + 1] - edges[i])
        m = 0.5 * (edges[i + 1] + edges[i])
        for j in range(20):
            w = m + h * XH[j]
            ihi += h * WH[j] * x * exp(-pow(w, inv)) / ((w + xc) * (w + xc) + xs2)
        for j in range(16):
            w = m + h * XL[j]
            ilo += h * WL[j] * x * exp(-pow(w, inv)) / ((w + xc) * (w + xc) + xs2)
    pref = sb / (beta * M_PI)
    val[0] = pref * ihi
    terms[0] = ne - 1
    est[0] = pref * fabs(ihi - ilo) + 4e-16 * fabs(val[0])


cdef void _asymptotic(double beta, double x, double* val, long* terms, double* est) noexcept nogil:
    cdef double lx = log(x), s = 0.0, abs_sum = 0.0, t
    cdef double le_k = lgamma(beta) - lx, le_next = le_k
    cdef long k = 1
    while k < 100000:
        le_next = lgamma(beta * (k + 1)) - (k + 1) * lx
        t = exp(le_k) * sin(M_PI * beta * k) / M_PI
        if not (k & 1):
            t = -t
        s += t
        abs_sum += fabs(t)
        if le_next >= le_k or exp(le_next) < 1e-18 * fabs(s):
            break
        le_k = le_next
        k += 1
    val[0] = s
    terms[0] = k
    est[0] = ASYM_SAFETY * exp(le_next) / M_PI + 4e-16 * abs_sum


cdef int _scalar(double beta, double z, double* val, long* terms, double* est) noexcept nogil:
    cdef double x, r
    if z >= 0.0:
        _series(beta, z, val, terms, est)
        if val[0] == INFINITY:
            return -1
        return 0
    if beta == 1.0:
        val[0] = exp(z)
        terms[0] = 0
        est[0] = 0.0
        return 2
    x = -z
    r = pow(x, 1.0 / beta)
    if r <= SERIES_MAX:
        _series(beta, z, val, terms, est)
        return 0
    if r >= ASYM_MIN:
        _asymptotic(beta, x, val, terms, est)
        if est[0] <= 1e-11 * (fabs(val[0]) if fabs(val[0]) > 1e-300 else 1e-300):
            return 1
    _integral(beta, x, val, terms, est)
    return 3


def ml_series(double beta, double z):
    cdef double v, e
    cdef long n
    _series(beta, z, &v, &n, &e)
    return v, n, e


def ml_integral(double beta, double x):
    cdef double v, e
    cdef long n
    _integral(beta, x, &v, &n, &e)
    return v, n, e


def ml_asymptotic(double beta, double x):
    cdef double v, e
    cdef long n
    _asymptotic(beta, x, &v, &n, &e)
    return v, n, e


def ml_scalar(double beta, double z):
    cdef double v, e
    cdef long n
    cdef int code = _scalar(beta, z, &v, &n, &e)
    return v, code, n, e


def ml_core(double beta, z):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] zz = np.ascontiguousarray(z, dtype=np.float64).ravel()
    cdef Py_ssize_t n = zz.shape[0], i
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n)
    cdef cnp.ndarray[cnp.int32_t, ndim=1] reg = np.empty(n, dtype=np.int32)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] terms = np.empty(n, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] est = np.empty(n)
    cdef double v, e
    cdef long nt
    with nogil:
        for i in range(n):
            reg[i] = _scalar(beta, zz[i], &v, &nt, &e)
            out[i] = v
            terms[i] = nt
            est[i] = e
    return out, reg, terms, est


def hermite_table(int sigma_max, u):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] uu = np.ascontiguousarray(u, dtype=np.float64).ravel()
    cdef Py_ssize_t n = uu.shape[0], i
    cdef cnp.ndarray[cnp.float64_t, ndim=2] tab = np.empty((sigma_max + 1, n))
    cdef int s
    cdef double a, b
    with nogil:
        for i in range(n):
            tab[0, i] = 1.0
            if sigma_max >= 1:
                tab[1, i] = uu[i]
        for s in range(1, sigma_max):
            a = sqrt(<double>s)
            b = 1.0 / sqrt(s + 1.0)
            for i in range(n):
                tab[s + 1, i] = (uu[i] * tab[s, i] - a * tab[s - 1, i]) * b
    return tab
