"""Pure numpy/Python implementation of the hot kernels.

This mirrors ``_kernels.pyx`` line for line so the two backends can be
compared directly.  Regime codes returned by :func:`ml_core` are

    0  power series
    1  inverse-power asymptotic expansion
    3  integral representation (graded Gauss-Legendre)
   -1  overflow (positive argument whose value is not representable)
"""

import math

import numpy as np
from numpy.polynomial.legendre import leggauss

# switch points in the variable x**(1/beta) for E_beta(-x)
SERIES_MAX = 4.0
ASYM_MIN = 40.0
# safety factor applied to the envelope bound of the asymptotic remainder
ASYM_SAFETY = 8.0
# log of the largest finite double
LOG_MAX = 709.0

_XH, _WH = leggauss(20)
_XL, _WL = leggauss(16)
GL_HI = (_XH, _WH)
GL_LO = (_XL, _WL)

REGIME_SERIES = 0
REGIME_ASYMPTOTIC = 1
REGIME_IDENTITY = 2
REGIME_INTEGRAL = 3
REGIME_OVERFLOW = -1


def ml_series(beta, z, max_terms=200000):
    """Power series for E_beta(z) evaluated in log space.

    Returns (value, terms_used, est_error).  For z > 0 the largest term
    is checked against the double range; on overflow the value is +inf.
    """
    if z == 0.0:
        return 1.0, 1, 0.0
    lz = math.log(abs(z))
    neg = z < 0.0
    s = 0.0
    comp = 0.0
    abs_sum = 0.0
    prev_lt = -math.inf
    k = 0
    last = 0.0
    while k < max_terms:
        lg = math.lgamma(beta * k + 1.0)
        lt = k * lz - lg
        if lt > LOG_MAX:
            return math.inf, k, math.inf
        t = math.exp(lt)
        if neg and (k & 1):
            t = -t
        # Kahan compensated summation
        y = t - comp
        tmp = s + y
        comp = (tmp - s) - y
        s = tmp
        # exp of a log-space term inherits the absolute error of its exponent
        abs_sum += abs(t) * (2.0 + abs(k * lz) + abs(lg))
        k += 1
        if lt < prev_lt and lt < math.log(1e-17 * abs(s) + 1e-300):
            last = math.exp(lt)
            break
        prev_lt = lt
    est = 2.0 * last + 2.3e-16 * abs_sum
    return s, k, est


def _panel_edges(beta, x):
    c = math.cos(beta * math.pi)
    s = math.sin(beta * math.pi)
    wend = 42.0 ** beta
    if c < 0.0:
        c0 = -x * c
        d = x * s
    else:
        c0 = 0.0
        d = x
    left = []
    for k in range(60, -5, -1):
        p = c0 - d * 2.0 ** k
        if 0.0 < p < wend:
            left.append(p)
    right = []
    for k in range(-4, 61):
        p = c0 + d * 2.0 ** k
        if 0.0 < p < wend:
            right.append(p)
    mid = [c0] if 0.0 < c0 < wend else []
    core = left + mid + right
    lo = core[0] if core else 0.5 * wend
    grade = [lo * 2.0 ** (-k) for k in range(39, 0, -1)]
    edges = [0.0] + grade + (core if core else [lo]) + [wend]
    out = [edges[0]]
    for e in edges[1:]:
        if e > out[-1] * (1.0 + 1e-14):
            out.append(e)
    return np.asarray(out)


def ml_integral(beta, x):
    """E_beta(-x), 0 < beta < 1, x > 0, from the real integral representation

    E_beta(-x) = sin(beta pi)/(beta pi) * int_0^inf x exp(-w^(1/beta))
                 / (w^2 + 2 w x cos(beta pi) + x^2) dw

    Panels are graded towards the Lorentzian peak and towards w=0 where the
    integrand has an algebraic endpoint singularity in its derivatives.
    Returns (value, panels, est_error) with the error estimated from a
    second, lower order rule on the same panels.
    """
    c = math.cos(beta * math.pi)
    sb = math.sin(beta * math.pi)
    edges = _panel_edges(beta, x)
    a = edges[:-1, None]
    b = edges[1:, None]
    h = 0.5 * (b - a)
    m = 0.5 * (a + b)
    inv = 1.0 / beta

    xc = x * c
    xs2 = (x * sb) ** 2

    def f(w):
        # (w + x cos)^2 + (x sin)^2 avoids cancellation when sin is small
        return x * np.exp(-w ** inv) / ((w + xc) ** 2 + xs2)

    ihi = float(np.sum(h * GL_HI[1] * f(m + h * GL_HI[0])))
    ilo = float(np.sum(h * GL_LO[1] * f(m + h * GL_LO[0])))
    pref = sb / (beta * math.pi)
    val = pref * ihi
    est = pref * abs(ihi - ilo) + 4e-16 * abs(val)
    return val, len(edges) - 1, est


def ml_asymptotic(beta, x, max_terms=100000):
    """Inverse-power expansion of E_beta(-x) truncated at the smallest term.

    Uses 1/Gamma(1 - beta k) = Gamma(beta k) sin(pi beta k) / pi so that the
    envelope exp(lgamma(beta k) - k log x)/pi bounds every term.  The
    remainder estimate is the first omitted envelope times a safety factor
    plus a rounding term.
    """
    lx = math.log(x)
    s = 0.0
    abs_sum = 0.0
    k = 1
    le_k = math.lgamma(beta) - lx
    while k < max_terms:
        le_next = math.lgamma(beta * (k + 1)) - (k + 1) * lx
        t = math.exp(le_k) * math.sin(math.pi * beta * k) / math.pi
        if not (k & 1):
            t = -t
        s += t
        abs_sum += abs(t)
        if le_next >= le_k or math.exp(le_next) < 1e-18 * abs(s):
            break
        le_k = le_next
        k += 1
    est = ASYM_SAFETY * math.exp(le_next) / math.pi + 4e-16 * abs_sum
    return s, k, est


def ml_scalar(beta, z):
    """General-path E_beta(z) with automatic regime choice (0 < beta <= 1)."""
    if z >= 0.0:
        val, terms, est = ml_series(beta, z)
        code = REGIME_OVERFLOW if math.isinf(val) else REGIME_SERIES
        return val, code, terms, est
    if beta == 1.0:
        # the integral and asymptotic forms degenerate; exp is exact
        return math.exp(z), REGIME_IDENTITY, 0, 0.0
    x = -z
    r = x ** (1.0 / beta)
    if r <= SERIES_MAX:
        val, terms, est = ml_series(beta, z)
        return val, REGIME_SERIES, terms, est
    if r >= ASYM_MIN:
        val, terms, est = ml_asymptotic(beta, x)
        if est <= 1e-11 * max(abs(val), 1e-300):
            return val, REGIME_ASYMPTOTIC, terms, est
    val, terms, est = ml_integral(beta, x)
    return val, REGIME_INTEGRAL, terms, est


def ml_core(beta, z):
    """Vectorised general path; returns (values, regimes, terms, est)."""
    z = np.ascontiguousarray(z, dtype=np.float64).ravel()
    out = np.empty(z.size)
    reg = np.empty(z.size, dtype=np.int32)
    terms = np.empty(z.size, dtype=np.int64)
    est = np.empty(z.size)
    for i in range(z.size):
        out[i], reg[i], terms[i], est[i] = ml_scalar(beta, float(z[i]))
    return out, reg, terms, est


def hermite_table(sigma_max, u):
    """Normalised probabilists' Hermite values H_s(u)/sqrt(s!) for s=0..sigma_max."""
    u = np.ascontiguousarray(u, dtype=np.float64).ravel()
    tab = np.empty((sigma_max + 1, u.size))
    tab[0] = 1.0
    if sigma_max >= 1:
        tab[1] = u
    for s in range(1, sigma_max):
        tab[s + 1] = (u * tab[s] - math.sqrt(s) * tab[s - 1]) * (1.0 / math.sqrt(s + 1.0))
    return tab
