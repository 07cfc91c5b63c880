"""Hermite polynomials, Hermite coefficients of subordinating functions and
Hermite rank."""

from dataclasses import dataclass, field
import math
from typing import Optional

import numpy as np
from scipy import special

from . import kernels
from .specfun import DomainError

SIGMA_CAP = 60
_MIN_NODES = 64
_MAX_NODES = 4096
_P0 = 1.0 / math.sqrt(2.0 * math.pi)


class DegenerateSubordinatorError(ValueError):
    """All Hermite coefficients beyond the constant vanish."""


def hermite_poly(sigma, u):
    """Probabilists' Hermite polynomial H_sigma(u) by the three-term recurrence."""
    sigma = int(sigma)
    if sigma < 0:
        raise DomainError("sigma must be non-negative")
    if sigma > SIGMA_CAP:
        raise DomainError(f"sigma={sigma} exceeds the stability cap {SIGMA_CAP}")
    u = np.asarray(u, dtype=np.float64)
    h_prev = np.ones_like(u)
    if sigma == 0:
        return h_prev if u.ndim else float(h_prev)
    h = u.copy()
    for s in range(1, sigma):
        h_prev, h = h, u * h - s * h_prev
    return h if u.ndim else float(h)


def _gh_rule(nodes):
    # roots_hermitenorm integrates against exp(-u^2/2); normalise to p(u)
    x, w = special.roots_hermitenorm(nodes)
    return x, w / math.sqrt(2.0 * math.pi)


def _quad_coeffs(func, sigma_max, nodes):
    x, w = _gh_rule(nodes)
    vals = np.asarray(func(x), dtype=np.float64)
    if not np.all(np.isfinite(vals)):
        raise DomainError("h is not finite on the quadrature nodes")
    tab = kernels.hermite_table(sigma_max, x)
    return tab @ (w * vals)


def _panel_coeffs(func, sigma_max, breakpoints, order):
    # Gauss-Legendre on unit panels over [-38, 38], split at the breakpoints of h
    edges = np.union1d(np.arange(-38.0, 38.5, 1.0), np.asarray(breakpoints, dtype=float))
    edges = edges[(edges >= -38.0) & (edges <= 38.0)]
    xg, wg = np.polynomial.legendre.leggauss(order)
    h = 0.5 * np.diff(edges)
    m = 0.5 * (edges[1:] + edges[:-1])
    x = (m[:, None] + h[:, None] * xg).ravel()
    w = (h[:, None] * wg).ravel() * _P0 * np.exp(-0.5 * x * x)
    vals = np.asarray(func(x), dtype=np.float64)
    if not np.all(np.isfinite(vals)):
        raise DomainError("h is not finite on the quadrature nodes")
    return kernels.hermite_table(sigma_max, x) @ (w * vals)


def sign_coeffs(sigma_max):
    """Closed-form Hermite coefficients of sign(u).

    C_{2k+1} = 2 H_{2k}(0) p(0) / sqrt((2k+1)!), even coefficients vanish.
    Computed through the ratio recurrence to stay in range.
    """
    c = np.zeros(sigma_max + 1)
    if sigma_max < 1:
        return c
    # k=0: 2 p(0) = sqrt(2/pi)
    val = 2.0 * _P0
    c[1] = val
    k = 1
    while 2 * k + 1 <= sigma_max:
        # H_{2k}(0) = -(2k-1) H_{2k-2}(0); divide by sqrt((2k)(2k+1))
        val *= -(2 * k - 1) / math.sqrt((2 * k) * (2 * k + 1))
        c[2 * k + 1] = val
        k += 1
    return c


def hermite_coeffs(h, sigma_max, tol=None, return_nodes=False, breakpoints=None):
    """Coefficients C_sigma = E[h(Z) H_sigma(Z)] / sqrt(sigma!) for sigma=0..sigma_max.

    ``h`` is a callable or a :class:`Subordinator`.  Smooth h use
    Gauss-Hermite quadrature, doubling the node count from 64 until no
    coefficient moves by more than ``tol`` (1e-9 by default) or 4096 nodes.
    If ``breakpoints`` (jumps or kinks of h) are given, Gauss-Legendre panels
    split at those points replace Gauss-Hermite, which converges only
    algebraically across a jump; the default tolerance is then 1e-6.
    """
    sigma_max = int(sigma_max)
    if isinstance(h, Subordinator):
        if h.kind == "sign":
            c = sign_coeffs(sigma_max)
            return (c, None) if return_nodes else c
        if h.kind == "table":
            breakpoints = h.table_u
        func = h.evaluate
    else:
        func = h
    piecewise = breakpoints is not None
    if tol is None:
        tol = 1e-6 if piecewise else 1e-9

    def rule(nodes):
        if piecewise:
            return _panel_coeffs(func, sigma_max, breakpoints, nodes // 8)
        return _quad_coeffs(func, sigma_max, nodes)

    nodes = _MIN_NODES
    prev = rule(nodes)
    while True:
        nodes *= 2
        if nodes > _MAX_NODES:
            raise DomainError(
                "Hermite coefficients did not stabilise within 4096 nodes; "
                "h may not be square integrable"
            )
        cur = rule(nodes)
        if np.max(np.abs(cur - prev)) <= tol:
            return (cur, nodes) if return_nodes else cur
        prev = cur


def hermite_rank(coeffs, tol=1e-8):
    """Smallest sigma >= 1 with |C_sigma| > tol."""
    c = np.asarray(coeffs)
    idx = np.nonzero(np.abs(c[1:]) > tol)[0]
    if idx.size == 0:
        raise DegenerateSubordinatorError(
            "h has no non-constant Hermite component (h(Z) is a.s. constant)"
        )
    return int(idx[0]) + 1


@dataclass
class Subordinator:
    """Non-linear map h applied pointwise to a standard Gaussian field.

    kind is one of ``identity``, ``pure_hermite`` (h = H_m/sqrt(m!)),
    ``sign`` or ``table`` (piecewise-linear interpolation of sample points).
    """

    kind: str = "identity"
    order: int = 1
    table_u: Optional[np.ndarray] = None
    table_h: Optional[np.ndarray] = None
    sigma_max: int = 41
    coeffs: np.ndarray = field(init=False, repr=False)
    rank: int = field(init=False)
    l2_norm: float = field(init=False)

    def __post_init__(self):
        if self.kind not in ("identity", "pure_hermite", "sign", "table"):
            raise DomainError(f"unknown subordinator kind {self.kind!r}")
        if self.kind == "pure_hermite" and not (1 <= self.order <= SIGMA_CAP):
            raise DomainError("pure_hermite order must be in [1, 60]")
        if self.kind == "table":
            if self.table_u is None or self.table_h is None:
                raise DomainError("table subordinator needs sample points")
            self.table_u = np.asarray(self.table_u, dtype=float)
            self.table_h = np.asarray(self.table_h, dtype=float)
            if np.any(np.diff(self.table_u) <= 0):
                raise DomainError("table abscissae must be increasing")
        if self.kind == "identity":
            c = np.zeros(self.sigma_max + 1)
            c[1] = 1.0
        elif self.kind == "pure_hermite":
            c = np.zeros(max(self.sigma_max, self.order) + 1)
            c[self.order] = 1.0
        else:
            c = hermite_coeffs(self, self.sigma_max)
        self.coeffs = c
        tol = 1e-5 if self.kind in ("table", "sign") else 1e-8
        self.rank = hermite_rank(c, tol)
        self.l2_norm = self._l2_norm()

    def _l2_norm(self):
        if self.kind in ("identity", "pure_hermite", "sign"):
            return 1.0
        c0 = _panel_coeffs(lambda u: self.evaluate(u) ** 2, 0, self.table_u, 64)
        return float(math.sqrt(c0[0]))

    @property
    def C0(self):
        return float(self.coeffs[0])

    @property
    def Cm(self):
        """Leading coefficient C_m at the Hermite rank."""
        return float(self.coeffs[self.rank])

    def evaluate(self, u):
        u = np.asarray(u, dtype=np.float64)
        if self.kind == "identity":
            return u
        if self.kind == "pure_hermite":
            return hermite_poly(self.order, u) / math.sqrt(math.factorial(self.order))
        if self.kind == "sign":
            return np.sign(u)
        return np.interp(u, self.table_u, self.table_h)

    __call__ = evaluate
