"""Fourier-multiplier solver for the coupled Riesz-Bessel system

    d_t^beta w = -mu (-Delta)^(alpha/2) (I - Delta)^(gamma/2) w + B w

on a periodic lattice.  B = P diag(d1, d2) P^-1 decouples the system; each
eigen-component evolves with an exponential (beta=1) or Mittag-Leffler
(beta<1) multiplier.
"""

from dataclasses import dataclass
from functools import lru_cache
import math

import numpy as np

from .fields import GridSpec, LatticeField, GridError
from .specfun import DomainError, mittag_leffler_array


class ConditionError(ValueError):
    """Model parameters violate the structural assumptions on B."""


@dataclass(frozen=True)
class SystemParams:
    mu: float
    alpha: float
    gamma_b: float = 0.0
    beta: float = 1.0
    P_: tuple = ((1.0, 0.0), (0.0, 1.0))
    d1: float = 0.0
    d2: float = 0.0

    def __post_init__(self):
        if not self.mu > 0:
            raise DomainError("mu must be positive")
        if not (0.0 < self.alpha <= 2.0):
            raise DomainError("alpha must lie in (0, 2]")
        if self.gamma_b < 0:
            raise DomainError("gamma must be non-negative")
        if not (0.0 < self.beta <= 1.0):
            raise DomainError("beta must lie in (0, 1]")
        P = np.asarray(self.P_, dtype=float)
        if P.shape != (2, 2):
            raise DomainError("P must be 2x2")
        if abs(np.linalg.det(P) - 1.0) > 1e-12:
            raise ConditionError("det(P) must equal 1")

    @property
    def P(self):
        return np.asarray(self.P_, dtype=float)

    @property
    def Pinv(self):
        (p11, p12), (p21, p22) = self.P_
        return np.array([[p22, -p12], [-p21, p11]])

    @property
    def B(self):
        return self.P @ np.diag([self.d1, self.d2]) @ self.Pinv

    def psi(self, lam):
        """Symbol mu |lambda|^alpha (1 + |lambda|^2)^(gamma/2)."""
        lam = np.abs(np.asarray(lam, dtype=np.float64))
        out = self.mu * lam ** self.alpha
        if self.gamma_b:
            out = out * (1.0 + lam * lam) ** (0.5 * self.gamma_b)
        return out

    def with_(self, **kw):
        d = dict(mu=self.mu, alpha=self.alpha, gamma_b=self.gamma_b, beta=self.beta,
                 P_=self.P_, d1=self.d1, d2=self.d2)
        d.update(kw)
        return SystemParams(**d)

    def scaled_B(self, factor):
        """Same P with eigenvalues multiplied by ``factor`` (B -> factor B)."""
        return self.with_(d1=self.d1 * factor, d2=self.d2 * factor)


def _tuple2(a):
    return tuple(tuple(float(v) for v in row) for row in np.asarray(a, dtype=float))


def params_from_B(B, mu, alpha, gamma_b=0.0, beta=1.0, tol=1e-12):
    """Decompose B = P diag(d1, d2) P^-1 with det P = 1 and d1 >= d2."""
    B = np.asarray(B, dtype=float)
    if B.shape != (2, 2):
        raise ConditionError("B must be 2x2")
    tr = np.trace(B)
    det = np.linalg.det(B)
    disc = tr * tr / 4.0 - det
    scale = max(1.0, np.max(np.abs(B)))
    if disc < -tol * scale ** 2:
        raise ConditionError("B has complex eigenvalues; it is not diagonalisable over the reals")
    if abs(disc) <= tol * scale ** 2:
        # repeated eigenvalue: diagonalisable only if B is a multiple of I
        d = tr / 2.0
        if np.max(np.abs(B - d * np.eye(2))) > math.sqrt(tol) * scale:
            raise ConditionError("B has a repeated eigenvalue with a deficient eigenspace (not diagonalisable)")
        return SystemParams(mu, alpha, gamma_b, beta, ((1.0, 0.0), (0.0, 1.0)), d, d)
    w, V = np.linalg.eig(B)
    w = np.real(w)
    V = np.real(V)
    order = np.argsort(-w)
    w = w[order]
    V = V[:, order]
    dv = np.linalg.det(V)
    if dv < 0:
        V[:, 1] = -V[:, 1]
        dv = -dv
    V = V / math.sqrt(dv)
    return SystemParams(mu, alpha, gamma_b, beta, _tuple2(V), float(w[0]), float(w[1]))


def params_from_P(P, d1, d2, mu, alpha, gamma_b=0.0, beta=1.0):
    """Build parameters from P (rescaled to det 1) and eigenvalues; relabels so d1 >= d2."""
    P = np.asarray(P, dtype=float)
    dv = np.linalg.det(P)
    if abs(dv) < 1e-14:
        raise ConditionError("P is singular")
    if d1 < d2:
        P = P[:, ::-1].copy()
        d1, d2 = d2, d1
        dv = -dv
    if dv < 0:
        P[:, 1] = -P[:, 1]
        dv = -dv
    P = P / math.sqrt(dv)
    return SystemParams(mu, alpha, gamma_b, beta, _tuple2(P), float(d1), float(d2))


def green_multiplier(lambda_mag, t, params):
    """exp(-mu t |lambda|^alpha (1 + |lambda|^2)^(gamma/2))."""
    if np.any(np.asarray(t) < 0):
        raise DomainError("t must be non-negative")
    return np.exp(-t * params.psi(lambda_mag))


def q_matrix(t, params):
    """Q(t) = P diag(e^{d1 t}, e^{d2 t}) P^-1."""
    e1, e2 = params.d1 * t, params.d2 * t
    if max(e1, e2) > 709.0:
        raise OverflowError(
            f"exp(d t) with d t = {max(e1, e2):.4g} overflows; use prefactored_q"
        )
    return params.P @ np.diag([math.exp(e1), math.exp(e2)]) @ params.Pinv


def prefactored_q(t, params):
    """e^{-d1 t} Q(t), bounded for t >= 0 when d1 >= d2."""
    if params.d1 < params.d2:
        raise ConditionError("prefactored_q needs d1 >= d2; relabel the eigenvalues")
    return params.P @ np.diag([1.0, math.exp((params.d2 - params.d1) * t)]) @ params.Pinv


def limit_matrix(params):
    """lim e^{-d1 t} Q(t) = P diag(1, 0) P^-1 for d1 > d2."""
    (p11, p12), (p21, p22) = params.P_
    return np.array([[p11 * p22, -p11 * p12], [p21 * p22, -p12 * p21]])


def _values(x):
    return x.values if isinstance(x, LatticeField) else np.asarray(x, dtype=np.float64)


def _grid_of(u0, grid):
    if isinstance(u0, LatticeField):
        return u0.grid
    if grid is None:
        raise GridError("grid required when passing raw arrays")
    return grid


@lru_cache(maxsize=64)
def _green_half(grid, params, t):
    return green_multiplier(grid.kmag_r(), t, params)


def _apply_half(vals, mult, grid):
    axes = tuple(range(-grid.n, 0))
    spec = np.fft.rfftn(vals, axes=axes)
    spec *= mult
    return np.fft.irfftn(spec, s=grid.shape, axes=axes)


def _check_pair(u, v, grid):
    if u.shape != v.shape:
        raise GridError(f"u0 and v0 shapes differ: {u.shape} vs {v.shape}")
    if u.shape[-grid.n:] != grid.shape:
        raise GridError("field shape does not match the grid")


def solve_system(u0, v0, params, t, grid=None, prefactor=False):
    """Exact solution of the beta=1 system at time t.

    Returns a LatticeField whose values have shape (2, ...) holding
    (u, v).  With ``prefactor`` the result is multiplied by e^{-d1 t}.
    """
    grid = _grid_of(u0, grid)
    u, v = _values(u0), _values(v0)
    _check_pair(u, v, grid)
    if t < 0:
        raise DomainError("t must be non-negative")
    if t == 0:
        Q = np.eye(2)
    else:
        Q = prefactored_q(t, params) if prefactor else q_matrix(t, params)
    if t == 0:
        U, V = u.astype(np.float64, copy=True), v.astype(np.float64, copy=True)
    else:
        mult = _green_half(grid, params, float(t))
        U = _apply_half(u, mult, grid)
        V = _apply_half(v, mult, grid)
    out = np.stack([Q[0, 0] * U + Q[0, 1] * V, Q[1, 0] * U + Q[1, 1] * V])
    return LatticeField(grid=grid, values=out, comps=2)


def fractional_multipliers(lam, t, params, use_identity=True):
    """E_beta((-psi(lambda) + d_j) t^beta) for j = 1, 2."""
    lam = np.asarray(lam, dtype=np.float64)
    tb = t ** params.beta
    ps = params.psi(lam) * tb
    out = []
    for d in (params.d1, params.d2):
        out.append(mittag_leffler_array(params.beta, -ps + d * tb, use_identity=use_identity))
    return out


def solve_fractional(u0, v0, params, t, grid=None, use_identity=True):
    """Time-fractional solve via Mittag-Leffler multipliers in eigencoordinates."""
    grid = _grid_of(u0, grid)
    u, v = _values(u0), _values(v0)
    _check_pair(u, v, grid)
    if t < 0:
        raise DomainError("t must be non-negative")
    if t == 0:
        return LatticeField(grid=grid, values=np.stack([u, v]).astype(np.float64), comps=2)
    axes = tuple(range(-grid.n, 0))
    P, Pi = params.P, params.Pinv
    uh = np.fft.rfftn(u, axes=axes)
    vh = np.fft.rfftn(v, axes=axes)
    m1, m2 = fractional_multipliers(grid.kmag_r(), float(t), params, use_identity)
    e1 = (Pi[0, 0] * uh + Pi[0, 1] * vh) * m1
    e2 = (Pi[1, 0] * uh + Pi[1, 1] * vh) * m2
    uh = P[0, 0] * e1 + P[0, 1] * e2
    vh = P[1, 0] * e1 + P[1, 1] * e2
    U = np.fft.irfftn(uh, s=grid.shape, axes=axes)
    V = np.fft.irfftn(vh, s=grid.shape, axes=axes)
    return LatticeField(grid=grid, values=np.stack([U, V]), comps=2)


def mean_vector(t, params, C0, use_identity=True):
    """C(t; B) = P diag(E_beta(d_j t^beta)) P^-1 C0."""
    C0 = np.asarray(C0, dtype=np.float64)
    tb = t ** params.beta
    e = mittag_leffler_array(params.beta, np.array([params.d1 * tb, params.d2 * tb]), use_identity=use_identity)
    return params.P @ (e * (params.Pinv @ C0))
