"""Limit covariances of the rescaled solution fields and direct samplers for
the limiting Wiener-chaos fields (Hermite rank 1 and 2)."""

from dataclasses import dataclass, field
import math
import warnings
from typing import Sequence

import numpy as np
from scipy import integrate, special

from .specfun import DomainError, tauberian_K, mittag_leffler, sphere_area
from .kinetic import SystemParams, limit_matrix
from .fields import GridSpec, LatticeField, _as_rng

VARIANTS = ("micro_single", "macro_single", "micro_system", "macro_system", "frac_macro", "frac_micro")


class AccuracyError(RuntimeError):
    """Quadrature failed to reach the requested accuracy."""


@dataclass
class LimitCovQuery:
    """One limit-covariance request.

    m, kappa, C_m are per component (length 1 for single-equation
    variants).  L0 enters only through the ratio of the components' slowly
    varying factors when both lead (equal m kappa).
    """

    variant: str
    params: SystemParams
    m: Sequence[int]
    kappa: Sequence[float]
    C_m: Sequence[float]
    probe: tuple
    n: int = 1
    L0: Sequence[float] = (1.0, 1.0)

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise DomainError(f"unknown limit variant {self.variant!r}")
        self.m = tuple(int(v) for v in np.atleast_1d(self.m))
        self.kappa = tuple(float(v) for v in np.atleast_1d(self.kappa))
        self.C_m = tuple(float(v) for v in np.atleast_1d(self.C_m))
        (t, x), (t2, x2) = self.probe
        if t <= 0 or t2 <= 0:
            raise DomainError("probe times must be positive")
        for mj, kj in zip(self.m, self.kappa):
            if mj * kj >= self.n:
                raise DomainError(f"m*kappa={mj * kj:g} >= n={self.n}: the limit covariance diverges")

    @property
    def exponent(self):
        p = self.params
        if self.variant in ("micro_single", "micro_system", "frac_micro"):
            return p.alpha + p.gamma_b
        return p.alpha

    def leading(self):
        """Weights s_j of the spectral factor per component (0 if not leading)."""
        mk = [mj * kj for mj, kj in zip(self.m, self.kappa)]
        lo = min(mk)
        lead = [abs(v - lo) < 1e-12 for v in mk]
        j0 = lead.index(True)
        out = []
        for j, is_lead in enumerate(lead):
            if not is_lead:
                out.append(0.0)
                continue
            ratio = (self.L0[j] / self.L0[j0]) ** self.m[j] if len(self.L0) > j else 1.0
            out.append(self.C_m[j] ** 2 * ratio)
        return np.array(out), lo


def _amp_matrix(q, r, t):
    """Per-mode amplitude matrix A(r, t) of the limit field."""
    p = q.params
    a = q.exponent
    v = q.variant
    if v in ("micro_single", "macro_single"):
        return np.array([[math.exp(-p.mu * t * r ** a)]])
    if v == "micro_system":
        return math.exp(-p.mu * t * r ** a) * np.eye(2)
    if v == "macro_system":
        L = limit_matrix(p) if p.d1 > p.d2 else np.eye(2)
        return math.exp(-p.mu * t * r ** a) * L
    tb = t ** p.beta
    if v == "frac_micro":
        e = mittag_leffler(p.beta, -p.mu * tb * r ** a).value
        return e * np.eye(len(q.m)) if len(q.m) == 2 else np.array([[e]])
    # frac_macro
    base = -p.mu * tb * r ** a
    if len(q.m) == 1:
        return np.array([[mittag_leffler(p.beta, base).value]])
    e1 = mittag_leffler(p.beta, base + p.d1 * tb).value
    e2 = mittag_leffler(p.beta, base + p.d2 * tb).value
    return p.P @ np.diag([e1, e2]) @ p.Pinv


def _kernel(q):
    """Return g(r) = [A(r,t) S A(r,t')^T] / r^(m kappa - n) as a 2-D array function."""
    (t, _), (t2, _) = q.probe
    s, mk = q.leading()
    K = tauberian_K(q.n, mk)
    S = np.diag(s) * K

    def g(r):
        A1 = _amp_matrix(q, r, t)
        A2 = _amp_matrix(q, r, t2)
        return A1 @ S @ A2.T

    return g, mk


def _radial(q, g_entry, mk, dx, epsabs, epsrel, limit):
    n = q.n
    pw = mk - n
    if n == 1:
        pref = 2.0
        if dx == 0.0:
            r1 = 1.0
            v1, e1 = integrate.quad(g_entry, 0.0, r1, weight="alg", wvar=(pw, 0.0),
                                    epsabs=epsabs, epsrel=epsrel, limit=limit)
            v2, e2 = integrate.quad(lambda r: g_entry(r) * r ** pw, r1, np.inf,
                                    epsabs=epsabs, epsrel=epsrel, limit=limit)
        else:
            w = abs(dx)
            r1 = 0.5 * math.pi / w
            v1, e1 = integrate.quad(lambda r: g_entry(r) * math.cos(w * r), 0.0, r1, weight="alg",
                                    wvar=(pw, 0.0), epsabs=epsabs, epsrel=epsrel, limit=limit)
            v2, e2 = integrate.quad(lambda r: g_entry(r) * r ** pw, r1, np.inf, weight="cos", wvar=w,
                                    epsabs=epsabs, limlst=100)
        return pref * (v1 + v2), pref * (e1 + e2)
    if n == 2:
        # Hankel form: 2 pi int J0(|dx| r) g(r) r^(mk-2) r dr
        pw1 = pw + 1.0
        w = abs(dx)

        def f_s(r):
            return g_entry(r) * (special.j0(w * r) if w else 1.0)

        r1 = 1.0
        v1, e1 = integrate.quad(f_s, 0.0, r1, weight="alg", wvar=(pw1, 0.0),
                                epsabs=epsabs, epsrel=epsrel, limit=limit)
        v2, e2 = integrate.quad(lambda r: f_s(r) * r ** pw1, r1, np.inf,
                                epsabs=epsabs, epsrel=epsrel, limit=limit)
        return 2.0 * math.pi * (v1 + v2), 2.0 * math.pi * (e1 + e2)
    raise DomainError("limit quadrature is implemented for n = 1, 2")


def limit_cov(query, epsabs=1e-13, epsrel=1e-10, limit=400):
    """Limit covariance at a probe pair by radial quadrature.

    Returns (value, err).  value is a float for single-equation variants
    and a 2x2 array for system variants (rows: component at the first probe).
    """
    q = query
    (_, x), (_, x2) = q.probe
    dx = float(np.linalg.norm(np.atleast_1d(np.asarray(x, dtype=float) - np.asarray(x2, dtype=float))))
    g, mk = _kernel(q)
    dim = 1 if q.variant in ("micro_single", "macro_single") or len(q.m) == 1 else 2
    val = np.zeros((dim, dim))
    err = 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        for i in range(dim):
            for j in range(dim):
                if q.variant in ("micro_system",) and i != j:
                    continue  # exactly zero: independent noises, diagonal kernel
                entry = lambda r, i=i, j=j: float(g(r)[i, j])
                try:
                    v, e = _radial(q, entry, mk, dx, epsabs, epsrel, limit)
                except integrate.IntegrationWarning as exc:
                    raise AccuracyError(f"limit quadrature did not converge: {exc}") from exc
                val[i, j] = v
                err = max(err, e)
    if dim == 1:
        return float(val[0, 0]), err
    return val, err


def closed_form_variance(m, kappa, C_m, mu, t, a, n=1):
    """C_m^2 K(n, m kappa) * 2 Gamma(m kappa/a) / (a (2 mu t)^(m kappa/a)) for n=1."""
    if n != 1:
        raise DomainError("closed form is for n=1")
    mk = m * kappa
    return C_m ** 2 * tauberian_K(1, mk) * 2.0 * math.gamma(mk / a) / (a * (2.0 * mu * t) ** (mk / a))


def _power_cell_masses(grid, kappa, C):
    """Exact lattice cell masses of C K(n,kappa) |lambda|^(kappa-n) for n=1."""
    if grid.n != 1:
        raise DomainError("limit-field samplers are implemented for n=1")
    K = tauberian_K(1, kappa)
    lam = np.abs(grid.freqs())
    dl = grid.dlam
    lo = np.maximum(lam - 0.5 * dl, 0.0)
    hi = np.minimum(lam + 0.5 * dl, grid.nyquist)
    m = C ** 2 * K * (hi ** kappa - lo ** kappa) / kappa
    m[0] = 2.0 * C ** 2 * K * (0.5 * dl) ** kappa / kappa
    return m, lam


def sample_limit_field_m1(params, kappa, C1, t_list, grid, seed, replicates=1, micro=True):
    """Gaussian rank-1 limit field at several times, sharing one white noise.

    Spectral density of the time-t marginal: C1^2 K(n, kappa)
    |lambda|^(kappa-n) exp(-2 mu t |lambda|^a), a = alpha+gamma (micro) or
    alpha (macro).  Values have shape (len(t_list), replicates, pts).
    """
    if not (0 < kappa < grid.n):
        raise DomainError("kappa must lie in (0, n)")
    a = params.alpha + params.gamma_b if micro else params.alpha
    rng = _as_rng(seed)
    t_list = np.atleast_1d(np.asarray(t_list, dtype=float))
    if C1 == 0:
        return LatticeField(grid=grid, values=np.zeros((t_list.size, replicates, grid.pts)), comps=t_list.size)
    m, lam = _power_cell_masses(grid, kappa, C1)
    half = slice(0, grid.pts // 2 + 1)
    amp = np.sqrt(m[half])
    lam_h = lam[half]
    w = rng.standard_normal((replicates, grid.pts))
    spec = np.fft.rfft(w, axis=-1)
    out = np.empty((t_list.size, replicates, grid.pts))
    for i, t in enumerate(t_list):
        mult = amp * np.exp(-params.mu * t * lam_h ** a)
        out[i] = np.fft.irfft(spec * mult, n=grid.pts, axis=-1) * math.sqrt(grid.pts)
    return LatticeField(grid=grid, values=out, comps=t_list.size, seed=seed)


class ResolutionWarning(UserWarning):
    """The frequency lattice is too coarse for the requested accuracy."""


@dataclass
class ChaosSample:
    """Output of :func:`sample_limit_field_m2`.

    ``values`` has shape (replicates, n_probes).  ``second_moment`` and
    ``kurtosis`` are the exact moments of the discretised quadratic form;
    ``exclusion`` is the relative RMS size of the centred diagonal terms
    that the off-diagonal sum leaves out.
    """

    values: np.ndarray
    xs: np.ndarray
    lam: np.ndarray
    second_moment: np.ndarray
    kurtosis: np.ndarray
    exclusion: np.ndarray
    limit: float


def _chaos_lattice(kappa, modes, ratio=None, width=None, geo_frac=0.7):
    """Positive half of the symmetric frequency lattice for the rank-2 sampler.

    Cells grow geometrically (factor ``ratio``) away from the origin until
    they reach ``width``, then stay uniform.  The grading keeps every cell's
    share of the singular mass small, which is what the diagonal exclusion
    removes.  Both parameters refine like 1/sqrt(modes).
    """
    half = modes // 2
    s = math.sqrt(256.0 / modes)
    ratio = 1.0 + 0.2 * s if ratio is None else ratio
    width = 0.2 * s if width is None else width
    ng = int(round(half * geo_frac))
    lt = width / (ratio - 1.0)
    geo = lt * ratio ** (-np.arange(ng - 1, -1, -1.0))
    uni = lt + width * np.arange(1, half - ng + 1)
    edges = np.concatenate([[0.0], geo, uni])
    K = tauberian_K(1, kappa)
    lo, hi = edges[:-1], edges[1:]
    w = K * (hi ** kappa - lo ** kappa) / kappa
    # centre of mass of |lambda|^(kappa-1) on each cell
    c = kappa / (kappa + 1.0) * (hi ** (kappa + 1) - lo ** (kappa + 1)) / (hi ** kappa - lo ** kappa)
    return c, w


def _chaos_forms(c, w, mu, t, a, x, C2):
    """Real symmetric matrices (excluded, diagonal-only) of X = xi^T A xi."""
    n = c.size
    lam = np.concatenate([c, -c])
    # W_j = sqrt(w/2)(A + iB) for lambda>0, conjugate for lambda<0
    s = np.sqrt(0.5 * w)
    T = np.zeros((2 * n, 2 * n), dtype=complex)
    idx = np.arange(n)
    T[idx, idx] = s
    T[idx, n + idx] = 1j * s
    T[n + idx, idx] = s
    T[n + idx, n + idx] = -1j * s
    S = lam[:, None] + lam[None, :]
    G = np.exp(1j * x * S - mu * t * np.abs(S) ** a)
    diag = np.zeros_like(G, dtype=bool)
    full = np.arange(2 * n)
    diag[full, full] = True
    diag[full, (full + n) % (2 * n)] = True
    Ge = np.where(diag, 0.0, G)
    Gd = np.where(diag, G, 0.0)
    pref = C2 / math.sqrt(2.0)
    A = pref * np.real(T.T @ Ge @ T)
    D = pref * np.real(T.T @ Gd @ T)
    return 0.5 * (A + A.T), 0.5 * (D + D.T)


def chaos_second_moment(params, kappa, C2, t, x=0.0, modes=256, micro=True):
    """Exact second moment, kurtosis and exclusion size of the discretised double integral."""
    a = params.alpha + params.gamma_b if micro else params.alpha
    c, w = _chaos_lattice(kappa, modes)
    A, D = _chaos_forms(c, w, params.mu, t, a, x, C2)
    nu = np.linalg.eigvalsh(A)
    m2 = 2.0 * float(np.sum(nu ** 2))
    kurt = 3.0 + 12.0 * float(np.sum(nu ** 4)) / float(np.sum(nu ** 2)) ** 2
    excl = math.sqrt(2.0 * float(np.sum(D * D)) / m2)
    return m2, kurt, excl


def sample_limit_field_m2(params, kappa, C2, t, grid_1d, seed, modes=256, replicates=5000,
                          micro=True, chunk=500, probes=(0.0,)):
    """Discretised double Wiener integral (Hermite rank 2 limit field).

    Frequencies live on ``modes`` symmetric graded cells with exact masses
    of K(1,kappa)|lambda|^(kappa-1); pairs with
    lambda_j = +-lambda_k are excluded.  The field at a probe x is the real
    quadratic form sum_jk G(x, lambda_j+lambda_k) W_j W_k, evaluated through
    its real symmetric matrix.  ``grid_1d`` fixes the dimension (n=1).
    """
    if grid_1d is not None and getattr(grid_1d, "n", 1) != 1:
        raise DomainError("the rank-2 sampler is implemented for n=1")
    if not (0 < 2 * kappa < 1):
        raise DomainError("rank 2 needs 2*kappa < n = 1")
    if modes < 8 or modes > 512 or modes % 2:
        raise DomainError("modes must be an even integer in [8, 512]")
    a = params.alpha + params.gamma_b if micro else params.alpha
    c, w = _chaos_lattice(kappa, modes)
    xs = np.atleast_1d(np.asarray(probes, dtype=float))
    forms = [_chaos_forms(c, w, params.mu, t, a, x, C2) for x in xs]
    m2 = np.empty(xs.size)
    kurt = np.empty(xs.size)
    excl = np.empty(xs.size)
    for i, (A, D) in enumerate(forms):
        nu = np.linalg.eigvalsh(A)
        m2[i] = 2.0 * np.sum(nu ** 2)
        kurt[i] = 3.0 + 12.0 * np.sum(nu ** 4) / np.sum(nu ** 2) ** 2
        excl[i] = math.sqrt(2.0 * np.sum(D * D) / m2[i])
    q = LimitCovQuery("micro_single" if micro else "macro_single", params, [2], [kappa], [C2],
                      ((t, 0.0), (t, 0.0)))
    lim, _ = limit_cov(q)
    if abs(m2[0] / lim - 1.0) > 0.05:
        warnings.warn(
            f"modes={modes} reproduces the limit second moment only to {abs(m2[0] / lim - 1.0):.1%}",
            ResolutionWarning,
        )
    vals = np.empty((replicates, xs.size))
    dim = c.size * 2
    for ci, start in enumerate(range(0, replicates, chunk)):
        nrep = min(chunk, replicates - start)
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(ci,)))
        xi = rng.standard_normal((nrep, dim))
        for i, (A, _) in enumerate(forms):
            vals[start:start + nrep, i] = np.einsum("ij,ij->i", xi @ A, xi)
    return ChaosSample(vals, xs, np.concatenate([c, -c]), m2, kurt, excl, float(lim))
