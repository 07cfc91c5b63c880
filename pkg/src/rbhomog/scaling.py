"""Macro and micro homogenization experiments.

Both experiments sample the initial Gaussian fields on a periodic lattice,
subordinate them, propagate the Fourier coefficients with the exact
multipliers and read the rescaled solution at the probe points by
band-limited (trigonometric) interpolation.  Rescaled values are centred,
normalised and reduced to covariance estimates against the predicted limits.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
import csv
import io
import math
from typing import List, Optional, Sequence

import numpy as np

from .fields import (GridSpec, SpectralDensity, ResolutionError, GridError, _half_amplitudes,
                     synthesize, dilate_spectrum, check_resolution, cell_masses)
from .hermite import Subordinator
from .kinetic import (SystemParams, prefactored_q, q_matrix, fractional_multipliers, mean_vector)
from .limits import LimitCovQuery, limit_cov
from .specfun import DomainError

COMP_PAIRS = (("uu", 0, 0), ("uv", 0, 1), ("vu", 1, 0), ("vv", 1, 1))
CSV_COLUMNS = ("eps", "probe_id", "comp_pair", "cov_mean", "cov_se", "n_rep",
               "limit_value", "limit_err", "z_score")


class ConfigError(ValueError):
    """Experiment configuration violates a precondition."""


class InsufficientDataError(ValueError):
    pass


def normalization_micro(eps, m, kappa, chi, L0):
    """(eps^(m kappa chi) L0^m)^(-1/2)."""
    return (eps ** (m * kappa * chi) * L0 ** m) ** -0.5


def normalization_macro(eps, m, kappa, alpha, L0, beta=1.0):
    """(eps^(m kappa beta/alpha) L0^m)^(-1/2); beta=1 gives the diffusive case."""
    return (eps ** (m * kappa * beta / alpha) * L0 ** m) ** -0.5


@dataclass
class CovEstimate:
    probe: tuple
    mean: float
    se: float
    n_rep: int
    comp_pair: str = "uu"


def estimate_covariance(x, y=None, center=False, probe=None, comp_pair="uu"):
    """Covariance estimate from per-replicate paired values.

    By default the fields are known to be centred, so the estimate is the
    mean of the products x*y with standard error std/sqrt(n).  With
    ``center=True`` the unbiased sample covariance is returned with a
    jackknife standard error.
    """
    x = np.asarray(x, dtype=np.float64).ravel()
    y = x if y is None else np.asarray(y, dtype=np.float64).ravel()
    n = x.size
    if n < 2 or y.size != n:
        raise InsufficientDataError("need at least two paired replicates")
    if not center:
        prod = x * y
        mean = float(np.mean(prod))
        se = float(np.std(prod, ddof=1) / math.sqrt(n))
        return CovEstimate(probe, mean, se, n, comp_pair)
    mx, my = x.mean(), y.mean()
    cov = float(np.sum((x - mx) * (y - my)) / (n - 1))
    # leave-one-out covariances
    sx, sy, sxy = x.sum(), y.sum(), np.sum(x * y)
    if n > 2:
        mxi = (sx - x) / (n - 1)
        myi = (sy - y) / (n - 1)
        sxyi = sxy - x * y
        covi = (sxyi - (n - 1) * mxi * myi) / (n - 2)
        se = float(math.sqrt((n - 1) / n * np.sum((covi - covi.mean()) ** 2)))
    else:
        se = float("nan")
    return CovEstimate(probe, cov, se, n, comp_pair)


@dataclass
class ScalingConfig:
    mode: str
    eps_list: Sequence[float]
    probes: Sequence[tuple]
    replicates: int = 2000
    chi: float = 1.0
    beta_b_scaling: bool = True
    box_y: Optional[float] = None
    chunk: int = 250
    centering: str = "exact"

    def __post_init__(self):
        errs = []
        if self.mode not in ("macro", "micro"):
            errs.append(f"mode must be macro or micro, got {self.mode!r}")
        e = list(self.eps_list)
        if not e or any(not (0 < v <= 1) for v in e):
            errs.append("eps values must lie in (0, 1]")
        if any(b >= a for a, b in zip(e, e[1:])):
            errs.append("eps_list must be strictly decreasing")
        if self.replicates < 100:
            errs.append("replicates must be >= 100")
        if not self.chi > 0:
            errs.append("chi must be positive")
        for pr in self.probes:
            (t, _), (t2, _) = pr
            if t <= 0 or t2 <= 0:
                errs.append("probe times must be positive")
        if self.centering not in ("exact", "nominal"):
            errs.append("centering must be 'exact' or 'nominal'")
        if errs:
            raise ConfigError("; ".join(errs))
        self.probes = [((float(a[0]), float(a[1])), (float(b[0]), float(b[1]))) for a, b in self.probes]
        self.eps_list = [float(v) for v in e]


@dataclass
class EpsResult:
    eps: float
    points: list
    samples: np.ndarray  # (n_rep, 2, n_points)
    rows: list = field(default_factory=list)


@dataclass
class ExperimentResult:
    config: ScalingConfig
    params: SystemParams
    per_eps: List[EpsResult]
    leading: int
    limits: dict

    def rows(self):
        out = []
        for r in self.per_eps:
            out.extend(r.rows)
        return out

    def smallest(self):
        return self.per_eps[-1]

    def estimate(self, eps_index, probe_id, comp_pair):
        for row in self.per_eps[eps_index].rows:
            if row["probe_id"] == probe_id and row["comp_pair"] == comp_pair:
                return row
        raise KeyError((eps_index, probe_id, comp_pair))


def _unique_points(probes):
    pts = []
    for pr in probes:
        for p in pr:
            if p not in pts:
                pts.append(p)
    return pts


def _leading(h1, h2, f1, f2):
    mk1 = h1.rank * f1.kappa
    mk2 = h2.rank * f2.kappa
    return 0 if mk1 <= mk2 + 1e-12 else 1


def _preconditions(cfg, params, f1, f2, h1, h2, grid):
    errs = []
    if grid.n != 1:
        errs.append("scaling experiments are implemented for n=1")
    for j, (f, h) in enumerate(((f1, h1), (f2, h2)), start=1):
        mk = h.rank * f.kappa
        if not (0 < f.kappa < grid.n / h.rank):
            errs.append(f"component {j}: m*kappa={mk:g} >= n={grid.n} violates the LRD range 0<kappa<n/m")
        if params.beta < 1:
            a = params.alpha + params.gamma_b if cfg.mode == "micro" else params.alpha
            if mk >= min(2 * a, grid.n):
                errs.append(f"component {j}: m*kappa={mk:g} must be below min(2*{a:g}, n) for beta<1")
    if params.d1 < params.d2:
        errs.append("d1 < d2: relabel eigenvalues so that d1 >= d2")
    if errs:
        raise ConfigError("; ".join(errs))


def _eps_setup(cfg, params, f1, f2, grid, eps):
    """Grid, densities, time map, read-off map and normalisation for one eps."""
    beta = params.beta
    if cfg.mode == "macro":
        g = grid
        dens = (f1, f2)
        tmap = lambda t: t / eps
        xscale = eps ** (-beta / params.alpha)
    else:
        c = params.alpha + params.gamma_b
        box_y = cfg.box_y if cfg.box_y is not None else grid.box
        sx = eps ** (beta / c)
        g = GridSpec(grid.n, grid.pts, box_y * sx)
        s = eps ** (-beta / c - cfg.chi)
        dens = (dilate_spectrum(f1, s), dilate_spectrum(f2, s))
        tmap = lambda t: eps * t
        xscale = sx
    return g, dens, tmap, xscale


def _mode_matrices(cfg, params, g, T, eps, C0):
    """Per-mode 2x2 multipliers (2, 2, K) on the half lattice and the mean term."""
    lam = np.abs(2.0 * np.pi * np.fft.rfftfreq(g.pts, d=g.dx))
    if params.beta == 1.0:
        gm = np.exp(-T * params.psi(lam))
        if cfg.mode == "macro":
            Q = prefactored_q(T, params)
        else:
            Q = q_matrix(T, params)
        M = Q[:, :, None] * gm[None, None, :]
        mean = Q @ C0
        return M, mean
    p = params
    if cfg.mode == "macro" and cfg.beta_b_scaling:
        p = params.scaled_B(eps ** params.beta)
    m1, m2 = fractional_multipliers(lam, T, p)
    P, Pi = p.P, p.Pinv
    M = np.empty((2, 2, lam.size))
    for i in range(2):
        for j in range(2):
            M[i, j] = P[i, 0] * m1 * Pi[0, j] + P[i, 1] * m2 * Pi[1, j]
    if cfg.centering == "nominal" and cfg.mode == "micro":
        mean = np.asarray(C0, dtype=float)
    else:
        mean = mean_vector(T, p, C0)
    return M, mean


def _trig_matrix(g, xs):
    """Band-limited evaluation matrix: values = Re(coeffs @ E) / N."""
    lam = 2.0 * np.pi * np.fft.rfftfreq(g.pts, d=g.dx)
    w = np.full(lam.size, 2.0)
    w[0] = 1.0
    if g.pts % 2 == 0:
        w[-1] = 1.0
    E = w[:, None] * np.exp(1j * lam[:, None] * np.asarray(xs)[None, :])
    return E / g.pts


def _run_chunk(job):
    (seed, eps_idx, chunk_idx, n, g, amps, h1, h2, blocks, norm) = job
    ss = np.random.SeedSequence(seed, spawn_key=(eps_idx, chunk_idx))
    rng = np.random.default_rng(ss)
    z1 = synthesize(amps[0], g, rng, n)
    z2 = synthesize(amps[1], g, rng, n)
    u0 = h1(z1)
    v0 = h2(z2)
    uh = np.fft.rfft(u0, axis=-1)
    vh = np.fft.rfft(v0, axis=-1)
    del z1, z2, u0, v0
    n_pts = sum(len(b[3]) for b in blocks)
    out = np.empty((n, 2, n_pts))
    for M, mean, E, idx in blocks:
        wu = M[0, 0] * uh + M[0, 1] * vh
        wv = M[1, 0] * uh + M[1, 1] * vh
        out[:, 0, idx] = (np.real(wu @ E) - mean[0]) * norm
        out[:, 1, idx] = (np.real(wv @ E) - mean[1]) * norm
    return out


def _limit_queries(cfg, params, f1, f2, h1, h2):
    if params.beta == 1.0:
        variant = "macro_system" if cfg.mode == "macro" else "micro_system"
    else:
        variant = "frac_macro" if cfg.mode == "macro" else "frac_micro"
    out = {}
    for k, pr in enumerate(cfg.probes):
        q = LimitCovQuery(variant, params, [h1.rank, h2.rank], [f1.kappa, f2.kappa],
                          [h1.Cm, h2.Cm], pr, n=1, L0=(f1.L0, f2.L0))
        out[k] = limit_cov(q)
    return out


def run_experiment(cfg, params, f1, f2, h1, h2, seed, grid, workers=1, limits=True, progress=None):
    """Shared driver for the macro and micro experiments.

    ``progress`` is called with each finished per-eps result.  Results do
    not depend on ``workers``: chunks have fixed sizes and their own
    random streams and are merged in chunk order.
    """
    _preconditions(cfg, params, f1, f2, h1, h2, grid)
    lead = _leading(h1, h2, f1, f2)
    f_lead, h_lead = (f1, h1) if lead == 0 else (f2, h2)
    C0 = np.array([h1.C0, h2.C0])
    points = _unique_points(cfg.probes)
    lim = _limit_queries(cfg, params, f1, f2, h1, h2) if limits else {}
    results = []
    for ei, eps in enumerate(cfg.eps_list):
        g, dens, tmap, xscale = _eps_setup(cfg, params, f1, f2, grid, eps)
        for f in dens:
            check_resolution(f, g)
        if cfg.mode == "macro":
            norm = normalization_macro(eps, h_lead.rank, f_lead.kappa, params.alpha, f_lead.L0, params.beta)
        else:
            norm = normalization_micro(eps, h_lead.rank, f_lead.kappa, cfg.chi, f_lead.L0)
        blocks = []
        for t in sorted({p[0] for p in points}):
            idx = [i for i, p in enumerate(points) if p[0] == t]
            xs = np.array([points[i][1] for i in idx]) * xscale
            if np.any(np.abs(xs) >= 0.5 * g.box):
                raise ConfigError(
                    f"read-off position {np.max(np.abs(xs)):.4g} at eps={eps:g} leaves the lattice half-box {0.5 * g.box:.4g}"
                )
            T = tmap(t)
            M, mean = _mode_matrices(cfg, params, g, T, eps, C0)
            blocks.append((M, mean, _trig_matrix(g, xs), np.array(idx)))
        amps = (_half_amplitudes(dens[0], g), _half_amplitudes(dens[1], g))
        sizes = [cfg.chunk] * (cfg.replicates // cfg.chunk)
        if cfg.replicates % cfg.chunk:
            sizes.append(cfg.replicates % cfg.chunk)
        jobs = [(seed, ei, ci, sz, g, amps, h1, h2, blocks, norm) for ci, sz in enumerate(sizes)]
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as ex:
                parts = list(ex.map(_run_chunk, jobs))
        else:
            parts = [_run_chunk(j) for j in jobs]
        samples = np.concatenate(parts, axis=0)
        er = EpsResult(eps, points, samples)
        er.rows = _rows(er, cfg, lim)
        results.append(er)
        if progress is not None:
            progress(er)
    return ExperimentResult(cfg, params, results, lead, lim)


def _rows(er, cfg, lim):
    rows = []
    for k, (pa, pb) in enumerate(cfg.probes):
        a = er.points.index(pa)
        b = er.points.index(pb)
        for name, i, j in COMP_PAIRS:
            est = estimate_covariance(er.samples[:, i, a], er.samples[:, j, b], probe=(pa, pb), comp_pair=name)
            if k in lim:
                val, err = lim[k]
                lv = float(val[i, j]) if np.ndim(val) else float(val)
            else:
                lv, err = float("nan"), float("nan")
            z = (est.mean - lv) / est.se if est.se > 0 else (0.0 if est.mean == lv else math.inf)
            rows.append(dict(eps=er.eps, probe_id=k, comp_pair=name, cov_mean=est.mean, cov_se=est.se,
                             n_rep=est.n_rep, limit_value=lv, limit_err=float(err), z_score=z))
    return rows


def run_micro_experiment(cfg, params, f1, f2, h1, h2, seed, grid, workers=1, limits=True):
    """Micro-scaling sweep: dilated initial data, time eps t, space eps^(1/(alpha+gamma)) x."""
    if cfg.mode != "micro":
        raise ConfigError("configuration mode is not micro")
    return run_experiment(cfg, params, f1, f2, h1, h2, seed, grid, workers, limits)


def run_macro_experiment(cfg, params, f1, f2, h1, h2, seed, grid, workers=1, limits=True):
    """Macro-scaling sweep: time t/eps, space x/eps^(1/alpha), prefactored by exp(-d1 t/eps)."""
    if cfg.mode != "macro":
        raise ConfigError("configuration mode is not macro")
    return run_experiment(cfg, params, f1, f2, h1, h2, seed, grid, workers, limits)


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def rows_to_csv(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in CSV_COLUMNS])
    return buf.getvalue()


def write_csv(rows, path):
    with open(path, "w", newline="") as fh:
        fh.write(rows_to_csv(rows))


def subordinated_masses(f, g, h, sigma_max=12):
    """Spectral cell masses of h(zeta) - C0: sum_sigma C_sigma^2 m^{*sigma}."""
    m = cell_masses(f, g)
    R = np.real(np.fft.ifft(m)) * g.pts
    out = np.zeros_like(m)
    top = min(sigma_max, len(h.coeffs) - 1)
    for s in range(1, top + 1):
        c = h.coeffs[s]
        if c == 0:
            continue
        out += c * c * np.real(np.fft.fft(R ** s)) / g.pts
    return out


def lattice_expectation(cfg, params, f1, f2, h1, h2, grid, sigma_max=12):
    """Exact expected rescaled covariances on the lattice (no Monte-Carlo).

    Returns {eps: {(probe_id, comp_pair): value}}.  For Gaussian h this is
    exact; otherwise the Hermite series is truncated at ``sigma_max``.
    """
    C0 = np.array([h1.C0, h2.C0])
    lead = _leading(h1, h2, f1, f2)
    f_lead, h_lead = (f1, h1) if lead == 0 else (f2, h2)
    out = {}
    for eps in cfg.eps_list:
        g, dens, tmap, xscale = _eps_setup(cfg, params, f1, f2, grid, eps)
        if cfg.mode == "macro":
            norm = normalization_macro(eps, h_lead.rank, f_lead.kappa, params.alpha, f_lead.L0, params.beta)
        else:
            norm = normalization_micro(eps, h_lead.rank, f_lead.kappa, cfg.chi, f_lead.L0)
        s = [subordinated_masses(dens[0], g, h1, sigma_max), subordinated_masses(dens[1], g, h2, sigma_max)]
        lam_full = g.freqs()
        half_idx = np.abs(np.fft.fftfreq(g.pts) * g.pts).astype(int)
        res = {}
        for k, (pa, pb) in enumerate(cfg.probes):
            Ma, _ = _mode_matrices(cfg, params, g, tmap(pa[0]), eps, C0)
            Mb, _ = _mode_matrices(cfg, params, g, tmap(pb[0]), eps, C0)
            Ma = Ma[:, :, half_idx]
            Mb = Mb[:, :, half_idx]
            ph = np.cos(lam_full * (pa[1] - pb[1]) * xscale)
            for name, i, j in COMP_PAIRS:
                tot = 0.0
                for c in range(2):
                    tot += np.sum(s[c] * Ma[i, c] * Mb[j, c] * ph)
                res[(k, name)] = float(tot * norm * norm)
        out[eps] = res
    return out
