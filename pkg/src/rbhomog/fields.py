"""Spectral synthesis of isotropic long-range dependent Gaussian fields on
periodic lattices, subordination and spectral-density diagnostics."""

from dataclasses import dataclass, field, replace
import csv
import math
import warnings
from typing import Optional

import numpy as np
from scipy import special

from .specfun import DomainError, tauberian_K, sphere_area
from .hermite import Subordinator


class ResolutionError(ValueError):
    """The lattice does not resolve the spectral density."""


class GridError(ValueError):
    """Incompatible or invalid lattice."""


@dataclass(frozen=True)
class GridSpec:
    n: int
    pts: int
    box: float

    def __post_init__(self):
        if self.n not in (1, 2, 3):
            raise GridError("dimension n must be 1, 2 or 3")
        if self.pts < 2 or self.pts & (self.pts - 1):
            raise GridError(f"pts must be a power of 2, got {self.pts}")
        if not self.box > 0:
            raise GridError("box must be positive")

    @property
    def dx(self):
        return self.box / self.pts

    @property
    def dlam(self):
        return 2.0 * math.pi / self.box

    @property
    def nyquist(self):
        return math.pi * self.pts / self.box

    @property
    def shape(self):
        return (self.pts,) * self.n

    @property
    def size(self):
        return self.pts ** self.n

    def coords(self):
        """Lattice coordinates 0, dx, ..., box-dx along one axis."""
        return np.arange(self.pts) * self.dx

    def freqs(self):
        """Angular frequencies along one axis in FFT order."""
        return 2.0 * np.pi * np.fft.fftfreq(self.pts, d=self.dx)

    def kmag(self):
        """|lambda| over the full frequency lattice in FFT order."""
        k = self.freqs()
        if self.n == 1:
            return np.abs(k)
        grids = np.meshgrid(*([k] * self.n), indexing="ij", sparse=True)
        return np.sqrt(sum(g * g for g in grids))

    def kmag_r(self):
        """|lambda| on the half lattice used by rfftn."""
        k = self.freqs()
        kr = 2.0 * np.pi * np.fft.rfftfreq(self.pts, d=self.dx)
        if self.n == 1:
            return np.abs(kr)
        axes = [k] * (self.n - 1) + [kr]
        grids = np.meshgrid(*axes, indexing="ij", sparse=True)
        return np.sqrt(sum(g * g for g in grids))


@dataclass(frozen=True)
class SpectralDensity:
    """f(lambda) = norm |lambda|^(kappa-n) exp(-a |lambda|) with unit mass.

    ``dilation`` records s for a density lambda -> s^-n f0(lambda/s); the
    family is closed under dilation with norm -> norm s^-kappa, a -> a/s.
    """

    n: int
    kappa: float
    L0: float
    a: float
    norm: float
    dilation: float = 1.0

    def __call__(self, lam):
        lam = np.abs(np.asarray(lam, dtype=np.float64))
        with np.errstate(divide="ignore"):
            return self.norm * lam ** (self.kappa - self.n) * np.exp(-self.a * lam)

    def radial_mass(self, r):
        """Mass of the ball |lambda| <= r."""
        r = np.asarray(r, dtype=np.float64)
        return (
            self.norm * sphere_area(self.n) * special.gamma(self.kappa)
            * self.a ** (-self.kappa) * special.gammainc(self.kappa, self.a * r)
        )

    def total_mass(self):
        return float(self.norm * sphere_area(self.n) * special.gamma(self.kappa) * self.a ** (-self.kappa))

    def tail_mass(self, r):
        """Mass outside the ball |lambda| <= r."""
        return float(self.total_mass() * special.gammaincc(self.kappa, self.a * r))

    def covariance(self, x):
        """Exact covariance R(x) = int e^{i lambda x} f(lambda) d lambda (n=1)."""
        if self.n != 1:
            raise NotImplementedError("closed-form covariance is available for n=1")
        x = np.asarray(x, dtype=np.float64)
        return (
            2.0 * self.norm * special.gamma(self.kappa)
            * (self.a ** 2 + x ** 2) ** (-0.5 * self.kappa)
            * np.cos(self.kappa * np.arctan2(np.abs(x), self.a))
        )


def make_spectral_density(n, kappa, L0):
    """Unit-mass density with low-frequency behaviour K(n, kappa) L0 |lambda|^(kappa-n)."""
    n = int(n)
    if not (0.0 < kappa < n):
        raise DomainError(f"kappa must lie in (0, n={n}), got {kappa}")
    if not L0 > 0:
        raise DomainError("L0 must be positive")
    norm = tauberian_K(n, kappa) * L0
    a = (norm * sphere_area(n) * special.gamma(kappa)) ** (1.0 / kappa)
    if not a > 0 or not math.isfinite(a):
        raise DomainError("unit-mass cutoff a is not positive and finite")
    return SpectralDensity(n=n, kappa=float(kappa), L0=float(L0), a=float(a), norm=float(norm))


def L0_for_cutoff(n, kappa, a):
    """Inverse of make_spectral_density: the L0 giving cutoff a."""
    return a ** kappa / (tauberian_K(n, kappa) * sphere_area(n) * special.gamma(kappa))


def dilate_spectrum(f, a_dilation):
    """Spectral density of x -> zeta(a x) when zeta has density f."""
    s = float(a_dilation)
    if not s > 0:
        raise DomainError("dilation factor must be positive")
    return replace(f, norm=f.norm * s ** (-f.kappa), a=f.a / s, dilation=f.dilation * s)


def cell_masses(f, grid):
    """Spectral mass attached to every lattice frequency (full FFT layout).

    For n=1 each cell [lambda_k - dlam/2, lambda_k + dlam/2] gets its exact
    integral of f (incomplete gamma differences).  For n >= 2 cells use the
    point value f(lambda_k) dlam^n, except the zero cell which gets the mass
    of the ball with the same volume.  The Nyquist cell is cut at Nyquist.
    """
    if f.n != grid.n:
        raise GridError("density and grid dimensions differ")
    dl = grid.dlam
    if grid.n == 1:
        lam = np.abs(grid.freqs())
        lo = np.maximum(lam - 0.5 * dl, 0.0)
        hi = np.minimum(lam + 0.5 * dl, grid.nyquist)
        half = 0.5 * f.radial_mass(hi) - 0.5 * f.radial_mass(lo)
        m = half.copy()
        m[0] = f.radial_mass(0.5 * dl)
        return m
    lam = grid.kmag()
    with np.errstate(divide="ignore"):
        m = f(lam) * dl ** grid.n
    r0 = (dl ** grid.n / _ball_volume(grid.n)) ** (1.0 / grid.n)
    m[(0,) * grid.n] = f.radial_mass(r0)
    return m


def _ball_volume(n):
    return math.pi ** (n / 2.0) / math.gamma(n / 2.0 + 1.0)


def discrete_variance(f, grid):
    """Variance of the lattice field: the sum of all cell masses."""
    return float(np.sum(cell_masses(f, grid)))


def check_resolution(f, grid, max_tail=0.01):
    tail = f.tail_mass(grid.nyquist)
    if tail > max_tail:
        raise ResolutionError(
            f"spectral mass beyond Nyquist {grid.nyquist:.4g} is {tail:.3g} "
            f"(limit {max_tail}); refine the lattice or raise the cutoff"
        )
    return tail


@dataclass
class LatticeField:
    grid: GridSpec
    values: np.ndarray
    comps: int = 1
    seed: Optional[object] = None

    def __post_init__(self):
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field values must be finite")


def _as_rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _half_amplitudes(f, grid, zero_mode="cell"):
    m = cell_masses(f, grid)
    if zero_mode == "zero":
        m[(0,) * grid.n] = 0.0
    elif zero_mode != "cell":
        raise ValueError("zero_mode must be 'cell' or 'zero'")
    # restrict to the rfftn half lattice
    half = m[..., : grid.pts // 2 + 1]
    return np.sqrt(half)


def synthesize(amp_r, grid, rng, replicates):
    """sqrt(N) irfftn(amp * rfftn(white noise)) for a batch of replicates."""
    axes = tuple(range(-grid.n, 0))
    w = rng.standard_normal((replicates,) + grid.shape)
    spec = np.fft.rfftn(w, axes=axes)
    spec *= amp_r
    return np.fft.irfftn(spec, s=grid.shape, axes=axes) * math.sqrt(grid.size)


def sample_gaussian_field(grid, f, seed, replicates=1, zero_mode="cell", check=True):
    """Stationary Gaussian lattice field with spectral density f.

    Cell masses m_k weight complex Gaussian white noise with Hermitian
    symmetry (obtained from the FFT of real white noise), so the lattice
    covariance is sum_k m_k exp(i lambda_k x).  ``values`` has shape
    (replicates, *grid.shape).
    """
    if check:
        check_resolution(f, grid)
    rng = _as_rng(seed)
    amp = _half_amplitudes(f, grid, zero_mode)
    vals = synthesize(amp, grid, rng, replicates)
    return LatticeField(grid=grid, values=vals, comps=1, seed=seed if not isinstance(seed, np.random.Generator) else None)


def covariance_of_density(f, grid):
    """Lattice covariance R(x_j) = sum_k m_k exp(i lambda_k x_j) at all lags."""
    m = cell_masses(f, grid)
    return np.real(np.fft.ifftn(m)) * grid.size


def convolved_density(f, rho, grid):
    """rho-fold convolution power of f on the frequency lattice (FFT layout).

    Computed as the transform of R^rho, i.e. the cyclic convolution of the
    cell masses divided by the cell volume.
    """
    rho = int(rho)
    if rho < 1:
        raise DomainError("rho must be >= 1")
    if rho == 1:
        with np.errstate(divide="ignore"):
            return f(grid.kmag())
    if abs(rho * f.kappa - f.n) < 0.02:
        warnings.warn(
            f"rho*kappa={rho * f.kappa:.3f} is close to n={f.n}; the convolution power is ill-conditioned",
            RuntimeWarning,
        )
    R = covariance_of_density(f, grid)
    conv = np.real(np.fft.fftn(R ** rho)) / grid.size
    return conv / grid.dlam ** grid.n


def subordinate(fld, h):
    """Pointwise eta = h(zeta)."""
    if fld.comps != 1:
        raise ValueError("subordination acts on scalar Gaussian fields")
    if isinstance(h, Subordinator) and h.kind == "identity":
        return fld
    return LatticeField(grid=fld.grid, values=np.asarray(h(fld.values), dtype=np.float64), comps=1, seed=fld.seed)


def export_binary(fld, path):
    """Little-endian float64 file: header (n, pts, box) then values in C order."""
    head = np.array([fld.grid.n, fld.grid.pts, fld.grid.box], dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(head.tobytes())
        fh.write(np.ascontiguousarray(fld.values, dtype="<f8").tobytes())


def import_binary(path):
    raw = np.fromfile(path, dtype="<f8")
    n, pts, box = int(raw[0]), int(raw[1]), float(raw[2])
    grid = GridSpec(n, pts, box)
    vals = raw[3:]
    lead = vals.size // grid.size
    shape = grid.shape if lead == 1 else (lead,) + grid.shape
    return LatticeField(grid=grid, values=vals.reshape(shape), comps=1)


def export_csv(fld, path, max_points=65536):
    """CSV with one row per lattice point: coordinates then component values."""
    g = fld.grid
    if g.size > max_points:
        raise GridError(f"grid with {g.size} points is too large for CSV export")
    vals = np.asarray(fld.values).reshape(-1, g.size)
    x = g.coords()
    coords = np.meshgrid(*([x] * g.n), indexing="ij")
    names = ["x", "y", "z"][: g.n]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names + [f"value_{i}" for i in range(vals.shape[0])])
        flat = [c.ravel() for c in coords]
        for j in range(g.size):
            w.writerow([repr(float(c[j])) for c in flat] + [repr(float(v)) for v in vals[:, j]])
