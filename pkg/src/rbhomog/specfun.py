"""Special functions: Gamma, the one-parameter Mittag-Leffler function and
the Tauberian constant linking covariance tails to spectral singularities."""

from dataclasses import dataclass
import math

import numpy as np
from scipy import special

from . import kernels


class DomainError(ValueError):
    """Argument outside the mathematical domain of a function."""


@dataclass(frozen=True)
class MLEvalReport:
    value: float
    regime: str
    terms_used: int
    est_error: float


def gamma_fn(x):
    """Gamma function for real x away from the poles."""
    x = float(x)
    if x <= 0 and x == math.floor(x):
        raise DomainError(f"Gamma has a pole at x={x:g}")
    return float(special.gamma(x))


def _check_beta(beta):
    if not (0.0 < beta <= 1.0) or not math.isfinite(beta):
        raise DomainError(f"beta must lie in (0, 1], got {beta!r}")


def _overflow(beta, z):
    # log E_beta(z) ~ z**(1/beta) - log(beta) for large positive z
    logmag = z ** (1.0 / beta) - math.log(beta)
    return OverflowError(
        f"E_{beta:g}({z:g}) overflows to +inf (log-magnitude about {logmag:.4g}); "
        "use a prefactored formulation"
    )


def _identity_ok(beta, use_identity):
    return beta == 1.0 or (use_identity and beta == 0.5)


def mittag_leffler(beta, z, use_identity=True, regime=None):
    """Evaluate E_beta(z) = sum_k z^k / Gamma(beta k + 1) for real z.

    Parameters
    ----------
    beta : float in (0, 1]
    z : float
    use_identity : bool
        Use exp (beta=1) and erfcx (beta=1/2) closed forms.  beta=1 always
        uses exp because the general routes degenerate there.
    regime : {None, "series", "asymptotic", "integral"}
        Force a specific expansion (for diagnostics and overlap tests).

    Returns
    -------
    MLEvalReport
    """
    beta = float(beta)
    z = float(z)
    _check_beta(beta)
    if not math.isfinite(z):
        raise DomainError("z must be finite")
    if regime is not None:
        return _forced(beta, z, regime)
    if _identity_ok(beta, use_identity):
        if beta == 1.0:
            if z > 709.0:
                raise _overflow(beta, z)
            return MLEvalReport(math.exp(z), "identity", 0, 0.0)
        if z > 26.5:
            raise _overflow(beta, z)
        v = float(special.erfcx(-z))
        return MLEvalReport(v, "identity", 0, 4e-16 * abs(v))
    v, code, n, e = kernels.ml_scalar(beta, z)
    if code == kernels.REGIME_OVERFLOW:
        raise _overflow(beta, z)
    return MLEvalReport(float(v), kernels.REGIME_NAMES[int(code)], int(n), float(e))


def _forced(beta, z, regime):
    if regime == "series":
        v, n, e = kernels.ml_series(beta, z)
        if math.isinf(v):
            raise _overflow(beta, z)
        return MLEvalReport(v, "series", int(n), e)
    if z >= 0.0:
        raise DomainError(f"regime {regime!r} applies to negative arguments only")
    if beta == 1.0:
        raise DomainError(f"regime {regime!r} is degenerate at beta=1")
    if regime == "asymptotic":
        v, n, e = kernels.ml_asymptotic(beta, -z)
        return MLEvalReport(v, "asymptotic", int(n), e)
    if regime == "integral":
        v, n, e = kernels.ml_integral(beta, -z)
        return MLEvalReport(v, "integral", int(n), e)
    raise DomainError(f"unknown regime {regime!r}")


def mittag_leffler_array(beta, z, use_identity=True, return_error=False):
    """Vectorised E_beta over an array of real arguments.

    Raises OverflowError if any entry is not representable.
    """
    beta = float(beta)
    _check_beta(beta)
    z = np.asarray(z, dtype=np.float64)
    shape = z.shape
    flat = z.ravel()
    if _identity_ok(beta, use_identity):
        if beta == 1.0:
            if flat.size and flat.max() > 709.0:
                raise _overflow(beta, float(flat.max()))
            vals = np.exp(flat)
        else:
            if flat.size and flat.max() > 26.5:
                raise _overflow(beta, float(flat.max()))
            vals = special.erfcx(-flat)
        err = 4e-16 * np.abs(vals)
    else:
        vals, codes, _, err = kernels.ml_core(beta, flat)
        bad = codes == kernels.REGIME_OVERFLOW
        if bad.any():
            raise _overflow(beta, float(flat[bad].max()))
    vals = vals.reshape(shape)
    if return_error:
        return vals, np.asarray(err).reshape(shape)
    return vals


def tauberian_K(n, kappa):
    """Gamma((n - kappa)/2) / (2^kappa pi^(n/2) Gamma(kappa/2))."""
    n = int(n)
    kappa = float(kappa)
    if n < 1:
        raise DomainError("dimension n must be >= 1")
    if not (0.0 < kappa < n):
        raise DomainError(f"kappa must lie in (0, n={n}), got {kappa!r}")
    return math.exp(
        special.gammaln((n - kappa) / 2.0)
        - kappa * math.log(2.0)
        - 0.5 * n * math.log(math.pi)
        - special.gammaln(kappa / 2.0)
    )


def sphere_area(n):
    """Surface area S_{n-1} of the unit sphere in R^n (S_0 = 2)."""
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)
