"""Backend selection for the hot kernels.

The compiled Cython core is used when it imports; otherwise the numpy
fallback is used.  Setting ``RBHOMOG_PURE_PYTHON=1`` forces the fallback.
"""

import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if not os.environ.get("RBHOMOG_PURE_PYTHON"):
    try:
        from . import _kernels as _compiled

        _impl = _compiled
        BACKEND = "cython"
    except ImportError:  # pragma: no cover - depends on the build
        pass

ml_core = _impl.ml_core
ml_scalar = _impl.ml_scalar
ml_series = _impl.ml_series
ml_integral = _impl.ml_integral
ml_asymptotic = _impl.ml_asymptotic
hermite_table = _impl.hermite_table

REGIME_SERIES = _kernels_py.REGIME_SERIES
REGIME_ASYMPTOTIC = _kernels_py.REGIME_ASYMPTOTIC
REGIME_IDENTITY = _kernels_py.REGIME_IDENTITY
REGIME_INTEGRAL = _kernels_py.REGIME_INTEGRAL
REGIME_OVERFLOW = _kernels_py.REGIME_OVERFLOW
REGIME_NAMES = {
    REGIME_SERIES: "series",
    REGIME_ASYMPTOTIC: "asymptotic",
    REGIME_IDENTITY: "identity",
    REGIME_INTEGRAL: "integral",
    REGIME_OVERFLOW: "overflow",
}


def backends():
    """Return the available kernel modules keyed by name."""
    out = {"python": _kernels_py}
    try:
        from . import _kernels as _compiled

        out["cython"] = _compiled
    except ImportError:  # pragma: no cover
        pass
    return out
