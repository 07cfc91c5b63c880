import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rbhomog import _kernels_py
from rbhomog import kernels
from rbhomog.specfun import (DomainError, gamma_fn, mittag_leffler, mittag_leffler_array,
                             tauberian_K, sphere_area)

from oracles import ml_mp, gamma_mp, erfc_scaled_mp, frac_adams_extrapolated


# Gamma

def test_gamma_examples():
    assert gamma_fn(1) == 1.0
    assert gamma_fn(0.5) == pytest.approx(math.sqrt(math.pi), rel=1e-15)
    assert gamma_fn(7.3) == pytest.approx(gamma_mp(7.3), rel=1e-13)


@pytest.mark.parametrize("x", [0, -1, -2, -37])
def test_gamma_poles(x):
    with pytest.raises(DomainError):
        gamma_fn(x)


def test_gamma_relative_accuracy():
    xs = np.concatenate([np.linspace(-169.7, -0.3, 97), np.linspace(0.05, 170.5, 101)])
    xs = xs[np.abs(xs - np.round(xs)) > 1e-3]
    for x in xs:
        ref = gamma_mp(x)
        assert abs(gamma_fn(x) - ref) <= 1e-12 * abs(ref), x


# Mittag-Leffler

def test_ml_examples():
    assert mittag_leffler(1, -1).value == pytest.approx(math.exp(-1), rel=1e-15)
    assert mittag_leffler(0.5, -1).value == pytest.approx(erfc_scaled_mp(1.0), rel=1e-12)
    r = mittag_leffler(0.7, 0.0)
    assert r.value == 1.0


def test_ml_beta_one_is_exp():
    z = np.linspace(-30, 30, 1001)
    for zi in z:
        r = mittag_leffler(1.0, zi)
        assert r.regime == "identity"
        assert abs(r.value - math.exp(zi)) <= 1e-12 * math.exp(zi)


@pytest.mark.parametrize("use_identity", [True, False])
def test_ml_half_erfc_identity(use_identity):
    for x in np.linspace(0, 10, 101):
        ref = erfc_scaled_mp(x)
        r = mittag_leffler(0.5, -x, use_identity=use_identity)
        assert abs(r.value - ref) <= 1e-8 * max(1.0, abs(ref))
        if use_identity:
            assert r.regime == "identity"
        else:
            assert r.regime != "identity"


def test_identity_regime_only_for_special_beta():
    for beta in (0.3, 0.7, 0.99):
        for z in (-50.0, -3.0, 0.5, 4.0):
            assert mittag_leffler(beta, z).regime != "identity"


BETAS = [0.05, 0.2, 0.35, 0.5, 0.65, 0.8, 0.95, 0.999]


@pytest.mark.parametrize("beta", BETAS)
def test_ml_accuracy_against_arbitrary_precision(beta):
    xs = np.concatenate([np.geomspace(1e-6, 500, 40), [-0.5, -3.0, -10.0]])
    for x in xs:
        z = -x  # the geomspace part gives negative arguments, the tail a few positive ones
        if abs(z) ** (1 / beta) > 300:
            continue
        ref = ml_mp(beta, z)
        r = mittag_leffler(beta, z, use_identity=False)
        assert abs(r.value - ref) <= max(1e-10, 1e-10 * abs(ref)), (beta, z, r)


@settings(max_examples=60, deadline=None)
@given(beta=st.floats(0.1, 0.99), x=st.floats(1e-3, 200.0))
def test_ml_error_estimate_is_an_upper_bound(beta, x):
    if x ** (1 / beta) > 300:
        x = 300 ** beta
    r = mittag_leffler(beta, -x, use_identity=False)
    ref = ml_mp(beta, -x)
    # est_error bounds truncation; allow a few ulps of accumulated rounding on top
    assert abs(r.value - ref) <= r.est_error + 1e-14 * abs(ref)


@pytest.mark.parametrize("beta", [0.3, 0.6, 0.85])
def test_ml_series_asymptotic_overlap(beta):
    # window where both expansions are usable: x**(1/beta) between 14 and 17
    for x in np.linspace(14 ** beta, 17 ** beta, 7):
        ref = ml_mp(beta, -x)
        s = mittag_leffler(beta, -x, regime="series")
        a = mittag_leffler(beta, -x, regime="asymptotic")
        tol = 1e-14 * abs(ref)
        assert abs(s.value - ref) <= s.est_error + tol
        assert abs(a.value - ref) <= a.est_error + tol
        assert abs(s.value - a.value) <= s.est_error + a.est_error + 2 * tol
        assert s.est_error < 1e-5 and a.est_error < 1e-5


@pytest.mark.parametrize("beta", [0.2, 0.5, 0.8])
def test_ml_monotone_decay(beta):
    x = np.linspace(0, 100, 2001)
    v = mittag_leffler_array(beta, -x, use_identity=False)
    assert np.all(v > 0)
    assert np.all(np.diff(v) < 0)


@pytest.mark.parametrize("beta,lam,steps", [(0.4, -1.0, 8000), (0.4, -3.0, 8000), (0.7, -1.0, 2000), (0.7, -3.0, 2000)])
def test_ml_fractional_ode_oracle(beta, lam, steps):
    t, y = frac_adams_extrapolated(beta, lam, 2.0, steps)
    idx = np.arange(1, steps + 1, steps // 50)
    e = mittag_leffler_array(beta, lam * t[idx] ** beta, use_identity=False)
    assert np.max(np.abs(e - y[idx])) <= 1e-4


def test_ml_positive_arguments_and_overflow():
    assert mittag_leffler(0.7, 2.0).value == pytest.approx(ml_mp(0.7, 2.0), rel=1e-12)
    with pytest.raises(OverflowError, match=r"\+inf"):
        mittag_leffler(0.5, 40.0)
    with pytest.raises(OverflowError):
        mittag_leffler(1.0, 800.0)
    with pytest.raises(OverflowError):
        mittag_leffler(0.6, 500.0)


@pytest.mark.parametrize("beta", [0.0, -0.1, 1.2, float("nan")])
def test_ml_domain(beta):
    with pytest.raises(DomainError):
        mittag_leffler(beta, -1.0)


def test_ml_array_matches_scalar():
    z = np.array([-200.0, -12.0, -1.0, 0.0, 0.4, 3.0])
    v, err = mittag_leffler_array(0.6, z, return_error=True)
    for zi, vi in zip(z, v):
        assert vi == mittag_leffler(0.6, zi).value
    assert np.all(err >= 0)


def test_backends_agree():
    z = -np.geomspace(1e-4, 1e3, 400)
    for beta in (0.3, 0.75):
        a = _kernels_py.ml_core(beta, z)
        if kernels.BACKEND == "cython":
            b = kernels.ml_core(beta, z)
            np.testing.assert_allclose(b[0], a[0], rtol=1e-12, atol=1e-300)
            np.testing.assert_array_equal(b[1], a[1])


# Tauberian constant

def test_tauberian_examples():
    for n in (1, 2, 3):
        assert tauberian_K(n, n / 2) == pytest.approx((2 * math.pi) ** (-n / 2), rel=1e-14)
    assert tauberian_K(1, 0.5) == pytest.approx(0.3989422804014327, rel=1e-14)
    ref = gamma_mp(0.6) / (2 ** 0.8 * math.pi * gamma_mp(0.4))
    assert tauberian_K(2, 0.8) == pytest.approx(ref, rel=1e-13)


@pytest.mark.parametrize("n,kappa", [(1, 0.0), (1, 1.0), (2, 2.5), (1, -0.3)])
def test_tauberian_domain(n, kappa):
    with pytest.raises(DomainError):
        tauberian_K(n, kappa)


def test_sphere_area():
    assert sphere_area(1) == pytest.approx(2.0)
    assert sphere_area(2) == pytest.approx(2 * math.pi)
    assert sphere_area(3) == pytest.approx(4 * math.pi)
