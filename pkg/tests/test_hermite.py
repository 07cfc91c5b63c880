import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rbhomog import kernels
from rbhomog.hermite import (DegenerateSubordinatorError, Subordinator, hermite_coeffs,
                             hermite_poly, hermite_rank, sign_coeffs)
from rbhomog.specfun import DomainError

from oracles import hermite_exact


def test_hermite_poly_examples():
    for u in (0.0, 1.0, 2.0):
        assert hermite_poly(2, u) == u * u - 1
    assert hermite_poly(3, 2.0) == 2.0
    assert hermite_poly(10, 1.3) == pytest.approx(hermite_exact(10, "1.3"), rel=1e-13)
    assert hermite_poly(0, 5.0) == 1.0


def test_hermite_poly_against_exact_recurrence():
    for sigma in (5, 17, 33, 60):
        for u in ("-3.7", "0.25", "2.5", "6"):
            ref = hermite_exact(sigma, u)
            assert hermite_poly(sigma, float(u)) == pytest.approx(ref, rel=1e-11, abs=1e-9)


@pytest.mark.parametrize("sigma", [-1, 61])
def test_hermite_poly_domain(sigma):
    with pytest.raises(DomainError):
        hermite_poly(sigma, 0.3)


def test_orthonormality():
    # independent rule: numpy's probabilists' Gauss-Hermite nodes and explicit recurrence
    x, w = np.polynomial.hermite_e.hermegauss(60)
    w = w / math.sqrt(2 * math.pi)
    H = np.array([hermite_poly(s, x) / math.sqrt(math.factorial(s)) for s in range(21)])
    G = (H * w) @ H.T
    assert np.max(np.abs(G - np.eye(21))) <= 1e-10


def test_coeff_examples():
    c = hermite_coeffs(lambda u: u, 12)
    assert c[1] == pytest.approx(1.0, abs=1e-12)
    assert np.max(np.abs(np.delete(c, 1))) <= 1e-12
    c = hermite_coeffs(lambda u: u * u - 1, 12)
    assert c[2] == pytest.approx(math.sqrt(2), abs=1e-12)
    assert np.max(np.abs(np.delete(c, 2))) <= 1e-12


def test_sign_coefficients():
    c = sign_coeffs(41)
    # E|Z| = sqrt(2/pi)
    assert c[1] == pytest.approx(math.sqrt(2 / math.pi), rel=1e-15)
    assert np.all(c[0::2] == 0)
    # closed form agrees with the panel quadrature cross-check
    q = hermite_coeffs(np.sign, 41, breakpoints=[0.0])
    assert np.max(np.abs(q - c)) <= 1e-6
    s = Subordinator("sign")
    assert s.rank == 1 and s.Cm == pytest.approx(0.7978845608028654)


def test_sign_coeffs_exact_form():
    # C_{2k+1}^2 = (2/pi) binom(2k,k) 4^-k / (2k+1)
    c = sign_coeffs(61)
    for k in range(31):
        ref = 2 / math.pi * math.comb(2 * k, k) / 4 ** k / (2 * k + 1)
        assert c[2 * k + 1] ** 2 == pytest.approx(ref, rel=1e-12)


def test_parseval_sign():
    c = sign_coeffs(41)
    partial = float(np.sum(c ** 2))
    with mp.workdps(30):
        tail = 2 / mp.pi * mp.nsum(lambda k: mp.binomial(2 * k, k) / 4 ** k / (2 * k + 1), [21, mp.inf],
                               method="euler-maclaurin")
    tail = float(tail)
    # the truncation tail at 41 is far larger than 1e-3; see the decisions ledger
    assert tail == pytest.approx(0.0785, abs=5e-4)
    assert partial == pytest.approx(1.0 - tail, abs=1e-12)
    sums = [float(np.sum(sign_coeffs(s) ** 2)) for s in (41, 401, 4001, 400001)]
    assert np.all(np.diff(sums) > 0)
    assert abs(sums[-1] - 1.0) <= 1e-3
    assert sums[-1] <= 1.0


def test_coefficients_from_quadrature_match_cubic():
    c = hermite_coeffs(lambda u: u ** 3, 10)
    assert c[1] == pytest.approx(3.0, abs=1e-10)
    assert c[3] == pytest.approx(math.sqrt(6.0), abs=1e-10)
    assert hermite_rank(c) == 1


def test_rank_examples():
    assert hermite_rank(hermite_coeffs(lambda u: u, 8)) == 1
    assert hermite_rank(hermite_coeffs(lambda u: u * u - 1, 8)) == 2
    assert hermite_rank(hermite_coeffs(lambda u: u ** 4 - 6 * u * u + 3, 8)) == 4
    with pytest.raises(DegenerateSubordinatorError):
        hermite_rank(hermite_coeffs(lambda u: 0 * u + 2.0, 8))


@settings(max_examples=40, deadline=None)
@given(m=st.integers(1, 8), scale=st.floats(0.1, 10.0), shift=st.floats(-3, 3))
def test_rank_of_scaled_pure_hermite(m, scale, shift):
    # h = shift + scale * H_m / sqrt(m!) has rank m and C_0 = shift
    h = lambda u: shift + scale * hermite_poly(m, u) / math.sqrt(math.factorial(m))
    c = hermite_coeffs(h, 10)
    assert hermite_rank(c) == m
    assert c[0] == pytest.approx(shift, abs=1e-9)
    assert c[m] == pytest.approx(scale, rel=1e-9)


def test_non_integrable_is_rejected():
    with pytest.raises(DomainError):
        with np.errstate(over="ignore"):
            hermite_coeffs(lambda u: np.exp(u * u), 6)


def test_subordinator_kinds():
    ident = Subordinator("identity")
    assert ident.rank == 1 and ident.C0 == 0.0 and ident.Cm == 1.0
    ph = Subordinator("pure_hermite", order=3)
    assert ph.rank == 3 and ph.Cm == 1.0
    u = np.linspace(-2, 2, 7)
    np.testing.assert_allclose(ph(u), (u ** 3 - 3 * u) / math.sqrt(6))
    with pytest.raises(DomainError):
        Subordinator("cubic")
    with pytest.raises(DomainError):
        Subordinator("pure_hermite", order=0)


def test_table_subordinator():
    # piecewise-linear |u| on a wide table is even with rank 2
    u = np.linspace(-8, 8, 33)
    t = Subordinator("table", table_u=u, table_h=np.abs(u))
    assert t.rank == 2
    assert t.C0 == pytest.approx(math.sqrt(2 / math.pi), abs=1e-6)
    # Bessel inequality, equality up to truncation
    assert np.sum(t.coeffs ** 2) <= t.l2_norm ** 2 + 1e-9
    assert t.l2_norm == pytest.approx(1.0, abs=1e-6)
    assert np.sum(t.coeffs ** 2) == pytest.approx(1.0, abs=2e-3)
    with pytest.raises(DomainError):
        Subordinator("table", table_u=[1.0, 0.0], table_h=[0.0, 1.0])


def test_subordinator_invariants_ranks():
    for s in (Subordinator("identity"), Subordinator("pure_hermite", order=2), Subordinator("sign"),
              Subordinator("table", table_u=[-5, 0, 5], table_h=[-5, 1, 5])):
        c = s.coeffs
        assert np.all(np.abs(c[1:s.rank]) <= 1e-5)
        assert abs(c[s.rank]) > 1e-5
        assert np.sum(c ** 2) <= s.l2_norm ** 2 + 1e-6


def _gh2(h, r, nodes=80):
    # 2-D Gauss-Hermite expectation of h(X) h(Y), corr(X, Y) = r
    x, w = np.polynomial.hermite_e.hermegauss(nodes)
    w = w / math.sqrt(2 * math.pi)
    X = x[:, None]
    Y = r * x[:, None] + math.sqrt(1 - r * r) * x[None, :]
    return float(np.sum(w[:, None] * w[None, :] * h(X) * h(Y)))


@pytest.mark.parametrize("r", [0.0, 0.3, 0.9])
def test_covariance_law_smooth(r):
    for h in (lambda u: u, lambda u: u * u - 1):
        c = hermite_coeffs(h, 20)
        series = float(np.sum(c[1:] ** 2 * r ** np.arange(1, 21)))
        assert series == pytest.approx(_gh2(h, r) - c[0] ** 2, abs=1e-6)


@pytest.mark.parametrize("r", [0.0, 0.3, 0.9])
def test_covariance_law_sign(r):
    # E[sign X sign Y] = (2/pi) arcsin r; a long truncation makes the series tail negligible
    c = sign_coeffs(2001)
    series = float(np.sum(c[1:] ** 2 * r ** np.arange(1, 2002)))
    assert series == pytest.approx(2 / math.pi * math.asin(r), abs=1e-6)


def test_backends_agree_on_hermite_table():
    u = np.linspace(-9, 9, 301)
    tabs = [mod.hermite_table(40, u) for mod in kernels.backends().values()]
    for t in tabs[1:]:
        np.testing.assert_allclose(t, tabs[0], rtol=1e-12, atol=1e-12)
    for s in (0, 1, 7, 40):
        np.testing.assert_allclose(tabs[0][s], hermite_poly(s, u) / math.sqrt(math.factorial(s)),
                                   rtol=1e-10, atol=1e-10)
