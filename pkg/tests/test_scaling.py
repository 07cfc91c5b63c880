import csv
import io
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rbhomog.fields import GridSpec, L0_for_cutoff, make_spectral_density
from rbhomog.hermite import Subordinator
from rbhomog.kinetic import SystemParams
from rbhomog.limits import LimitCovQuery, limit_cov
from rbhomog.scaling import (CSV_COLUMNS, ConfigError, InsufficientDataError, ScalingConfig,
                             estimate_covariance, lattice_expectation, normalization_macro,
                             normalization_micro, rows_to_csv, run_experiment, run_macro_experiment,
                             run_micro_experiment, write_csv)

GRID = GridSpec(1, 2048, 200.0)
PROBES = [((1.0, 0.0), (1.0, 0.0)), ((0.5, 0.3), (1.0, -0.2))]
IDENT = Subordinator("identity")


def _dens(kappa, a):
    return make_spectral_density(1, kappa, L0_for_cutoff(1, kappa, a))


@pytest.fixture(scope="module")
def macro_run():
    f = _dens(0.5, 0.2)
    p = SystemParams(1.0, 1.5)
    cfg = ScalingConfig("macro", [0.4, 0.2], PROBES, replicates=1000, chunk=250)
    return cfg, p, f, run_experiment(cfg, p, f, f, IDENT, IDENT, 3, GRID)


@pytest.fixture(scope="module")
def micro_run():
    f = _dens(0.5, 1.0)
    p = SystemParams(1.0, 1.5)
    cfg = ScalingConfig("micro", [0.4, 0.2], PROBES, replicates=1000, chunk=250, box_y=50.0)
    return cfg, p, f, run_experiment(cfg, p, f, f, IDENT, IDENT, 3, GRID)


# normalisation

def test_normalization_examples():
    assert normalization_micro(1.0, 1, 0.5, 1.0, 1.0) == 1.0
    assert normalization_micro(0.01, 1, 0.5, 2.0, 1.0) == pytest.approx(10.0)
    assert normalization_micro(0.01, 2, 0.5, 1.0, 4.0) == pytest.approx(2.5)
    assert normalization_macro(1.0, 1, 0.3, 1.5, 1.0) == 1.0
    # eps^(m kappa/alpha) = 0.01^(1/2) with m kappa = 0.75, alpha = 1.5; L0 = 4
    assert normalization_macro(0.01, 1, 0.75, 1.5, 4.0) == pytest.approx(1 / math.sqrt(0.1 * 4.0))
    # beta rescales the exponent
    assert normalization_macro(0.01, 1, 0.75, 1.5, 1.0, beta=0.5) == pytest.approx(0.01 ** (-0.125))


@settings(max_examples=50, deadline=None)
@given(m=st.integers(1, 3), kappa=st.floats(0.05, 0.3), chi=st.floats(0.2, 3.0),
       alpha=st.floats(0.3, 2.0), L0=st.floats(0.1, 10.0))
def test_normalization_log_slopes(m, kappa, chi, alpha, L0):
    e1, e2 = 0.1, 0.001
    s = (math.log(normalization_micro(e2, m, kappa, chi, L0)) -
         math.log(normalization_micro(e1, m, kappa, chi, L0))) / math.log(e2 / e1)
    assert s == pytest.approx(-m * kappa * chi / 2, rel=1e-10)
    s = (math.log(normalization_macro(e2, m, kappa, alpha, L0)) -
         math.log(normalization_macro(e1, m, kappa, alpha, L0))) / math.log(e2 / e1)
    assert s == pytest.approx(-m * kappa / alpha / 2, rel=1e-10)


# covariance estimator

def test_estimate_constant_has_zero_se():
    e = estimate_covariance(np.full(50, 2.0))
    assert e.mean == 4.0 and e.se == 0.0 and e.n_rep == 50
    e = estimate_covariance(np.full(50, 2.0), center=True)
    assert e.mean == 0.0


def test_estimate_iid_normal():
    x = np.random.default_rng(0).standard_normal(20000)
    e = estimate_covariance(x)
    assert abs(e.mean - 1.0) <= 4 * e.se
    assert e.se == pytest.approx(math.sqrt(2 / 20000), rel=0.05)


def test_estimate_cross_covariance():
    rng = np.random.default_rng(1)
    L = np.linalg.cholesky(np.array([[1.0, 0.7], [0.7, 1.0]]))
    z = rng.standard_normal((20000, 2)) @ L.T
    e = estimate_covariance(z[:, 0], z[:, 1], comp_pair="uv")
    assert abs(e.mean - 0.7) <= 4 * e.se
    c = estimate_covariance(z[:, 0] + 3.0, z[:, 1] - 1.0, center=True)
    assert c.mean == pytest.approx(np.cov(z[:, 0], z[:, 1])[0, 1], rel=1e-12)
    assert 0 < c.se < 0.05


def test_estimate_insufficient():
    with pytest.raises(InsufficientDataError):
        estimate_covariance([1.0])
    with pytest.raises(InsufficientDataError):
        estimate_covariance([1.0, 2.0], [1.0])


# configuration

@pytest.mark.parametrize("kw", [
    dict(mode="meso"),
    dict(eps_list=[0.2, 0.4]),
    dict(eps_list=[1.5]),
    dict(eps_list=[]),
    dict(replicates=50),
    dict(chi=0.0),
    dict(probes=[((0.0, 0.0), (1.0, 0.0))]),
    dict(centering="sample"),
])
def test_config_rejects(kw):
    base = dict(mode="macro", eps_list=[0.4, 0.2], probes=PROBES)
    base.update(kw)
    with pytest.raises(ConfigError):
        ScalingConfig(**base)


def test_mode_mismatch():
    f = _dens(0.5, 0.2)
    p = SystemParams(1.0, 1.5)
    cfg = ScalingConfig("macro", [0.4], PROBES, replicates=100)
    with pytest.raises(ConfigError):
        run_micro_experiment(cfg, p, f, f, IDENT, IDENT, 0, GRID)
    cfg = ScalingConfig("micro", [0.4], PROBES, replicates=100, box_y=50.0)
    with pytest.raises(ConfigError):
        run_macro_experiment(cfg, p, f, f, IDENT, IDENT, 0, GRID)


def test_preconditions():
    cfg = ScalingConfig("macro", [0.4], PROBES, replicates=100)
    f = _dens(0.6, 0.2)
    h2 = Subordinator("pure_hermite", order=2)
    with pytest.raises(ConfigError, match="LRD"):
        run_experiment(cfg, SystemParams(1.0, 1.5), f, f, h2, h2, 0, GRID)
    bad = SystemParams(1.0, 1.5, d1=-1.0, d2=1.0)
    g = _dens(0.5, 0.2)
    with pytest.raises(ConfigError, match="d1 < d2"):
        run_experiment(cfg, bad, g, g, IDENT, IDENT, 0, GRID)
    far = ScalingConfig("macro", [0.01], [((1.0, 50.0), (1.0, 0.0))], replicates=100)
    with pytest.raises(ConfigError, match="half-box"):
        run_experiment(far, SystemParams(1.0, 1.5), g, g, IDENT, IDENT, 0, GRID)
    with pytest.raises(ConfigError, match="n=1"):
        run_experiment(cfg, SystemParams(1.0, 1.5), g, g, IDENT, IDENT, 0, GridSpec(2, 64, 64.0))


# Monte-Carlo against the exact lattice expectation

@pytest.mark.parametrize("which", ["macro_run", "micro_run"])
def test_mc_matches_lattice_expectation(which, request):
    cfg, p, f, res = request.getfixturevalue(which)
    L = lattice_expectation(cfg, p, f, f, IDENT, IDENT, GRID)
    rows = res.rows()
    assert len(rows) == len(cfg.eps_list) * len(PROBES) * 4
    for r in rows:
        ref = L[r["eps"]][(r["probe_id"], r["comp_pair"])]
        assert abs(r["cov_mean"] - ref) <= 4 * r["cov_se"], r


@pytest.mark.parametrize("which", ["macro_run", "micro_run"])
def test_cross_components_vanish(which, request):
    cfg, p, f, res = request.getfixturevalue(which)
    for r in res.rows():
        if r["comp_pair"] in ("uv", "vu"):
            assert abs(r["cov_mean"]) <= 4 * r["cov_se"]
            assert r["limit_value"] == pytest.approx(0.0, abs=1e-12)


def test_samples_shape_and_estimate(macro_run):
    cfg, p, f, res = macro_run
    er = res.per_eps[0]
    assert er.samples.shape == (1000, 2, 3)
    row = res.estimate(1, 0, "uu")
    assert row["eps"] == 0.2 and row["n_rep"] == 1000
    with pytest.raises(KeyError):
        res.estimate(0, 7, "uu")


def test_determinism_and_workers():
    f = _dens(0.5, 0.2)
    p = SystemParams(1.0, 1.5)
    cfg = ScalingConfig("macro", [0.4], PROBES, replicates=300, chunk=100)
    a = run_experiment(cfg, p, f, f, IDENT, IDENT, 11, GRID, workers=1, limits=False)
    b = run_experiment(cfg, p, f, f, IDENT, IDENT, 11, GRID, workers=2, limits=False)
    c = run_experiment(cfg, p, f, f, IDENT, IDENT, 12, GRID, workers=1, limits=False)
    assert a.per_eps[0].samples.tobytes() == b.per_eps[0].samples.tobytes()
    assert a.per_eps[0].samples.tobytes() != c.per_eps[0].samples.tobytes()


def test_decoupled_system_reduces_to_single():
    # P = I and d1 = d2: each component evolves alone
    f1, f2 = _dens(0.3, 0.2), _dens(0.6, 0.2)
    p = SystemParams(1.0, 1.5)
    cfg = ScalingConfig("macro", [0.4, 0.2], PROBES, replicates=100)
    L12 = lattice_expectation(cfg, p, f1, f2, IDENT, IDENT, GRID)
    L11 = lattice_expectation(cfg, p, f1, f1, IDENT, IDENT, GRID)
    for e in cfg.eps_list:
        for k in range(len(PROBES)):
            assert L12[e][(k, "uu")] == pytest.approx(L11[e][(k, "uu")], rel=1e-12)
            assert L12[e][(k, "uv")] == 0.0
    res = run_experiment(cfg, p, f1, f2, IDENT, IDENT, 0, GRID)
    for k, pr in enumerate(PROBES):
        ref, _ = limit_cov(LimitCovQuery("macro_single", p, [1], [0.3], [1.0], pr))
        assert res.limits[k][0][0, 0] == pytest.approx(float(ref), rel=1e-10)


def test_rank_two_isolation_trend():
    # exact expectation of the rescaled rank-2 covariance approaches the limit as eps shrinks
    h = Subordinator("pure_hermite", order=2)
    p = SystemParams(1.0, 1.5, gamma_b=0.5)
    f = _dens(0.2, 1.0)
    g = GridSpec(1, 2 ** 14, 400.0)
    cfg = ScalingConfig("micro", [0.4, 0.2, 0.1, 0.05, 0.02], [((1.0, 0.0), (1.0, 0.0))], box_y=100.0)
    L = lattice_expectation(cfg, p, f, f, h, h, g)
    lim, _ = limit_cov(LimitCovQuery("micro_single", p, [2], [0.2], [1.0], ((1.0, 0.0), (1.0, 0.0))))
    ratio = np.array([L[e][(0, "uu")] / float(lim) for e in cfg.eps_list])
    assert np.all(np.diff(np.abs(1 - ratio)) < 0)
    assert abs(1 - ratio[-1]) < 0.05


# CSV

def test_csv_format(macro_run, tmp_path):
    cfg, p, f, res = macro_run
    text = rows_to_csv(res.rows())
    rd = list(csv.reader(io.StringIO(text)))
    assert tuple(rd[0]) == CSV_COLUMNS
    assert len(rd) == 1 + len(res.rows())
    first = dict(zip(rd[0], rd[1]))
    assert float(first["cov_mean"]) == res.rows()[0]["cov_mean"]
    assert int(first["n_rep"]) == 1000 and first["comp_pair"] == "uu"
    path = tmp_path / "rows.csv"
    write_csv(res.rows(), path)
    assert path.read_text() == text
