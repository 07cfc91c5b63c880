"""Experiment configuration: parsing, validation and the normalised echo."""

from dataclasses import dataclass
import hashlib
import json
from typing import Any, Dict, List

import numpy as np
import yaml

from .fields import GridSpec, make_spectral_density, L0_for_cutoff, GridError
from .hermite import Subordinator, DegenerateSubordinatorError
from .kinetic import params_from_B, params_from_P, ConditionError, SystemParams
from .scaling import ScalingConfig, ConfigError
from .specfun import DomainError

CHECK_KINDS = ("limit", "zero", "ratio", "vanish")


class ConfigValidationError(ValueError):
    """Aggregate of every violated condition."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass
class ExperimentConfig:
    params: SystemParams
    f1: Any
    f2: Any
    h1: Subordinator
    h2: Subordinator
    grid: GridSpec
    scaling: ScalingConfig
    seed: int
    out: str
    checks: List[dict]
    normalized: Dict[str, Any]

    @property
    def config_hash(self):
        blob = json.dumps(self.normalized, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


def load(path):
    with open(path) as fh:
        return yaml.safe_load(fh)


def _sub(spec, errs, j):
    spec = dict(spec or {"kind": "identity"})
    kind = spec.get("kind", "identity")
    try:
        if kind == "table":
            h = Subordinator("table", table_u=spec["u"], table_h=spec["h"])
            norm = {"kind": kind, "u": [float(v) for v in spec["u"]], "h": [float(v) for v in spec["h"]]}
        elif kind == "pure_hermite":
            h = Subordinator(kind, order=int(spec.get("order", 1)))
            norm = {"kind": kind, "order": h.order}
        else:
            h = Subordinator(kind)
            norm = {"kind": kind}
        return h, norm
    except (DomainError, DegenerateSubordinatorError, KeyError) as exc:
        errs.append(f"subordinator {j}: {exc}")
        return None, spec


def _system(sysd, errs):
    mu = float(sysd.get("mu", 1.0))
    alpha = float(sysd.get("alpha", 1.5))
    gam = float(sysd.get("gamma", 0.0))
    beta = float(sysd.get("beta", 1.0))
    try:
        if "B" in sysd:
            return params_from_B(sysd["B"], mu, alpha, gam, beta)
        if "P" in sysd:
            d1, d2 = float(sysd.get("d1", 0.0)), float(sysd.get("d2", 0.0))
            P = np.asarray(sysd["P"], dtype=float)
            if d1 >= d2 and abs(np.linalg.det(P) - 1.0) <= 1e-12:
                # already normalised: keep it bit for bit so the echo round-trips
                return SystemParams(mu, alpha, gam, beta, tuple(tuple(r) for r in P.tolist()), d1, d2)
            return params_from_P(sysd["P"], float(sysd.get("d1", 0.0)), float(sysd.get("d2", 0.0)),
                                 mu, alpha, gam, beta)
        return SystemParams(mu, alpha, gam, beta)
    except ConditionError as exc:
        errs.append(f"Condition A (diagonalisable B): {exc}")
    except DomainError as exc:
        errs.append(f"system parameters: {exc}")
    return None


def validate(raw):
    """Validate a raw configuration mapping.

    Returns an :class:`ExperimentConfig`; raises ConfigValidationError
    listing every violated condition otherwise.  Nothing is computed
    beyond the cheap derived quantities.
    """
    errs = []
    if not isinstance(raw, dict):
        raise ConfigValidationError(["configuration must be a mapping"])
    params = _system(dict(raw.get("system", {})), errs)

    fd = dict(raw.get("fields", {}))
    n = int(fd.get("n", 1))
    comps = list(fd.get("components", [{"kappa": 0.5, "L0": 1.0}]))
    if len(comps) == 1:
        comps = comps * 2
    subs_raw = list(raw.get("subordinators", [{"kind": "identity"}]))
    if len(subs_raw) == 1:
        subs_raw = subs_raw * 2
    hs = [_sub(s, errs, j + 1) for j, s in enumerate(subs_raw[:2])]
    dens = []
    for j, c in enumerate(comps[:2]):
        kappa = float(c.get("kappa", 0.5))
        h = hs[j][0]
        m = h.rank if h is not None else 1
        if not (0 < kappa < n / m):
            errs.append(f"Condition D range: component {j + 1} has kappa*m = {kappa * m:g} >= n = {n} "
                        f"(needs 0 < kappa < n/m)")
            dens.append(None)
            continue
        try:
            L0 = float(c["L0"]) if "L0" in c else L0_for_cutoff(n, kappa, float(c["a"]))
            dens.append(make_spectral_density(n, kappa, L0))
        except (DomainError, KeyError) as exc:
            errs.append(f"field component {j + 1}: {exc}")
            dens.append(None)

    gd = dict(raw.get("grid", {}))
    try:
        grid = GridSpec(n, int(gd.get("pts", 16384)), float(gd.get("box", 400.0)))
    except GridError as exc:
        errs.append(f"grid: {exc}")
        grid = None

    sd = dict(raw.get("scaling", {}))
    try:
        probes = [tuple(tuple(float(v) for v in pt) for pt in pr) for pr in sd.get("probes", [[[1.0, 0.0], [1.0, 0.0]]])]
        sc = ScalingConfig(
            mode=sd.get("mode", "macro"),
            eps_list=[float(e) for e in sd.get("eps", [0.4, 0.2, 0.1, 0.05])],
            probes=probes,
            replicates=int(sd.get("replicates", 2000)),
            chi=float(sd.get("chi", 1.0)),
            beta_b_scaling=bool(sd.get("beta_b_scaling", True)),
            box_y=None if sd.get("box_y") is None else float(sd["box_y"]),
            chunk=int(sd.get("chunk", 250)),
            centering=sd.get("centering", "exact"),
        )
    except (ConfigError, TypeError, ValueError) as exc:
        errs.append(f"scaling: {exc}")
        sc = None

    if params is not None and sc is not None and None not in dens and None not in [h for h, _ in hs]:
        beta = params.beta
        c_exp = params.alpha + params.gamma_b if sc.mode == "micro" else params.alpha
        for j, (f, (h, _)) in enumerate(zip(dens, hs), start=1):
            if beta < 1 and h.rank * f.kappa >= min(2 * c_exp, n):
                errs.append(f"fractional LRD range: component {j} needs m*kappa < min(2*{c_exp:g}, n)")
        if grid is not None and n != 1:
            errs.append("scaling experiments run in dimension n=1")
        if grid is not None and n == 1:
            eps_min = sc.eps_list[-1]
            for pr in sc.probes:
                for (_, x) in pr:
                    if sc.mode == "macro":
                        xr = abs(x) * eps_min ** (-beta / params.alpha)
                        half = 0.5 * grid.box
                    else:
                        half = 0.5 * (sc.box_y if sc.box_y is not None else grid.box)
                        xr = abs(x)
                    if xr >= half:
                        errs.append(f"domain size: probe x={x:g} maps to {xr:.4g} beyond the half-box {half:.4g}")

    checks = []
    for ck in raw.get("checks", []) or []:
        ck = dict(ck)
        if ck.get("kind") not in CHECK_KINDS:
            errs.append(f"check {ck.get('name')!r}: kind must be one of {CHECK_KINDS}")
        checks.append(ck)

    seed = raw.get("seed", 0)
    if not isinstance(seed, int) or seed < 0:
        errs.append("seed must be a non-negative integer")
    if errs:
        raise ConfigValidationError(errs)

    norm = {
        "system": {"mu": params.mu, "alpha": params.alpha, "gamma": params.gamma_b, "beta": params.beta,
                   "P": [list(r) for r in params.P_], "d1": params.d1, "d2": params.d2},
        "fields": {"n": n, "components": [{"kappa": f.kappa, "L0": f.L0} for f in dens]},
        "subordinators": [s for _, s in hs],
        "grid": {"pts": grid.pts, "box": grid.box},
        "scaling": {"mode": sc.mode, "eps": list(sc.eps_list), "chi": sc.chi,
                    "probes": [[list(a), list(b)] for a, b in sc.probes], "replicates": sc.replicates,
                    "beta_b_scaling": sc.beta_b_scaling, "box_y": sc.box_y, "chunk": sc.chunk,
                    "centering": sc.centering},
        "checks": checks,
        "seed": seed,
        "out": str(raw.get("out", "results")),
    }
    return ExperimentConfig(params, dens[0], dens[1], hs[0][0], hs[1][0], grid, sc, seed,
                            norm["out"], checks, norm)


def derived(cfg):
    """Derived quantities echoed by ``validate``."""
    return {
        "a": [cfg.f1.a, cfg.f2.a],
        "L0": [cfg.f1.L0, cfg.f2.L0],
        "d1": cfg.params.d1,
        "d2": cfg.params.d2,
        "P": [list(r) for r in cfg.params.P_],
        "ranks": [cfg.h1.rank, cfg.h2.rank],
        "C0": [cfg.h1.C0, cfg.h2.C0],
        "Cm": [cfg.h1.Cm, cfg.h2.Cm],
    }


def dump(normalized):
    return yaml.safe_dump(normalized, sort_keys=True)
