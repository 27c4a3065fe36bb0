"""Acceptance experiments, shared by the test suite and ``gapfield verify``.

Each ``criterion_NN`` function runs one desk-scale experiment and returns
a :class:`CriterionResult` holding the measured numbers and the verdict at
the fixed tolerances.  Sweeps used by several criteria are cached.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .geometry import Curve, place_at_gap
from .harness.oracle import exterior_probes, oracle_for_pair
from .harness.sweep import fit_rate, measure, orthogonalized_background
from .potentials import pair_field
from .singular import DiskSingular, disk_fixed_points, fixed_point_predictor
from .solver import GapProblem, HarmonicBackground, solve_perfect
from .spectral import spectrum

SWEEP_EPS = tuple(np.geomspace(1e-1, 1e-4, 7))
H_X = HarmonicBackground.linear(1.0, 0.0)
H_Y = HarmonicBackground.linear(0.0, 1.0)
# second background for orthogonalization: Re (z - 1/2)^3
H0 = HarmonicBackground.from_mapping({"re3": 1.0, "re2": -1.5, "re1": 0.75,
                                      "const": -0.125})


def unit_disks():
    return Curve.circle(radius=1.0), Curve.circle(radius=1.0)


def ellipse_shapes():
    """Major vertex (curvature 1.5) facing a minor vertex (curvature 0.8/1.44)."""
    return (Curve.ellipse(a=1.5, b=1.0),
            Curve.ellipse(a=1.2, b=0.8, angle=np.pi / 2))


SHAPES = {"disks": unit_disks, "ellipses": ellipse_shapes}


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    measured: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        items = ", ".join(f"{k}={_short(v)}" for k, v in self.measured.items())
        return f"[{status}] criterion {self.number:2d} {self.title}: {items}"


def _short(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.4g}"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_short(x) for x in v) + "]"
    return str(v)


def _timed(fn):
    def wrapper():
        t = time.perf_counter()
        res = fn()
        res.seconds = time.perf_counter() - t
        return res
    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


@lru_cache(maxsize=8)
def problem(shapes, eps, n=None):
    s1, s2 = SHAPES[shapes]()
    return GapProblem(place_at_gap(s1, s2, eps), n)


def _spread(vals):
    vals = np.abs(np.asarray(vals, dtype=float))
    return float(vals.max() / vals.min())


@lru_cache(maxsize=1)
def disk_sweep():
    """Conducting, insulating and orthogonalized rows for unit disks."""
    out = {"conducting": [], "insulating": [], "orthogonal": []}
    for eps in SWEEP_EPS:
        p = GapProblem(place_at_gap(*unit_disks(), eps))
        out["conducting"].append(measure(p, H_X))
        out["insulating"].append(measure(p, H_Y, "insulating", "none"))
        out["orthogonal"].append(measure(p, orthogonalized_background(H_X, H0, p),
                                         spectrum_mode="none"))
    return out


@lru_cache(maxsize=1)
def ellipse_sweep():
    rows = []
    for eps in SWEEP_EPS:
        p = GapProblem(place_at_gap(*ellipse_shapes(), eps))
        rows.append(measure(p, H_X))
    return rows


def _row_at(rows, eps):
    return min(rows, key=lambda r: abs(np.log(r.eps / eps)))


# criteria -------------------------------------------------------------------
@_timed
def criterion_01():
    """One-sided normal derivatives of the single layer match (+-1/2 + K*) phi."""
    p = problem("ellipses", 0.1, 256)
    rng = np.random.default_rng(1)
    dens = []
    for g in p.grids:
        a = rng.normal(size=5) / (1 + np.arange(5)) ** 2
        b = rng.normal(size=5) / (1 + np.arange(5)) ** 2
        k = np.arange(5)[:, None]
        dens.append(a @ np.cos(k * g.t) + b @ np.sin(k * g.t))
    phi = np.concatenate(dens)
    trace = p.S.matrix @ phi
    kphi = p.K.matrix @ phi
    delta = 1e-5
    err = 0.0
    idx = np.concatenate([np.arange(0, 256, 8), 256 + np.arange(0, 256, 8)])
    x, nu = p.nodes[idx], p.normals[idx]
    f = {s: pair_field(p.grids, phi, x + s * delta * nu, interior=True)[0]
         for s in (-2, -1, 1, 2)}
    f0 = trace[idx]
    d_out = (-3 * f0 + 4 * f[1] - f[2]) / (2 * delta)
    d_in = (3 * f0 - 4 * f[-1] + f[-2]) / (2 * delta)
    err_out = np.max(np.abs(d_out - (0.5 * phi[idx] + kphi[idx])))
    err_in = np.max(np.abs(d_in - (-0.5 * phi[idx] + kphi[idx])))
    err = max(err_out, err_in)
    return CriterionResult(1, "jump relation", err <= 1e-6,
                           {"max_err_exterior": err_out, "max_err_interior": err_in})


@_timed
def criterion_02():
    """Exactly two eigenvalues at 1/2; spectrum inside (-1/2, 1/2]."""
    ok = True
    mults, tops, bottoms = [], [], []
    for shapes in ("disks", "ellipses"):
        for eps in (1e-1, 1e-2, 1e-3):
            rep = spectrum(problem(shapes, eps).K)
            mults.append(rep.multiplicity_half)
            tops.append(float(rep.eigenvalues[0] - 0.5))
            bottoms.append(float(rep.eigenvalues[-1]))
            ok &= rep.multiplicity_half == 2 and rep.contained
    return CriterionResult(2, "multiplicity of 1/2", ok,
                           {"multiplicities": mults, "max_top_minus_half": max(tops),
                            "min_eigenvalue": min(bottoms)})


@_timed
def criterion_03():
    """Unit opposite fluxes of g and eigen-residual."""
    flux_err, res = 0.0, 0.0
    for shapes in ("disks", "ellipses"):
        for eps in (1e-1, 1e-2, 1e-3):
            eig = problem(shapes, eps).eig
            flux_err = max(flux_err, abs(eig.fluxes[0] - 1), abs(eig.fluxes[1] + 1))
            res = max(res, eig.residual)
    return CriterionResult(3, "eigenfunction normalization",
                           flux_err <= 1e-8 and res <= 1e-6,
                           {"max_flux_error": flux_err, "max_residual": res})


@_timed
def criterion_04():
    """Numeric q equals the disk closed form."""
    p = problem("disks", 0.05, 512)
    pts = exterior_probes(p.pair, 200, np.random.default_rng(4))
    diff = np.abs(p.q.value(pts) - p.disks.value(pts))
    return CriterionResult(4, "disk uniqueness oracle", diff.max() <= 1e-6,
                           {"max_abs_diff": diff.max(), "probes": len(pts)})


@_timed
def criterion_05():
    """Fixed points approach the square-root predictor with an O(eps) remainder."""
    eps = np.geomspace(1e-4, 1e-1, 13)
    slopes = []
    for r1, r2 in ((1.0, 1.0), (1.0, 2.0), (0.5, 1.5)):
        res = []
        for e in eps:
            p1, p2 = disk_fixed_points((-e / 2 - r1, 0.0), r1, (e / 2 + r2, 0.0), r2)
            q1, q2 = fixed_point_predictor(r1, r2, e)
            res.append(max(abs(p1[0] - q1), abs(p2[0] - q2)))
        slopes.append(float(np.polyfit(np.log(eps), np.log(res), 1)[0]))
    return CriterionResult(5, "fixed-point asymptotics", min(slopes) >= 0.95,
                           {"residual_slopes": slopes})


@_timed
def criterion_06():
    """q-gap against its leading-order prediction on an ellipse pair."""
    rows = ellipse_sweep()
    ratio = _row_at(rows, 1e-4).q_gap / _row_at(rows, 1e-4).q_gap_predicted
    resid = [{"eps": r.eps, "d": r.q_gap - r.q_gap_predicted} for r in rows]
    slope = fit_rate(resid, "eps", "d")[0]
    return CriterionResult(6, "q-gap asymptotics", 0.9 <= ratio <= 1.1 and slope >= 0.9,
                           {"ratio_at_1e-4": ratio, "residual_slope": slope})


@_timed
def criterion_07():
    """<h, g> scales like sqrt(eps)."""
    rows = ellipse_sweep()
    spread = _spread([r.hg / np.sqrt(r.eps) for r in rows])
    slope = fit_rate(rows, "eps", "hg")[0]
    return CriterionResult(7, "<h,g> = O(sqrt eps)", spread <= 2 and slope >= 0.45,
                           {"spread": spread, "slope": slope})


@_timed
def criterion_08():
    """c_eps stays bounded over the sweep."""
    spread = _spread([r.c_eps for r in ellipse_sweep()])
    return CriterionResult(8, "c_eps bounded", spread <= 3, {"spread": spread})


@_timed
def criterion_09():
    """Gap gradient against alpha |<h,g>| / eps and the blow-up rate."""
    rows = disk_sweep()["conducting"]
    r = _row_at(rows, 1e-3)
    ratio = r.max_grad_u / r.predicted_grad_u
    slope = fit_rate(rows, "eps", "max_grad_u", skip_largest=True)[0]
    return CriterionResult(9, "gradient asymptotics",
                           abs(ratio - 1) <= 0.1 and abs(slope + 0.5) <= 0.05,
                           {"ratio_at_1e-3": ratio, "slope": slope})


@_timed
def criterion_10():
    """Remainder gradients stay within a factor 3 while grad u grows."""
    rows = [r for r in ellipse_sweep() if 1e-4 * 0.99 <= r.eps <= 1e-2 * 1.01]
    spreads = {k: _spread([getattr(r, f"max_grad_{k}") for r in rows])
               for k in ("b", "r", "v")}
    growth = rows[-1].max_grad_u / rows[0].max_grad_u
    ok = all(s <= 3 for s in spreads.values()) and growth >= 8
    meas = {f"spread_{k}": v for k, v in spreads.items()}
    meas["grad_v_first_last"] = [rows[0].max_grad_v, rows[-1].max_grad_v]
    meas["growth_u"] = growth
    return CriterionResult(10, "remainder boundedness", ok, meas)


@_timed
def criterion_11():
    """Insulating inclusions: Neumann condition, rate and branch continuity."""
    rows = disk_sweep()["insulating"]
    neu = max(r.neumann_residual for r in rows)
    slope = fit_rate(rows, "eps", "max_grad_u", skip_largest=True)[0]
    ds = DiskSingular.from_disks((-1.005, 0.0), 1.0, (1.005, 0.0), 1.0)
    xs = np.linspace(-8.0, -2.01, 50)
    jump = 0.0
    for d in (1e-12, 1e-14):
        up = ds.conjugate_raw(np.stack([xs, np.full_like(xs, d)], -1))
        dn = ds.conjugate_raw(np.stack([xs, np.full_like(xs, -d)], -1))
        jump = max(jump, float(np.max(np.abs(up - dn))))
    ok = neu <= 1e-5 and abs(slope + 0.5) <= 0.05 and jump <= 1e-10
    return CriterionResult(11, "insulating case", ok,
                           {"neumann_residual": neu, "slope": slope, "branch_jump": jump})


@_timed
def criterion_12():
    """Boundary-integral solution against the image series."""
    p = problem("disks", 0.05)
    res = solve_perfect(p, H_X)
    pts = np.vstack([[0.0, 0.0], exterior_probes(p.pair, 49, np.random.default_rng(12))])
    uo, go = oracle_for_pair(p.pair, H_X, pts)
    u, g = res.value(pts), res.gradient(pts)
    eu = float(np.max(np.abs(u - uo) / np.maximum(np.abs(uo), 1.0)))
    eg = float(np.max(np.linalg.norm(g - go, axis=-1) / np.linalg.norm(go, axis=-1)))
    return CriterionResult(12, "image-series oracle", max(eu, eg) <= 1e-6,
                           {"u_rel_err": eu, "grad_rel_err": eg, "probes": len(pts)})


@_timed
def criterion_13():
    """No blow-up for a background orthogonal to g."""
    rows = disk_sweep()["orthogonal"]
    spread = _spread([r.max_grad_u for r in rows])
    hg = max(abs(r.hg) for r in rows)
    return CriterionResult(13, "orthogonal background", spread <= 3,
                           {"spread": spread, "max_abs_hg": hg})


CRITERIA = (criterion_01, criterion_02, criterion_03, criterion_04, criterion_05,
            criterion_06, criterion_07, criterion_08, criterion_09, criterion_10,
            criterion_11, criterion_12, criterion_13)


def run_all(echo=print):
    results = []
    for fn in CRITERIA:
        res = fn()
        if echo:
            echo(res.line() + f" ({res.seconds:.1f} s)")
        results.append(res)
    return results
