"""Gap sweeps: one row of measurements per gap width."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, fields

import numpy as np

from ..errors import DomainError, GapFieldError
from ..geometry import place_at_gap
from ..singular import gap_asymptotic_q
from ..solver import (GapProblem, decompose, gap_maxima, inner_product_hg,
                      insulating_gap_maxima, solve_insulating, solve_perfect)
from ..spectral import half_multiplicity, spectrum

log = logging.getLogger(__name__)


@dataclass
class SweepRow:
    """Measurements at one gap.

    For the insulating problem ``hg`` is ``<h_perp, g>`` and ``alpha_eps``
    holds the insulating factor ``beta``.
    """

    eps: float
    n: int
    q_gap: float
    q_gap_predicted: float
    hg: float
    c_eps: float
    a_eps: float
    alpha_eps: float
    max_grad_u: float
    predicted_grad_u: float
    max_grad_b: float
    max_grad_r: float
    max_grad_v: float
    multiplicity: int
    u_gap: float
    c_discrepancy: float
    eigen_residual: float
    flux_error: float
    constancy: float
    neumann_residual: float

    @classmethod
    def columns(cls):
        return [f.name for f in fields(cls)]

    def as_dict(self):
        return asdict(self)


def orthogonalized_background(h, h0, problem):
    """``h - <h, g>/<h0, g> h0`` so that the result is orthogonal to ``g``."""
    d = inner_product_hg(h0, problem)
    if abs(d) < 1e-300:
        raise DomainError("second background is orthogonal to g")
    return h + h0.scaled(-inner_product_hg(h, problem) / d)


def measure(problem, h, kind="conducting", spectrum_mode="multiplicity",
            gap_samples=9):
    """Run the full pipeline on a built problem and return a :class:`SweepRow`."""
    p = problem
    pair = p.pair
    if kind == "insulating":
        ins = solve_insulating(p, h)
        res = ins.conjugate
        neu = ins.neumann_residual()
    else:
        res = solve_perfect(p, h)
        neu = float("nan")
    dec = decompose(res)
    m = gap_maxima(dec, gap_samples)
    if kind == "insulating":
        # rotation preserves norms; u and r are re-measured from the rotated fields
        mi = insulating_gap_maxima(ins, gap_samples)
        m["u"], m["r"] = mi["u"], mi["r"]
    if spectrum_mode == "full":
        mult = spectrum(p.K).multiplicity_half
    elif spectrum_mode == "multiplicity":
        mult = half_multiplicity(p.K)[0]
    else:
        mult = -1
    fl = p.q.fluxes
    return SweepRow(
        eps=pair.eps, n=p.n, q_gap=p.q.gap, q_gap_predicted=float(gap_asymptotic_q(pair)),
        hg=res.hg, c_eps=res.c_eps, a_eps=dec.a_eps, alpha_eps=dec.alpha_eps,
        max_grad_u=m["u"], predicted_grad_u=abs(dec.alpha_eps * res.hg) / pair.eps,
        max_grad_b=m["b"], max_grad_r=m["r"], max_grad_v=m["v"], multiplicity=mult,
        u_gap=res.u_gap, c_discrepancy=res.c_discrepancy,
        eigen_residual=p.eig.residual,
        flux_error=max(abs(fl[0] - 1), abs(fl[1] + 1)),
        constancy=max(max(p.q.deviations), max(res.deviations)),
        neumann_residual=neu,
    )


def build_for(config, eps):
    pair = place_at_gap(config.shape1, config.shape2, eps)
    return GapProblem(pair, config.n, config.grading, config.n_constant)


def run_sweep(config, n_override=None):
    """Rows for every gap in the config plus a list of failures.

    Returns
    -------
    rows : list of SweepRow
        Ordered by gap, descending.
    failures : list of dict
        ``{"eps": ..., "error": ...}`` for rows that raised.
    """
    rows, failures = [], []
    for eps in config.eps:
        try:
            pair = place_at_gap(config.shape1, config.shape2, eps)
            p = GapProblem(pair, n_override or config.n, config.grading,
                           config.n_constant)
            h = config.background
            if config.orthogonalize:
                h = orthogonalized_background(h, config.h0, p)
            row = measure(p, h, config.kind, config.spectrum, config.gap_samples)
            log.info("eps=%.3e n=%d max|grad u|=%.6g", eps, p.n, row.max_grad_u)
            rows.append(row)
        except GapFieldError as exc:
            log.warning("eps=%.3e failed: %s", eps, exc)
            failures.append({"eps": eps, "error": f"{type(exc).__name__}: {exc}"})
    return rows, failures


def fit_rate(rows, xcol, ycol, skip_largest=False):
    """Least-squares slope of ``ln|y|`` against ``ln x``.

    Parameters
    ----------
    rows : sequence of SweepRow or dict
    skip_largest : bool
        Drop the row with the largest ``x`` (pre-asymptotic).

    Returns
    -------
    slope, intercept, r2 : float
    """
    get = lambda r, c: r[c] if isinstance(r, dict) else getattr(r, c)
    pts = sorted(((float(get(r, xcol)), float(get(r, ycol))) for r in rows))
    if skip_largest:
        pts = pts[:-1]
    if len(pts) < 3:
        raise DomainError("rate fit needs at least three points")
    x, y = np.array(pts).T
    if np.any(x <= 0) or np.any(y == 0) or not np.all(np.isfinite(y)):
        raise DomainError("rate fit needs positive x and nonzero finite y")
    lx, ly = np.log(x), np.log(np.abs(y))
    slope, icpt = np.polyfit(lx, ly, 1)
    pred = slope * lx + icpt
    ss = np.sum((ly - ly.mean()) ** 2)
    r2 = 1.0 - np.sum((ly - pred) ** 2) / ss if ss > 0 else 1.0
    return float(slope), float(icpt), float(r2)
