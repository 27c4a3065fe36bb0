"""Command-line front end.

Subcommands
-----------
spectrum  eigenvalue diagnostics of the block operator at every gap
qfun      gap value of q, its prediction and the envelope ratios
solve     full decomposition report at every gap
sweep     SweepRow table plus rate fits (gated by the disk oracle)
oracle    boundary-integral solution against the image series (disks only)
verify    acceptance experiments

Exit codes: 0 success, 2 configuration error, 3 accuracy failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace

import numpy as np

from ..errors import (AccuracyError, ConfigError, ConvergenceError, DomainError,
                      GapFieldError, OracleError)
from ..geometry import Curve, place_at_gap
from ..singular import delta0, gap_asymptotic_q, gap_envelopes
from ..solver import GapProblem, HarmonicBackground, decompose, solve_perfect
from ..spectral import spectrum
from .config import load_config
from .emit import emit, records_to_csv, report_json, write_text
from .oracle import exterior_probes, oracle_for_pair
from .sweep import fit_rate, measure, orthogonalized_background, run_sweep

log = logging.getLogger("gapfield")

EXIT_OK, EXIT_CONFIG, EXIT_ACCURACY, EXIT_IO = 0, 2, 3, 4
GATE_EPS = 0.05
GATE_PROBES = 20
FITS = (("eps", "max_grad_u"), ("eps", "hg"), ("eps", "c_eps"), ("eps", "q_gap"),
        ("eps", "max_grad_b"), ("eps", "max_grad_r"), ("eps", "max_grad_v"))


def _problem(config, eps):
    pair = place_at_gap(config.shape1, config.shape2, eps)
    return GapProblem(pair, config.n, config.grading, config.n_constant)


def _background(config, p):
    h = config.background
    if config.orthogonalize:
        h = orthogonalized_background(h, config.h0, p)
    return h


def _clean(d):
    return {k: ("" if v is None else v) for k, v in d.items()}


def _write(records, config, stem, payload=None):
    """Emit flat records as CSV and/or a JSON report; return the paths."""
    paths = []
    if config.out_format in ("csv", "both"):
        p = os.path.join(config.out_dir, f"{stem}.csv")
        write_text(p, records_to_csv([_clean(r) for r in records]))
        paths.append(p)
    if config.out_format in ("json", "both"):
        p = os.path.join(config.out_dir, f"{stem}.json")
        body = {"records": records}
        body.update(payload or {})
        write_text(p, report_json(config, body))
        paths.append(p)
    return paths


def cmd_spectrum(config):
    recs = []
    for eps in config.eps:
        p = _problem(config, eps)
        rep = spectrum(p.K, p.S)
        d = {"eps": eps, "n": p.n}
        d.update({k: v for k, v in rep.to_dict().items() if k != "largest"})
        d["second_largest"] = rep.to_dict()["largest"][2]
        recs.append(d)
        print(f"eps={eps:.3e} n={p.n} multiplicity={rep.multiplicity_half} "
              f"contained={rep.contained} gap={rep.spectral_gap:.3e}")
    return recs, {}, all(r["multiplicity_half"] == 2 and r["contained"] for r in recs)


def cmd_qfun(config):
    recs = []
    for eps in config.eps:
        p = _problem(config, eps)
        env = gap_envelopes(p.q, p.pair, p.disks)
        pred = float(gap_asymptotic_q(p.pair))
        recs.append({
            "eps": eps, "n": p.n, "q_gap": p.q.gap, "q_gap_predicted": pred,
            "ratio": p.q.gap / pred, "qB_gap": p.disks.gap(p.pair.z1, p.pair.z2),
            "flux1": p.q.fluxes[0], "flux2": p.q.fluxes[1],
            "constancy": max(p.q.deviations), "delta0": env.delta0,
            "normal_derivative_ratio": env.normal_derivative_ratio,
            "far_flux_ratio": env.far_flux_ratio,
            "qB_deviation_ratio": env.qB_deviation_ratio,
            "comparability_ratio": env.comparability_ratio,
        })
        print(f"eps={eps:.3e} q_gap={p.q.gap:.10g} ratio={p.q.gap / pred:.6f}")
    return recs, {}, True


def cmd_solve(config):
    recs = []
    for eps in config.eps:
        p = _problem(config, eps)
        h = _background(config, p)
        row = measure(p, h, config.kind, config.spectrum, config.gap_samples)
        d = row.as_dict()
        if config.kind == "conducting":
            dec = decompose(solve_perfect(p, h))
            d["coefficient"] = dec.coefficient
            d["qB_gap"] = dec.qB_gap
        d["delta0"] = delta0(p.pair)
        # bounded region used for the O(1) statements: disk of twice the diameter
        d["omega1_radius"] = 2 * p.pair.diameter()
        recs.append(d)
        print(f"eps={eps:.3e} max|grad u|={row.max_grad_u:.8g} "
              f"predicted={row.predicted_grad_u:.8g} c_eps={row.c_eps:.6g}")
    return recs, {}, True


def oracle_gate(tol=1e-6, seed=0):
    """Disk cross-validation at eps = 0.05; returns the max relative error."""
    pair = place_at_gap(Curve.circle(radius=1.0), Curve.circle(radius=1.0), GATE_EPS)
    p = GapProblem(pair)
    h = HarmonicBackground.linear(1.0, 0.0)
    res = solve_perfect(p, h)
    pts = exterior_probes(pair, GATE_PROBES, np.random.default_rng(seed))
    uo, go = oracle_for_pair(pair, h, pts)
    return _relative_errors(res, pts, uo, go)


def _relative_errors(res, pts, uo, go):
    eu = np.abs(res.value(pts) - uo) / np.maximum(np.abs(uo), 1.0)
    eg = (np.linalg.norm(res.gradient(pts) - go, axis=-1)
          / np.maximum(np.linalg.norm(go, axis=-1), 1e-300))
    return float(eu.max()), float(eg.max())


def cmd_oracle(config):
    if config.shape1.kind != "circle" or config.shape2.kind != "circle":
        raise ConfigError("oracle needs two circles")
    recs, ok = [], True
    rng = np.random.default_rng(config.seed)
    for eps in config.eps:
        p = _problem(config, eps)
        h = _background(config, p)
        res = solve_perfect(p, h)
        pts = exterior_probes(p.pair, config.probes, rng)
        uo, go = oracle_for_pair(p.pair, h, pts)
        eu, eg = _relative_errors(res, pts, uo, go)
        mid = 0.5 * (p.pair.z1 + p.pair.z2)
        g1 = oracle_for_pair(p.pair, h, mid, 1e-12)[1]
        g2 = oracle_for_pair(p.pair, h, mid, 5e-13)[1]
        passed = max(eu, eg) <= config.oracle_tol
        ok &= passed
        recs.append({"eps": eps, "n": p.n, "probes": len(pts), "u_rel_err": eu,
                     "grad_rel_err": eg, "self_convergence": float(np.abs(g1 - g2).max()),
                     "passed": passed})
        print(f"eps={eps:.3e} u_rel_err={eu:.3e} grad_rel_err={eg:.3e} "
              f"{'PASS' if passed else 'FAIL'}")
    return recs, {}, ok


def cmd_sweep(config):
    if config.eps:
        eu, eg = oracle_gate(seed=config.seed)
        if max(eu, eg) > 1e-6:
            raise AccuracyError(f"disk oracle gate failed (u {eu:.3e}, grad {eg:.3e})",
                                max(eu, eg))
        log.info("oracle gate passed: u %.3e grad %.3e", eu, eg)
    rows, failures = run_sweep(config)
    fits = {}
    for xc, yc in FITS:
        try:
            s, i, r2 = fit_rate(rows, xc, yc, skip_largest=True)
            fits[f"{yc}_vs_{xc}"] = {"slope": s, "intercept": i, "r2": r2}
        except DomainError:
            fits[f"{yc}_vs_{xc}"] = None
    for r in rows:
        print(f"eps={r.eps:.3e} n={r.n} max|grad u|={r.max_grad_u:.8g} "
              f"multiplicity={r.multiplicity}")
    for f in failures:
        print(f"eps={f['eps']:.3e} FAILED {f['error']}")
    payload = {"fits": fits, "failures": failures}
    emit(rows, config.out_format, config.out_dir, config, payload, config.plots)
    return None, payload, not failures


def cmd_verify(config):
    from .. import acceptance
    results = acceptance.run_all(echo=print)
    recs = [{"criterion": r.number, "title": r.title, "passed": r.passed,
             "seconds": r.seconds} for r in results]
    if config is not None:
        write_text(os.path.join(config.out_dir, "verify.json"),
                   report_json(config, {"records": recs,
                                        "measured": [r.measured for r in results]}))
    return None, {}, all(r.passed for r in results)


COMMANDS = {"spectrum": cmd_spectrum, "qfun": cmd_qfun, "solve": cmd_solve,
            "sweep": cmd_sweep, "oracle": cmd_oracle, "verify": cmd_verify}


def build_parser():
    ap = argparse.ArgumentParser(prog="gapfield", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=name != "verify", metavar="PATH")
        sp.add_argument("--out", metavar="DIR")
        sp.add_argument("--format", choices=("csv", "json", "both"))
        sp.add_argument("--plot", action="append", default=None, metavar="COLX:COLY")
        sp.add_argument("--n-override", type=int, metavar="N")
        sp.add_argument("--seed", type=int, metavar="S")
        sp.add_argument("-v", "--verbose", action="store_true")
    return ap


def _apply_flags(config, args):
    upd = {}
    if args.out is not None:
        upd["out_dir"] = args.out
    if args.format is not None:
        upd["out_format"] = args.format
    if args.plot:
        for p in args.plot:
            if p.count(":") != 1:
                raise ConfigError(f"plot spec {p!r} must look like 'colx:coly'")
        upd["plots"] = tuple(args.plot)
    if args.n_override is not None:
        if args.n_override < 16 or args.n_override % 2:
            raise ConfigError("--n-override must be an even integer >= 16")
        upd["n"] = args.n_override
    if args.seed is not None:
        upd["seed"] = args.seed
    return replace(config, **upd)


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = None
        if args.config is not None:
            config = _apply_flags(load_config(args.config), args)
        recs, payload, ok = COMMANDS[args.command](config)
        if recs is not None:
            _write(recs, config, args.command, payload)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (AccuracyError, ConvergenceError, OracleError) as exc:
        print(f"accuracy failure: {exc}", file=sys.stderr)
        return EXIT_ACCURACY
    except DomainError as exc:
        # geometry rejected at placement time is a property of the input
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except GapFieldError as exc:
        print(f"accuracy failure: {exc}", file=sys.stderr)
        return EXIT_ACCURACY
    return EXIT_OK if ok else EXIT_ACCURACY


if __name__ == "__main__":
    sys.exit(main())
