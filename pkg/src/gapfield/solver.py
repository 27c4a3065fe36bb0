"""Exterior conductivity problems for two close inclusions.

A perfectly conducting pair in the background field ``h`` has potential
``u = h + S[phi]`` with ``(1/2 - K*) phi = dh/dnu`` and ``phi`` of zero
mean on each boundary.  The insulating problem is solved through its
harmonic conjugate.  Gap-localized decompositions of ``u`` against the
numeric singular function ``q`` and the disk closed form ``q_B`` are
provided with their remainders.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .discretization import default_n, discretize, gap_grading
from .errors import AccuracyError, DomainError
from .potentials import (DensityPair, assemble_K, assemble_S, boundary_gradient,
                         pair_field)
from .singular import DiskSingular, build_q, delta0
from .spectral import MeanZeroSolver, build_g, build_phi, solve_mean_zero


@dataclass(frozen=True)
class HarmonicBackground:
    """``h = sum a_m Re z^m + b_m Im z^m`` with ``z = x + i y``.

    Parameters
    ----------
    terms : tuple of (m, a_m, b_m)
        ``m = 0`` is the constant term (``b_0`` is ignored).
    """

    terms: tuple = ()

    def __post_init__(self):
        clean = tuple((int(m), float(a), float(b)) for m, a, b in self.terms)
        if any(m < 0 for m, _, _ in clean):
            raise DomainError("harmonic degrees must be nonnegative")
        object.__setattr__(self, "terms", clean)

    @classmethod
    def linear(cls, ax=1.0, ay=0.0):
        return cls(((1, ax, ay),))

    @classmethod
    def from_mapping(cls, mapping):
        """Build from keys like ``"re1"``, ``"im3"`` or ``"const"``."""
        terms = []
        for key, val in mapping.items():
            if key == "const":
                terms.append((0, val, 0.0))
            elif key[:2] in ("re", "im") and key[2:].isdigit():
                m = int(key[2:])
                terms.append((m, val, 0.0) if key[:2] == "re" else (m, 0.0, val))
            else:
                raise DomainError(f"unknown harmonic term {key!r}")
        return cls(tuple(terms))

    def _analytic(self, x, deriv):
        x = np.asarray(x, dtype=float)
        z = x[..., 0] + 1j * x[..., 1]
        out = np.zeros_like(z)
        for m, a, b in self.terms:
            c = (a - 1j * b) if m else a
            if deriv:
                if m:
                    out = out + c * m * z ** (m - 1)
            else:
                out = out + c * z**m
        return out

    def value(self, x):
        return np.real(self._analytic(x, False))

    def gradient(self, x):
        d = self._analytic(x, True)
        return np.stack([np.real(d), -np.imag(d)], axis=-1)

    def conjugate(self):
        """Harmonic conjugate: ``Re z^m -> Im z^m`` and ``Im z^m -> -Re z^m``."""
        return HarmonicBackground(tuple((m, -b, a) for m, a, b in self.terms if m))

    def __add__(self, other):
        return HarmonicBackground(self.terms + other.terms)

    def scaled(self, c):
        return HarmonicBackground(tuple((m, c * a, c * b) for m, a, b in self.terms))

    def to_dict(self):
        out = {}
        for m, a, b in self.terms:
            if m == 0:
                out["const"] = out.get("const", 0.0) + a
                continue
            if a:
                out[f"re{m}"] = out.get(f"re{m}", 0.0) + a
            if b:
                out[f"im{m}"] = out.get(f"im{m}", 0.0) + b
        return out


def _gap_width(pair, j):
    curve = pair.curves[j]
    t = pair.contact_parameters[j]
    sp = float(np.linalg.norm(curve.tangent(t)))
    return np.sqrt(2 * pair.eps / (pair.kappa1 + pair.kappa2)) / sp


@dataclass(eq=False)
class GapProblem:
    """Discretized operators and singular functions for one placed pair.

    Parameters
    ----------
    pair : InclusionPair
    n : int, optional
        Nodes per boundary; defaults to :func:`default_n`.
    grading : float
        Fraction of nodes clustered at the gap (0 gives uniform grids).
    n_constant : float
        Constant of the default node-count policy.
    """

    pair: object
    n: int | None = None
    grading: float = 0.6
    n_constant: float = 24.0
    grids: tuple = field(init=False)

    def __post_init__(self):
        pair = self.pair
        if self.n is None:
            self.n = default_n(pair.eps, 0.5 * (pair.kappa1 + pair.kappa2),
                               self.n_constant)
        grids = []
        for j in range(2):
            t_star = pair.contact_parameters[j]
            if self.grading > 0:
                mp = gap_grading(t_star, _gap_width(pair, j), self.grading)
            else:
                mp = gap_grading(t_star, 1.0, 0.0)
            grids.append(discretize(pair.curves[j], self.n, mp))
        self.grids = tuple(grids)
        self.K = assemble_K(self.grids)
        self.S = assemble_S(self.grids)
        self.solver = MeanZeroSolver(self.K)
        phi1, phi2, psi1, psi2 = build_phi(self.K, self.solver)
        self.eig = build_g(phi1, phi2, self.K, (psi1, psi2))
        self.q = build_q(self.eig, self.K, self.S)
        self.disks = DiskSingular.from_pair(pair)

    @property
    def weights(self):
        return np.concatenate([g.weights for g in self.grids])

    @property
    def nodes(self):
        return np.concatenate([g.points for g in self.grids])

    @property
    def normals(self):
        return np.concatenate([g.normals for g in self.grids])

    @property
    def boundary_slices(self):
        n1 = self.grids[0].n
        return (slice(0, n1), slice(n1, None))

    def boundary_means(self, vals):
        out = []
        for sl, g in zip(self.boundary_slices, self.grids):
            m = g.weights @ vals[sl] / g.perimeter
            s = np.sqrt(g.weights @ (vals[sl] - m) ** 2 / g.perimeter)
            out.append((float(m), float(s)))
        return out

    def gap_points(self, count=9):
        """Interior points of the segment joining the closest points."""
        e = self.pair.eps
        s = np.linspace(-e / 2, e / 2, count + 2)[1:-1]
        return np.stack([s, np.zeros_like(s)], axis=-1)

    def near_gap_nodes(self, radius=None):
        """Indices of boundary nodes within ``radius`` of the closest points."""
        radius = delta0(self.pair) if radius is None else radius
        x = self.nodes
        n1 = self.grids[0].n
        d = np.empty(len(x))
        d[:n1] = np.linalg.norm(x[:n1] - self.pair.z1, axis=-1)
        d[n1:] = np.linalg.norm(x[n1:] - self.pair.z2, axis=-1)
        return np.flatnonzero(d <= radius)


def build_problem(pair, n=None, grading=0.6, n_constant=24.0):
    return GapProblem(pair, n, grading, n_constant)


def inner_product_hg(h, eig_or_problem, grids=None):
    """Quadrature of ``int h g^(1) + int h g^(2)`` over both boundaries."""
    eig = getattr(eig_or_problem, "eig", eig_or_problem)
    grids = grids or eig.grids
    x = np.concatenate([g.points for g in grids])
    w = np.concatenate([g.weights for g in grids])
    return float(w @ (h.value(x) * eig.g.values))


@dataclass(eq=False)
class SolveResult:
    """Solution of the perfectly conducting problem and its decompositions.

    Attributes
    ----------
    density : DensityPair
    constants : tuple of float
        Weighted boundary means of ``u``.
    deviations : tuple of float
        Weighted standard deviations of ``u`` on each boundary.
    fluxes : tuple of float
    hg : float
        ``<h, g>``.
    c_eps, c_eps_alt : float
        Gap ratio ``(u-gap)/(q-gap)`` and ``<h, g>/(q-gap)``.
    """

    problem: GapProblem
    h: HarmonicBackground
    density: DensityPair
    constants: tuple
    deviations: tuple
    fluxes: tuple
    hg: float
    c_eps: float
    c_eps_alt: float

    @property
    def u_gap(self):
        return self.constants[0] - self.constants[1]

    @property
    def c_discrepancy(self):
        return abs(self.c_eps - self.c_eps_alt) / max(abs(self.c_eps), 1e-300)

    def value(self, x):
        return self.h.value(x) + pair_field(self.problem.grids, self.density.values, x)[0]

    def gradient(self, x):
        return self.h.gradient(x) + pair_field(self.problem.grids,
                                               self.density.values, x)[1]

    def boundary_gradient(self):
        p = self.problem
        return (self.h.gradient(p.nodes)
                + boundary_gradient(p.grids, p.K, p.S, self.density.values))


def c_epsilon(u_gap, hg, q_gap):
    """Both forms of the gap ratio; raises for a degenerate q-gap."""
    if abs(q_gap) < 1e-14:
        raise DomainError(f"q-gap {q_gap:.3e} is degenerate")
    return u_gap / q_gap, hg / q_gap


def solve_perfect(problem, h, tol=1e-6):
    """Perfectly conducting inclusions in the background ``h``."""
    p = problem
    x, nu = p.nodes, p.normals
    dh = (h.gradient(x) * nu).sum(-1)
    phi = solve_mean_zero(p.K, dh, p.solver)
    trace = h.value(x) + p.S.matrix @ phi.values
    (m1, s1), (m2, s2) = p.boundary_means(trace)
    dn = dh + 0.5 * phi.values + p.K.matrix @ phi.values
    fl = tuple(float(g.weights @ dn[sl]) for sl, g in zip(p.boundary_slices, p.grids))
    scale = max(1.0, float(np.max(np.abs(trace))))
    if max(s1, s2) > tol * scale:
        raise AccuracyError(f"u is not constant on the boundaries (std {max(s1, s2):.3e})",
                            max(s1, s2))
    if not phi.is_mean_zero(p.grids):
        raise AccuracyError("density is not mean-zero", phi.integrals(p.grids))
    hg = inner_product_hg(h, p)
    c, c_alt = c_epsilon(m1 - m2, hg, p.q.gap)
    return SolveResult(p, h, phi, (m1, m2), (s1, s2), fl, hg, c, c_alt)


def leading_coefficient(hg, pair):
    """``-sqrt(2) pi <h, g> / sqrt(eps (kappa1 + kappa2))``."""
    return -np.sqrt(2) * np.pi * hg / np.sqrt(pair.eps * (pair.kappa1 + pair.kappa2))


@dataclass(eq=False)
class Decomposition:
    """Splitting of ``u`` into singular parts plus bounded remainders.

    ``u = c q + b`` and ``u = coefficient * alpha * q_B + r`` where
    ``coefficient * alpha = c * a`` and ``q = a q_B + v``.
    For the insulating problem the roles of ``q``, ``q_B`` are played by
    the rotated gradients of the conjugate problem.
    """

    c_eps: float
    a_eps: float
    coefficient: float
    alpha_eps: float
    q_gap: float
    qB_gap: float
    hg: float
    result: SolveResult

    def _grads(self, x):
        p = self.result.problem
        gu = self.result.gradient(x)
        gq = p.q.gradient(x)
        gb = p.disks.gradient(x)
        return gu, gq, gb

    def b_gradient(self, x):
        gu, gq, _ = self._grads(x)
        return gu - self.c_eps * gq

    def r_gradient(self, x):
        gu, _, gb = self._grads(x)
        return gu - self.c_eps * self.a_eps * gb

    def v_gradient(self, x):
        _, gq, gb = self._grads(x)
        return gq - self.a_eps * gb

    def b_value(self, x):
        return self.result.value(x) - self.c_eps * self.result.problem.q.value(x)

    def r_value(self, x):
        return (self.result.value(x)
                - self.c_eps * self.a_eps * self.result.problem.disks.value(x))


def _gap_fields(problem, densities, count):
    """Stacked single-layer gradients at gap samples and near-gap nodes."""
    pts = problem.gap_points(count)
    dens = np.stack(densities, axis=1)
    grad = pair_field(problem.grids, dens, pts)[1]
    idx = problem.near_gap_nodes()
    bnd = boundary_gradient(problem.grids, problem.K, problem.S, dens)[idx]
    return np.concatenate([pts, problem.nodes[idx]]), np.concatenate([grad, bnd])


def gap_maxima(dec, count=9):
    """Max gradient norms of ``u``, ``b``, ``r`` and ``v`` near the gap.

    Samples are interior points of the gap segment plus boundary nodes
    within the fixed neighbourhood of the closest points.
    """
    res = dec.result
    p = res.problem
    pts, g = _gap_fields(p, [res.density.values, p.q.density], count)
    gu = res.h.gradient(pts) + g[..., 0]
    gq = g[..., 1]
    gb = p.disks.gradient(pts)
    norm = lambda a: float(np.max(np.linalg.norm(a, axis=-1)))
    return {
        "u": norm(gu),
        "b": norm(gu - dec.c_eps * gq),
        "r": norm(gu - dec.c_eps * dec.a_eps * gb),
        "v": norm(gq - dec.a_eps * gb),
        "u_mid": float(np.linalg.norm(gu[count // 2])),
        "b_mid": float(np.linalg.norm(gu[count // 2] - dec.c_eps * gq[count // 2])),
        "r_mid": float(np.linalg.norm(gu[count // 2]
                                      - dec.c_eps * dec.a_eps * gb[count // 2])),
        "v_mid": float(np.linalg.norm(gq[count // 2] - dec.a_eps * gb[count // 2])),
    }


def decompose(result):
    """Gap decomposition of a conducting solution."""
    p = result.problem
    qB_gap = p.disks.gap(p.pair.z1, p.pair.z2)
    a = p.q.gap / qB_gap
    coeff = leading_coefficient(result.hg, p.pair)
    alpha = result.c_eps * a / coeff if coeff != 0 else float("nan")
    return Decomposition(result.c_eps, a, coeff, alpha, p.q.gap, qB_gap,
                         result.hg, result)


def decompose_singular(result):
    """Remainder ``b = u - c q`` (value and gradient evaluators)."""
    d = decompose(result)
    return d.b_value, d.b_gradient


def decompose_disk(result):
    """Coefficient, ``alpha`` and the remainder ``r`` against ``q_B``."""
    d = decompose(result)
    return d.coefficient, d.alpha_eps, d.r_value, d.r_gradient


@dataclass(eq=False)
class InsulatingResult:
    """Insulating solution obtained from the conducting conjugate problem.

    ``conjugate`` solves the conducting problem for ``h_perp``; the
    insulating potential is ``u = h - (1/2 pi) sum int arg((x - y)/(x - c_j)) phi_j``
    and ``grad u = (d_y u_perp, -d_x u_perp)``.
    """

    h: HarmonicBackground
    conjugate: SolveResult
    coefficient: float
    beta_eps: float

    @property
    def problem(self):
        return self.conjugate.problem

    @staticmethod
    def _rotate(g):
        return np.stack([g[..., 1], -g[..., 0]], axis=-1)

    def value(self, x):
        p = self.problem
        centers = tuple(g.points.mean(0) for g in p.grids)
        conj = pair_field(p.grids, self.conjugate.density.values, x,
                          kind="conjugate", centers=centers)[0]
        return self.h.value(x) - conj

    def gradient(self, x):
        return self._rotate(self.conjugate.gradient(x))

    def boundary_gradient(self):
        return self._rotate(self.conjugate.boundary_gradient())

    def neumann_residual(self):
        """Max ``|du/dnu|`` on the nodes relative to max ``|grad u|``."""
        g = self.boundary_gradient()
        nd = np.abs((g * self.problem.normals).sum(-1))
        return float(nd.max() / np.linalg.norm(g, axis=-1).max())

    def r_gradient(self, x):
        """Gradient of ``u + coefficient * beta * q_B_perp``."""
        ds = self.problem.disks
        return self.gradient(x) + self.coefficient * self.beta_eps * ds.conjugate_gradient(x)


def insulating_gap_maxima(ins, count=9):
    """Max gradient norms of the insulating ``u`` and its remainder ``r``."""
    res = ins.conjugate
    p = res.problem
    pts, g = _gap_fields(p, [res.density.values], count)
    gu = ins._rotate(res.h.gradient(pts) + g[..., 0])
    gr = gu + ins.coefficient * ins.beta_eps * p.disks.conjugate_gradient(pts)
    norm = lambda a: float(np.max(np.linalg.norm(a, axis=-1)))
    return {"u": norm(gu), "r": norm(gr)}


def solve_insulating(problem, h):
    """Insulating inclusions in the background ``h``.

    The decomposition is ``u = -coefficient * beta * q_B_perp + r`` with
    ``coefficient`` the leading coefficient built from ``<h_perp, g>``.
    """
    hp = h.conjugate()
    res = solve_perfect(problem, hp)
    d = decompose(res)
    return InsulatingResult(h, res, d.coefficient, d.alpha_eps)


def max_gap_gradient(field_gradient, boundary_gradient, problem, count=9):
    """Largest gradient norm over gap samples and near-gap boundary nodes.

    Parameters
    ----------
    field_gradient : callable
        Off-boundary gradient evaluator, shape (m, 2) for (m, 2) points.
    boundary_gradient : ndarray
        Exterior gradients at all boundary nodes, shape (n1 + n2, 2).
    """
    seg = np.linalg.norm(field_gradient(problem.gap_points(count)), axis=-1)
    idx = problem.near_gap_nodes()
    bnd = np.linalg.norm(boundary_gradient[idx], axis=-1)
    return float(max(seg.max(), bnd.max()))


def grad_u(result, x):
    x = np.asarray(x, dtype=float)
    for c in result.problem.pair.curves:
        if np.any(c.contains(np.atleast_2d(x))):
            raise DomainError("probe lies inside an inclusion")
    return result.gradient(x)
