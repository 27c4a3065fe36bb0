"""Eigenfunctions of the block Neumann-Poincare operator at eigenvalue 1/2.

The two eigenfunctions are built constructively: for each boundary ``i``
solve ``(1/2 - K*) psi_i = (K* - 1/2) e_i`` in the mean-zero space, where
``e_i`` is the indicator of boundary ``i``, and set ``phi_i = psi_i + e_i``.
The normalized eigenfunction ``g = phi_1/|dD_1| - phi_2/|dD_2|`` carries
unit flux out of the first boundary and into the second.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse.linalg as ssla

from .errors import AccuracyError, AssemblyError, ConvergenceError
from .potentials import DensityPair

MULTIPLICITY_TOL = 1e-6


class MeanZeroSolver:
    """LU factorization of ``1/2 - K*`` augmented with mean-zero constraints.

    The square system is::

        [1/2 - K*   e_1  e_2] [psi]   [rhs]
        [w e_1^T     0    0 ] [mu1] = [ 0 ]
        [w e_2^T     0    0 ] [mu2]   [ 0 ]
    """

    def __init__(self, K):
        n1, n2 = K.sizes
        n = n1 + n2
        self.sizes = (n1, n2)
        self.grids = K.grids
        w = np.concatenate([g.weights for g in K.grids])
        e = np.zeros((n, 2))
        e[:n1, 0] = 1.0
        e[n1:, 1] = 1.0
        a = np.zeros((n + 2, n + 2))
        a[:n, :n] = 0.5 * np.eye(n) - K.matrix
        a[:n, n:] = e
        a[n:, :n] = (w[:, None] * e).T
        self.indicators = e
        self.weights = w
        with warnings.catch_warnings():
            warnings.simplefilter("error", sla.LinAlgWarning)
            try:
                self._lu = sla.lu_factor(a, check_finite=False)
            except (sla.LinAlgWarning, ValueError) as exc:
                raise AssemblyError(f"augmented system is singular: {exc}") from exc
        if np.min(np.abs(np.diag(self._lu[0]))) < 1e-13 * np.max(np.abs(a)):
            raise AssemblyError("augmented system is numerically singular")
        self.matrix = a

    def solve(self, rhs):
        """Solve for right-hand sides of shape (n,) or (n, k)."""
        rhs = np.asarray(rhs, dtype=float)
        n = sum(self.sizes)
        pad = np.zeros((2,) + rhs.shape[1:])
        sol = sla.lu_solve(self._lu, np.concatenate([rhs, pad]), check_finite=False)
        return sol[:n], sol[n:]


def _project_mean_zero(grids, rhs, n1):
    out = rhs.copy()
    for sl, g in ((slice(0, n1), grids[0]), (slice(n1, None), grids[1])):
        mean = g.weights @ out[sl] / g.perimeter
        if abs(mean) > 1e-10 * max(1.0, np.max(np.abs(out))):
            warnings.warn(f"right-hand side has boundary mean {mean:.3e}; projecting",
                          RuntimeWarning, stacklevel=3)
        out[sl] = out[sl] - mean
    return out


def solve_mean_zero(K, rhs, solver=None):
    """Solve ``(1/2 - K*) psi = rhs`` for mean-zero ``psi``.

    Parameters
    ----------
    K : BlockOperator
    rhs : DensityPair or ndarray
        Must have zero mean on each boundary; it is projected otherwise.
    solver : MeanZeroSolver, optional
        Reuse an existing factorization.
    """
    solver = solver or MeanZeroSolver(K)
    vals = rhs.values if isinstance(rhs, DensityPair) else np.asarray(rhs, float)
    vals = _project_mean_zero(K.grids, vals, K.sizes[0])
    psi, _ = solver.solve(vals)
    return DensityPair(psi, K.sizes)


def build_phi(K, solver=None, tol=1e-6):
    """The two eigenfunctions at 1/2 with ``int_{dD_i} phi_j = |dD_j| delta_ij``.

    Returns
    -------
    phi1, phi2 : DensityPair
    psi1, psi2 : DensityPair
    """
    solver = solver or MeanZeroSolver(K)
    e = solver.indicators
    n = e.shape[0]
    rhs = K.matrix @ e - 0.5 * e
    psi, _ = solver.solve(rhs)
    phi = psi + e
    res = (0.5 * np.eye(n) - K.matrix) @ phi
    err = np.max(np.abs(res))
    if err > tol:
        raise AccuracyError(f"eigen-residual {err:.3e} exceeds {tol:.1e}", err)
    mk = lambda v: DensityPair(np.ascontiguousarray(v), K.sizes)
    return mk(phi[:, 0]), mk(phi[:, 1]), mk(psi[:, 0]), mk(psi[:, 1])


@dataclass(frozen=True, eq=False)
class EigenfunctionG:
    """Normalized eigenfunction ``g`` with unit opposite fluxes.

    Attributes
    ----------
    g, phi1, phi2, psi1, psi2 : DensityPair
    perimeters : tuple of float
    fluxes : ndarray
        ``(int g^(1), int g^(2))``, ideally ``(1, -1)``.
    residual : float
        Max-norm of ``(1/2 - K*) g``.
    """

    g: DensityPair
    phi1: DensityPair
    phi2: DensityPair
    psi1: DensityPair
    psi2: DensityPair
    perimeters: tuple
    fluxes: np.ndarray
    residual: float
    grids: tuple


def build_g(phi1, phi2, K, psi=(None, None)):
    grids = K.grids
    p1, p2 = grids[0].perimeter, grids[1].perimeter
    g = phi1 * (1.0 / p1) - phi2 * (1.0 / p2)
    res = float(np.max(np.abs(0.5 * g.values - K.matrix @ g.values)))
    return EigenfunctionG(g, phi1, phi2, psi[0], psi[1], (p1, p2),
                          g.integrals(grids), res, grids)


def eigenfunction_g(K, solver=None):
    """Convenience wrapper: :func:`build_phi` followed by :func:`build_g`."""
    phi1, phi2, psi1, psi2 = build_phi(K, solver)
    return build_g(phi1, phi2, K, (psi1, psi2))


@dataclass(frozen=True)
class SpectrumReport:
    """Eigenvalue diagnostics of the discrete block operator.

    Attributes
    ----------
    eigenvalues : ndarray
        Real parts sorted descending.
    max_imag : float
        Largest imaginary part (the discrete operator is not exactly
        self-adjoint in any inner product, so this is a quality metric).
    multiplicity_half : int
        Count within ``tolerance`` of 1/2.
    contained : bool
        All real parts in ``(-1/2, 1/2 + tolerance]``.
    symmetrization_residual : float
        ``||W S K - (W S K)^T|| / ||W S K||`` with quadrature weights ``W``.
    min_eig_minus_s : float or None
        Smallest eigenvalue of the symmetric part of ``-W S`` (only
        meaningful for configurations scaled to diameter at most 1).
    spectral_gap : float
        Distance from 1/2 to the largest eigenvalue not counted at 1/2.
    """

    eigenvalues: np.ndarray
    max_imag: float
    multiplicity_half: int
    contained: bool
    symmetrization_residual: float
    min_eig_minus_s: float | None
    spectral_gap: float
    tolerance: float

    def to_dict(self):
        return {
            "multiplicity_half": self.multiplicity_half,
            "contained": self.contained,
            "max_imag": self.max_imag,
            "symmetrization_residual": self.symmetrization_residual,
            "min_eig_minus_s": self.min_eig_minus_s,
            "spectral_gap": self.spectral_gap,
            "tolerance": self.tolerance,
            "largest": [float(v) for v in self.eigenvalues[:6]],
            "smallest": float(self.eigenvalues[-1]),
        }


def symmetrization_residual(K, S):
    w = np.concatenate([g.weights for g in K.grids])
    a = w[:, None] * (S.matrix @ K.matrix)
    return float(np.linalg.norm(a - a.T) / np.linalg.norm(a))


def spectrum(K, S=None, tol=MULTIPLICITY_TOL):
    """Full eigenvalue report of the discrete block operator.

    ``S`` should be assembled on the configuration scaled to diameter at
    most 1 (the operator ``K*`` is scale invariant) so that ``-S`` is
    positive definite; pass ``None`` to skip the S-based diagnostics.
    """
    try:
        ev = sla.eigvals(K.matrix, check_finite=False)
    except sla.LinAlgError as exc:
        raise ConvergenceError(f"eigensolver failed: {exc}") from exc
    order = np.argsort(-ev.real)
    ev = ev[order]
    re = ev.real
    near = np.abs(ev - 0.5) <= tol
    mult = int(near.sum())
    rest = re[~near]
    gap = float(0.5 - rest.max()) if rest.size else float("nan")
    contained = bool(re.max() <= 0.5 + tol and re.min() > -0.5)
    sym = min_s = None
    if S is not None:
        sym = symmetrization_residual(K, S)
        w = np.concatenate([g.weights for g in K.grids])
        ws = -w[:, None] * S.matrix
        min_s = float(np.linalg.eigvalsh(0.5 * (ws + ws.T)).min())
    return SpectrumReport(re, float(np.max(np.abs(ev.imag))), mult, contained,
                          sym if sym is not None else float("nan"), min_s, gap, tol)


def half_multiplicity(K, tol=MULTIPLICITY_TOL, k=6):
    """Count eigenvalues within ``tol`` of 1/2 by shift-invert Arnoldi.

    Much cheaper than :func:`spectrum` for large grids; the shift sits just
    above 1/2 so the nearest eigenvalues converge first.
    """
    n = K.matrix.shape[0]
    sigma = 0.5 + 10 * tol
    lu = sla.lu_factor(K.matrix - sigma * np.eye(n), check_finite=False)
    op = ssla.LinearOperator((n, n), matvec=lambda v: sla.lu_solve(lu, v),
                             dtype=float)
    try:
        mu = ssla.eigs(op, k=k, which="LM", return_eigenvectors=False, tol=1e-13)
    except ssla.ArpackNoConvergence as exc:
        raise ConvergenceError("shift-invert eigensolver did not converge") from exc
    lam = sigma + 1.0 / mu
    return int(np.sum(np.abs(lam - 0.5) <= tol)), np.sort(lam.real)[::-1]


def orthogonal_eigenfunction(eig, S):
    """Eigenfunction at 1/2 that is S-orthogonal to ``g``.

    Returns ``f = phi_1 + t phi_2`` with ``<S f, g> = 0``.
    """
    w = np.concatenate([gr.weights for gr in eig.grids])
    sg = S.matrix.T @ (w * eig.g.values)
    a = sg @ eig.phi1.values
    b = sg @ eig.phi2.values
    if abs(b) < 1e-300:
        return eig.phi2
    return eig.phi1 - eig.phi2 * (a / b)
