"""Singular functions: the numeric ``q = S[g]`` and the two-disk closed forms.

For two disks the function ``q_B(x) = (ln|x - p1| - ln|x - p2|) / (2 pi)``
is constant on both circles, where ``p1, p2`` are the common inverse
points of the circles.  Its harmonic conjugate
``(arg(x - p1) - arg(x - p2) - arg(x - c1) + arg(x - c2)) / (2 pi)`` is
single valued outside the disks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AccuracyError, DomainError
from .potentials import boundary_gradient, pair_field

TWO_PI = 2 * np.pi


def reflect(x, center, radius):
    """Inversion in the circle ``|x - center| = radius``."""
    x = np.asarray(x, dtype=float)
    d = x - np.asarray(center, dtype=float)
    return np.asarray(center) + radius**2 * d / (d**2).sum(-1, keepdims=True)


def disk_fixed_points(c1, r1, c2, r2):
    """Common inverse points of two disjoint disks with centers on the x-axis.

    Parameters
    ----------
    c1, c2 : array_like
        Centers with ``c1[0] < c2[0]`` and zero y-coordinate.

    Returns
    -------
    p1, p2 : ndarray
        ``p1`` inside the first disk, ``p2`` inside the second.
    """
    c1 = np.asarray(c1, dtype=float)
    c2 = np.asarray(c2, dtype=float)
    if abs(c1[1]) > 1e-14 or abs(c2[1]) > 1e-14:
        raise DomainError("disk centers must lie on the x-axis")
    eps = (c2[0] - c1[0]) - r1 - r2
    if not eps > 0:
        raise DomainError("disks overlap")
    # p = X -+ sqrt(pw) with X measured from the inner edge of disk 1,
    # written without cancellation for small gaps
    a = eps * (eps + 2 * r2) / (2 * (eps + r1 + r2))
    x0 = c1[0] + r1 + a
    half = np.sqrt(a * (a + 2 * r1))
    return np.array([x0 - half, 0.0]), np.array([x0 + half, 0.0])


def fixed_point_predictor(r1, r2, eps):
    """Leading-order fixed points ``-+ sqrt(2 r1 r2/(r1 + r2)) sqrt(eps)`` relative to the gap center."""
    s = np.sqrt(2 * r1 * r2 / (r1 + r2)) * np.sqrt(eps)
    return -s, s


@dataclass(frozen=True)
class DiskSingular:
    """Closed-form singular functions of two disks."""

    c1: np.ndarray
    r1: float
    c2: np.ndarray
    r2: float
    p1: np.ndarray
    p2: np.ndarray

    @classmethod
    def from_disks(cls, c1, r1, c2, r2):
        p1, p2 = disk_fixed_points(c1, r1, c2, r2)
        return cls(np.asarray(c1, float), float(r1), np.asarray(c2, float),
                   float(r2), p1, p2)

    @classmethod
    def from_pair(cls, pair):
        return cls.from_disks(pair.c1, pair.r1, pair.c2, pair.r2)

    def _check(self, x):
        x = np.asarray(x, dtype=float)
        for p in (self.p1, self.p2):
            if np.any(np.linalg.norm(x - p, axis=-1) == 0):
                raise DomainError("evaluation at a fixed point")
        return x

    def value(self, x):
        x = self._check(x)
        return (np.log(np.linalg.norm(x - self.p1, axis=-1))
                - np.log(np.linalg.norm(x - self.p2, axis=-1))) / TWO_PI

    def gradient(self, x):
        x = self._check(x)
        d1, d2 = x - self.p1, x - self.p2
        return (d1 / (d1**2).sum(-1, keepdims=True)
                - d2 / (d2**2).sum(-1, keepdims=True)) / TWO_PI

    def conjugate(self, x):
        """Harmonic conjugate; valid outside both closed disks."""
        x = self._check(x)
        z = x[..., 0] + 1j * x[..., 1]
        zc = lambda p: complex(p[0], p[1])
        # ratios keep each pair's branch cut inside its own disk
        a1 = np.angle((z - zc(self.p1)) / (z - zc(self.c1)))
        a2 = np.angle((z - zc(self.p2)) / (z - zc(self.c2)))
        return (a1 - a2) / TWO_PI

    def conjugate_raw(self, x):
        """Same as :meth:`conjugate` summed from four separate arguments."""
        x = np.asarray(x, dtype=float)
        arg = lambda p: np.arctan2(x[..., 1] - p[1], x[..., 0] - p[0])
        return (arg(self.p1) - arg(self.p2) - arg(self.c1) + arg(self.c2)) / TWO_PI

    def conjugate_gradient(self, x):
        g = self.gradient(x)
        return np.stack([-g[..., 1], g[..., 0]], axis=-1)

    def gap(self, z1, z2):
        """``q_B(z1) - q_B(z2)``."""
        return float(self.value(np.asarray(z1)) - self.value(np.asarray(z2)))


def qB_eval(ds, x):
    return ds.value(x)


def qB_grad(ds, x):
    return ds.gradient(x)


def qBperp_eval(ds, x):
    return ds.conjugate(x)


def gap_asymptotic_q(pair):
    """Leading-order prediction ``-sqrt(kappa1 + kappa2) sqrt(eps) / (sqrt(2) pi)``."""
    return -np.sqrt(pair.kappa1 + pair.kappa2) * np.sqrt(pair.eps) / (np.sqrt(2) * np.pi)


def _weighted_stats(grid, vals):
    mean = grid.weights @ vals / grid.perimeter
    std = np.sqrt(grid.weights @ (vals - mean) ** 2 / grid.perimeter)
    return float(mean), float(std)


@dataclass(frozen=True, eq=False)
class SingularFunctionQ:
    """Numeric singular function ``q = S[g]``.

    Attributes
    ----------
    eig : EigenfunctionG
    constants : tuple of float
        Weighted boundary means of the nodal trace.
    deviations : tuple of float
        Weighted standard deviations of the trace on each boundary.
    fluxes : tuple of float
        Boundary integrals of the exterior normal derivative.
    trace : ndarray
        Nodal values of ``q`` on both boundaries.
    """

    eig: object
    grids: tuple
    K: object
    S: object
    constants: tuple
    deviations: tuple
    fluxes: tuple
    trace: np.ndarray

    @property
    def gap(self):
        return self.constants[0] - self.constants[1]

    @property
    def density(self):
        return self.eig.g.values

    def value(self, x):
        return pair_field(self.grids, self.density, x)[0]

    def gradient(self, x):
        return pair_field(self.grids, self.density, x)[1]

    def boundary_gradient(self):
        return boundary_gradient(self.grids, self.K, self.S, self.density)


def build_q(eig, K, S, tol=1e-6):
    """Wire up ``q`` and check constancy and flux invariants."""
    grids = K.grids
    trace = S.matrix @ eig.g.values
    n1 = grids[0].n
    m1, s1 = _weighted_stats(grids[0], trace[:n1])
    m2, s2 = _weighted_stats(grids[1], trace[n1:])
    dn = 0.5 * eig.g.values + K.matrix @ eig.g.values
    fl = (float(grids[0].weights @ dn[:n1]), float(grids[1].weights @ dn[n1:]))
    scale = max(abs(m1 - m2), 1e-300)
    if max(s1, s2) > tol * max(1.0, scale):
        raise AccuracyError(f"q is not constant on the boundaries (std {max(s1, s2):.3e})",
                            max(s1, s2))
    if abs(fl[0] - 1) > tol or abs(fl[1] + 1) > tol:
        raise AccuracyError(f"q fluxes {fl} differ from (1, -1)", fl)
    return SingularFunctionQ(eig, grids, K, S, (m1, m2), (s1, s2), fl, trace)


@dataclass(frozen=True)
class EnvelopeReport:
    """Empirical constants of the pointwise bounds near and away from the gap."""

    normal_derivative_ratio: float
    far_flux_ratio: float
    qB_deviation_ratio: float
    comparability_ratio: float
    delta0: float


def delta0(pair):
    """Fixed neighbourhood size: min(0.5, quarter of the smaller diameter)."""
    return min(0.5, 0.25 * min(c.diameter() for c in pair.curves))


def gap_envelopes(q, pair, ds=None):
    """Ratios of boundary quantities to their expected envelopes.

    Reports the maxima of

    - ``|dq/dnu| / (sqrt(eps) / (|x - z_j|^2 + eps))`` over both boundaries,
    - ``|dq/dnu| / sqrt(eps)`` away from the gap (``|x - z_j| > delta0``),
    - ``|q_B(x) - q_B|_{dB_j}| / (sqrt(eps) |x - z_j|)`` on ``dD_j`` near the gap,
    - ``|dq/dnu| / |grad q_B|`` on both boundaries.
    """
    ds = ds or DiskSingular.from_pair(pair)
    eps = pair.eps
    d0 = delta0(pair)
    dn = 0.5 * q.density + q.K.matrix @ q.density
    n1 = q.grids[0].n
    ndr = far = dev = comp = 0.0
    for j, (grid, z) in enumerate(zip(q.grids, (pair.z1, pair.z2))):
        vals = dn[:n1] if j == 0 else dn[n1:]
        dist = np.linalg.norm(grid.points - z, axis=-1)
        ndr = max(ndr, np.max(np.abs(vals) / (np.sqrt(eps) / (dist**2 + eps))))
        mask = dist > d0
        if mask.any():
            far = max(far, np.max(np.abs(vals[mask])) / np.sqrt(eps))
        # q_B is constant on the osculating circle, which passes through z_j
        qb_const = ds.value(z)
        near = (dist <= d0) & (dist > 0)
        if near.any():
            devs = np.abs(ds.value(grid.points[near]) - qb_const)
            dev = max(dev, np.max(devs / (np.sqrt(eps) * dist[near])))
        comp = max(comp, np.max(np.abs(vals)
                                / np.linalg.norm(ds.gradient(grid.points), axis=-1)))
    return EnvelopeReport(float(ndr), float(far), float(dev), float(comp), d0)
