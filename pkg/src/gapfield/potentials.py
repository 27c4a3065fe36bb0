"""Single-layer potentials and the block Neumann-Poincare operator.

The fundamental solution is ``G(x) = ln|x| / (2 pi)``.  For a density
``phi`` on a boundary the single-layer potential is
``S[phi](x) = int G(x - y) phi(y) dsigma(y)`` and its adjoint double-layer
(Neumann-Poincare) operator on the boundary is
``K*[phi](x) = int (x - y).nu_x / (2 pi |x - y|^2) phi(y) dsigma(y)``.
Matrices act on nodal values with the quadrature weights folded in.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .discretization import TWO_PI, GradingMap, TrigInterpolant, log_rule
from .errors import DomainError, NearZoneError
from .geometry import closest_parameter

NEAR_FACTOR = 5.0


# on-boundary matrices -------------------------------------------------------
def slp_matrix_on(grid, rule=None):
    """Self-interaction matrix of the single layer on its own boundary.

    The kernel ``ln|x(u) - x(v)|^2`` is split into the periodic log
    ``ln(4 sin^2((u - v)/2))``, handled by the product rule, plus a smooth
    remainder handled by the trapezoid rule.
    """
    rule = rule or log_rule(grid.n)
    if rule.n != grid.n:
        raise DomainError("log rule and grid sizes differ")
    x, u, n = grid.points, grid.u, grid.n
    diff = x[:, None, :] - x[None, :, :]
    r2 = (diff**2).sum(-1)
    s2 = 4 * np.sin((u[:, None] - u[None, :]) / 2) ** 2
    np.fill_diagonal(r2, 1.0)
    np.fill_diagonal(s2, 1.0)
    smooth = np.log(r2 / s2)
    np.fill_diagonal(smooth, np.log(grid.speed**2))
    return (rule.matrix + (TWO_PI / n) * smooth) * grid.speed[None, :] / (4 * np.pi)


def slp_matrix_cross(target, source):
    """Single layer of ``source`` densities evaluated at ``target`` nodes."""
    diff = target.points[:, None, :] - source.points[None, :, :]
    r2 = (diff**2).sum(-1)
    if np.min(r2) <= 0:
        raise DomainError("boundaries touch")
    return np.log(r2) / (4 * np.pi) * source.weights[None, :]


def npstar_self(grid):
    """Neumann-Poincare matrix of one boundary, diagonal ``kappa / (4 pi)``."""
    x = grid.points
    diff = x[:, None, :] - x[None, :, :]
    r2 = (diff**2).sum(-1)
    np.fill_diagonal(r2, 1.0)
    k = (diff * grid.normals[:, None, :]).sum(-1) / r2 / TWO_PI
    np.fill_diagonal(k, grid.curvature / (4 * np.pi))
    return k * grid.weights[None, :]


def npstar_cross(target, source):
    """Normal derivative on ``target`` of the single layer on ``source``."""
    diff = target.points[:, None, :] - source.points[None, :, :]
    r2 = (diff**2).sum(-1)
    if np.min(r2) <= 0:
        raise DomainError("boundaries touch")
    k = (diff * target.normals[:, None, :]).sum(-1) / r2 / TWO_PI
    return k * source.weights[None, :]


@dataclass(frozen=True, eq=False)
class BlockOperator:
    """A 2x2 block operator on densities over two boundaries."""

    blocks: tuple
    grids: tuple

    @property
    def matrix(self):
        if not hasattr(self, "_full"):
            object.__setattr__(self, "_full", np.block([list(r) for r in self.blocks]))
        return self._full

    @property
    def sizes(self):
        return (self.grids[0].n, self.grids[1].n)

    def __matmul__(self, vec):
        return self.matrix @ np.asarray(vec)


def assemble_K(grids):
    g1, g2 = grids
    return BlockOperator(((npstar_self(g1), npstar_cross(g1, g2)),
                          (npstar_cross(g2, g1), npstar_self(g2))), tuple(grids))


def assemble_S(grids):
    g1, g2 = grids
    return BlockOperator(((slp_matrix_on(g1), slp_matrix_cross(g1, g2)),
                          (slp_matrix_cross(g2, g1), slp_matrix_on(g2))), tuple(grids))


@dataclass(frozen=True, eq=False)
class DensityPair:
    """Densities on two boundaries, stored as one stacked vector."""

    values: np.ndarray
    sizes: tuple

    @classmethod
    def from_parts(cls, first, second):
        first, second = np.asarray(first, float), np.asarray(second, float)
        return cls(np.concatenate([first, second]), (len(first), len(second)))

    @property
    def first(self):
        return self.values[: self.sizes[0]]

    @property
    def second(self):
        return self.values[self.sizes[0]:]

    @property
    def parts(self):
        return (self.first, self.second)

    def integrals(self, grids):
        return np.array([grids[0].weights @ self.first, grids[1].weights @ self.second])

    def is_mean_zero(self, grids, tol=1e-10):
        scale = max(1.0, float(np.max(np.abs(self.values))))
        return bool(np.all(np.abs(self.integrals(grids)) <= tol * scale))

    def __add__(self, other):
        return DensityPair(self.values + other.values, self.sizes)

    def __sub__(self, other):
        return DensityPair(self.values - other.values, self.sizes)

    def __mul__(self, c):
        return DensityPair(c * self.values, self.sizes)

    __rmul__ = __mul__


# off-boundary evaluation ----------------------------------------------------
def _as_targets(x):
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    return np.atleast_2d(x), single


def in_near_zone(grid, targets):
    """True where a target lies within ``NEAR_FACTOR`` local spacings of a node."""
    d = np.linalg.norm(targets[:, None, :] - grid.points[None, :, :], axis=-1)
    return np.any(d < NEAR_FACTOR * grid.weights[None, :], axis=1)


def _kernel_sums(x, pts, wdens, kind, center):
    """Sum kernel against weighted density at targets ``x`` (m, 2).

    ``wdens`` has shape (p, k).  Returns values (m, k) and gradients (m, 2, k).
    """
    diff = x[:, None, :] - pts[None, :, :]
    r2 = (diff**2).sum(-1)
    if kind == "log":
        val = (np.log(r2) / (4 * np.pi)) @ wdens
    else:
        # argument of (x - y)/(x - c), continuous for x outside a convex curve
        z = (diff[..., 0] + 1j * diff[..., 1])
        zc = (x[:, 0] - center[0]) + 1j * (x[:, 1] - center[1])
        val = (np.angle(z / zc[:, None]) / TWO_PI) @ wdens
    grad = np.einsum("mpi,mp,pk->mik", diff, 1.0 / (TWO_PI * r2), wdens)
    if kind != "log":
        # grad arg(x - y) is grad ln|x - y| rotated by 90 degrees
        dc = x - np.asarray(center)
        gc = dc / (TWO_PI * (dc**2).sum(-1))[:, None]
        grad = grad - gc[:, :, None] * wdens.sum(0)[None, None, :]
        grad = np.stack([-grad[:, 1], grad[:, 0]], axis=1)
    return val, grad


def _fine_rule(grid, x, t0, dist, fraction=0.5, per_level=16):
    """Quadrature nodes clustered geometrically around ``t0`` for target ``x``.

    Returns fine-node positions, arclength weights and the computational
    coordinate ``u`` of each fine node on the original grid (for density
    interpolation).
    """
    curve = grid.curve
    sp0 = float(np.linalg.norm(curve.tangent(t0)))
    lam = dist / sp0
    lam_max = 4 * grid.parameter_spacing(t0)
    widths = []
    while lam < lam_max:
        widths.append(lam)
        lam *= 2
    k = len(widths)
    if k == 0:
        fmap = grid.grading
        m = 2 * grid.n
    else:
        m = int(np.ceil(1.5 * grid.n / (1 - fraction))) + per_level * k
        m += m % 2
        base = grid.grading
        keep = 1 - fraction
        lvl = per_level / m
        total = keep + k * lvl
        comps = tuple((keep * b / total, c, w) for b, c, w in base.components)
        comps += tuple((lvl / total, t0, w) for w in widths)
        fmap = GradingMap(1.0 - sum(c[0] for c in comps), comps, t0)
    u = TWO_PI * np.arange(m) / m
    t = fmap.inverse(u)
    w = TWO_PI / m * np.linalg.norm(curve.tangent(t), axis=-1) / fmap.derivative(t)
    ug = np.mod(grid.grading.forward(t), TWO_PI)
    return curve.point(t), w, ug


def layer_eval(grid, density, targets, kind="log", center=None, near="auto",
               interior=False):
    """Single-layer value and gradient at off-boundary targets.

    Parameters
    ----------
    grid : BoundaryGrid
    density : ndarray, shape (n,) or (n, k)
    targets : ndarray, shape (2,) or (m, 2)
    kind : {"log", "conjugate"}
        ``"conjugate"`` evaluates the harmonic conjugate kernel
        ``arg((x - y)/(x - center)) / (2 pi)``.
    near : {"auto", "always", "never"}
        Near-zone handling.  ``"never"`` raises :class:`NearZoneError`
        for targets inside the near zone.
    interior : bool
        Allow targets inside the curve (close evaluation then works from
        the inner side).

    Returns
    -------
    values : ndarray, shape (m,) or (m, k)
    gradients : ndarray, shape (m, 2) or (m, 2, k)
    """
    x, single = _as_targets(targets)
    density = np.asarray(density, dtype=float)
    vec = density.ndim == 1
    dens = density[:, None] if vec else density
    if center is None:
        center = grid.points.mean(0)
    close = in_near_zone(grid, x) if near != "always" else np.ones(len(x), bool)
    if near == "never" and close.any():
        raise NearZoneError("target in the near zone; use near_eval")
    val = np.empty((len(x), dens.shape[1]))
    grad = np.empty((len(x), 2, dens.shape[1]))
    far = ~close
    if far.any():
        val[far], grad[far] = _kernel_sums(x[far], grid.points,
                                           dens * grid.weights[:, None], kind, center)
    if close.any():
        interp = TrigInterpolant(dens)
        for i in np.flatnonzero(close):
            t0, dist = closest_parameter(grid.curve, x[i])
            side = (x[i] - grid.curve.point(t0)) @ grid.curve.normal(t0)
            if dist <= 0:
                raise DomainError(f"target {x[i]} lies on the boundary")
            if not interior and (side <= 0 or grid.curve.contains(x[i])[0]):
                raise DomainError(f"target {x[i]} is not outside the boundary")
            pts, w, ug = _fine_rule(grid, x[i], t0, dist)
            fd = interp(ug) * w[:, None]
            v, g = _kernel_sums(x[i:i + 1], pts, fd, kind, center)
            val[i], grad[i] = v[0], g[0]
    if vec:
        val, grad = val[:, 0], grad[..., 0]
    if single:
        val, grad = val[0], grad[0]
    return val, grad


def slp_eval(grid, phi, x):
    """Trapezoid single layer; refuses targets in the near zone."""
    return layer_eval(grid, phi, x, near="never")[0]


def slp_grad(grid, phi, x):
    return layer_eval(grid, phi, x, near="never")[1]


def near_eval(grid, phi, x):
    """Single layer value accurate arbitrarily close to the boundary."""
    return layer_eval(grid, phi, x, near="auto")[0]


def near_grad(grid, phi, x):
    return layer_eval(grid, phi, x, near="auto")[1]


def pair_field(grids, density, targets, kind="log", centers=(None, None),
               interior=False):
    """Sum of both boundaries' single layers for a stacked density."""
    density = np.asarray(density, dtype=float)
    n1 = grids[0].n
    v1, g1 = layer_eval(grids[0], density[:n1], targets, kind, centers[0],
                        interior=interior)
    v2, g2 = layer_eval(grids[1], density[n1:], targets, kind, centers[1],
                        interior=interior)
    return v1 + v2, g1 + g2


def boundary_gradient(grids, K, S, density):
    """Exterior limit of the single-layer gradient at every node.

    The normal part follows the jump relation ``(1/2 + K*) phi`` and the
    tangential part is the spectral derivative of the trace ``S phi``
    divided by the speed.  Returns an array of shape (n1 + n2, 2) or
    (n1 + n2, 2, k) for stacked densities.
    """
    from .discretization import spectral_derivative

    density = np.asarray(density, dtype=float)
    normal = 0.5 * density + K.matrix @ density
    trace = S.matrix @ density
    out = []
    start = 0
    for g, end in zip(grids, np.cumsum(K.sizes)):
        dtr = spectral_derivative(trace[start:end])
        sp = g.speed.reshape((-1,) + (1,) * (density.ndim - 1))
        tang = dtr / sp
        nrm = normal[start:end]
        out.append(np.einsum("ni,n...->ni...", g.normals, nrm)
                   + np.einsum("ni,n...->ni...", g.tangents, tang))
        start = end
    return np.concatenate(out)
