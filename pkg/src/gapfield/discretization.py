"""Nystrom grids, periodic quadrature and trigonometric interpolation.

Nodes are equispaced in a computational variable ``u``.  A smooth periodic
grading map ``u = U(t)`` relates ``u`` to the curve parameter ``t`` so that
nodes can cluster near the gap while every integrand stays smooth and
``2 pi``-periodic in ``u``.  With the identity map this is the plain
uniform Nystrom grid.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import comb

import numpy as np
from scipy.fft import fft, ifft

from .errors import DomainError
from .geometry import curvature

TWO_PI = 2 * np.pi


# Poisson-kernel building blocks.  P(theta; lam) is the periodic Poisson
# kernel normalized to mean one; Phi is its antiderivative with Phi(0) = 0.
# Both are written so that tiny widths lam do not cancel catastrophically.
def _poisson_den(theta, lam):
    return 2 * np.sinh(lam / 2) ** 2 + 2 * np.sin(theta / 2) ** 2


def poisson_antiderivative(theta, lam):
    r = np.exp(-lam)
    return theta + 2 * np.arctan2(r * np.sin(theta),
                                  -np.expm1(-lam) + 2 * r * np.sin(theta / 2) ** 2)


def poisson_kernel(theta, lam):
    return np.sinh(lam) / _poisson_den(theta, lam)


def poisson_kernel_derivative(theta, lam):
    return -np.sinh(lam) * np.sin(theta) / _poisson_den(theta, lam) ** 2


@dataclass(frozen=True)
class GradingMap:
    """Periodic monotone map ``u = U(t)`` with ``U(origin) = 0``.

    ``U(t) = a0 (t - origin) + sum_k beta_k [Phi(t - c_k; lam_k) - Phi(origin - c_k; lam_k)]``
    where ``a0 + sum beta_k = 1`` so that ``U(t + 2 pi) = U(t) + 2 pi``.

    Parameters
    ----------
    linear : float
        Weight ``a0`` of the identity part.
    components : tuple of (weight, center, width)
    origin : float
        Parameter value mapped to ``u = 0``.
    """

    linear: float = 1.0
    components: tuple = ()
    origin: float = 0.0

    def __post_init__(self):
        total = self.linear + sum(c[0] for c in self.components)
        if abs(total - 1.0) > 1e-12 or self.linear < 0 \
                or any(c[0] < 0 or c[2] <= 0 for c in self.components):
            raise DomainError("grading map weights must be nonnegative and sum to 1")

    def forward(self, t):
        t = np.asarray(t, dtype=float)
        out = self.linear * (t - self.origin)
        for b, c, lam in self.components:
            out = out + b * (poisson_antiderivative(t - c, lam)
                             - poisson_antiderivative(self.origin - c, lam))
        return out

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        out = np.full_like(t, self.linear)
        for b, c, lam in self.components:
            out = out + b * poisson_kernel(t - c, lam)
        return out

    def second_derivative(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        for b, c, lam in self.components:
            out = out + b * poisson_kernel_derivative(t - c, lam)
        return out

    def inverse(self, u, tol=4e-15, maxit=200):
        """Solve ``U(t) = u`` by Newton steps safeguarded with a bracket."""
        u = np.asarray(u, dtype=float)
        if not self.components:
            return u + self.origin
        lo = np.full_like(u, self.origin - TWO_PI) + np.minimum(u, 0)
        hi = np.full_like(u, self.origin + TWO_PI) + np.maximum(u, 0)
        # starting guess by interpolation on samples resolving every width
        um = np.mod(u, TWO_PI)
        base = self.origin + TWO_PI * np.arange(2 * u.size + 64) / (2 * u.size + 64)
        extra = [c + s * np.geomspace(lam / 8, np.pi, 48)
                 for _, c, lam in self.components for s in (-1.0, 1.0)]
        ts = np.concatenate([base] + extra)
        ts = self.origin + np.sort(np.mod(ts - self.origin, TWO_PI))
        ts = np.concatenate([ts, [self.origin + TWO_PI]])
        t = np.interp(um, self.forward(ts), ts) + (u - um)
        last = hi - lo
        idx = np.arange(u.size)
        t, lo, hi, last, uu = (v.ravel().copy() for v in (t, lo, hi, last, u))
        for _ in range(maxit):
            ti = t[idx]
            f = self.forward(ti) - uu[idx]
            lo[idx] = np.where(f < 0, ti, lo[idx])
            hi[idx] = np.where(f > 0, ti, hi[idx])
            step = f / self.derivative(ti)
            new = ti - step
            conv = np.abs(step) <= tol * (1 + np.abs(ti))
            # bisect when Newton leaves the bracket or fails to halve the step
            bad = ~conv & ((new <= lo[idx]) | (new >= hi[idx])
                           | (2 * np.abs(step) > np.abs(last[idx])))
            new = np.where(bad, 0.5 * (lo[idx] + hi[idx]), new)
            last[idx] = np.where(bad, 0.5 * (hi[idx] - lo[idx]), step)
            t[idx] = new
            idx = idx[~conv]
            if idx.size == 0:
                break
        t = t.reshape(u.shape)
        return t


UNIFORM = GradingMap()


def gap_grading(t_star, width, fraction=0.6):
    """Map clustering nodes around ``t_star`` on the parameter scale ``width``."""
    return GradingMap(1.0 - fraction, ((fraction, float(t_star), float(width)),),
                      float(t_star))


@dataclass(frozen=True, eq=False)
class BoundaryGrid:
    """Nystrom discretization of a curve.

    Attributes
    ----------
    n : int
    u : ndarray
        Equispaced computational nodes ``2 pi k / n``.
    t : ndarray
        Curve parameters of the nodes.
    points, normals, tangents : ndarray, shape (n, 2)
    speed : ndarray
        ``|dx/du|`` at the nodes.
    curvature : ndarray
    weights : ndarray
        Arclength quadrature weights ``2 pi speed / n``.
    """

    curve: object
    grading: GradingMap
    n: int
    u: np.ndarray
    t: np.ndarray
    points: np.ndarray
    derivative: np.ndarray
    normals: np.ndarray
    tangents: np.ndarray
    speed: np.ndarray
    curvature: np.ndarray
    weights: np.ndarray

    @property
    def perimeter(self):
        return float(self.weights.sum())

    def parameter_spacing(self, t):
        """Node spacing measured in the curve parameter near ``t``."""
        return TWO_PI / self.n / float(self.grading.derivative(np.array(t)))


def discretize(curve, n, grading=UNIFORM):
    """Build a :class:`BoundaryGrid` with ``n`` nodes."""
    if n % 2 or n < 16:
        raise DomainError(f"node count must be even and >= 16, got {n}")
    u = TWO_PI * np.arange(n) / n
    t = grading.inverse(u)
    dt = 1.0 / grading.derivative(t)
    d = curve.tangent(t) * dt[:, None]
    sp = np.hypot(d[:, 0], d[:, 1])
    tau = d / sp[:, None]
    nu = np.stack([tau[:, 1], -tau[:, 0]], axis=-1)
    for a in (u, t, d, sp, tau, nu):
        a.setflags(write=False)
    pts = curve.point(t)
    kap = curvature(curve, t)
    w = TWO_PI * sp / n
    for a in (pts, kap, w):
        a.setflags(write=False)
    return BoundaryGrid(curve, grading, n, u, t, pts, d, nu, tau, sp, kap, w)


def default_n(eps, kappa_mean=1.0, constant=24.0, minimum=256):
    """Node count ``max(minimum, constant / sqrt(eps * kappa_mean))``, even."""
    n = int(np.ceil(constant / np.sqrt(eps * kappa_mean)))
    n = max(minimum, n)
    return n + (n % 2)


def trapezoid_integrate(grid, samples):
    samples = np.asarray(samples)
    if samples.shape[0] != grid.n:
        raise DomainError(f"expected {grid.n} samples, got {samples.shape[0]}")
    return np.tensordot(grid.weights, samples, axes=(0, 0))


@dataclass(frozen=True, eq=False)
class LogQuadratureRule:
    """Product weights for ``int ln(4 sin^2((s - t)/2)) f(t) dt`` at the nodes.

    ``matrix[j, k]`` multiplies ``f(t_k)`` for target node ``j``.
    """

    n: int
    matrix: np.ndarray

    def apply(self, values):
        return self.matrix @ values


@lru_cache(maxsize=16)
def log_rule(n):
    if n % 2:
        raise DomainError("log rule needs an even node count")
    half = n // 2
    m = np.arange(1, half)
    d = TWO_PI * np.arange(n) / n
    row = (-(2 * TWO_PI / n) * (np.cos(np.outer(d, m)) / m).sum(1)
           - (2 * TWO_PI / n**2) * np.cos(half * d))
    idx = (np.arange(n)[:, None] - np.arange(n)[None, :]) % n
    mat = row[idx]
    mat.setflags(write=False)
    return LogQuadratureRule(n, mat)


_BARY_CACHE = {}


def _bary_weights(p):
    if p not in _BARY_CACHE:
        _BARY_CACHE[p] = np.array([(-1) ** k * comb(p - 1, k) for k in range(p)],
                                  dtype=float)
    return _BARY_CACHE[p]


class TrigInterpolant:
    """Evaluate the trigonometric interpolant of nodal values anywhere.

    The interpolant is first sampled on an ``oversample``-times finer grid by
    FFT zero padding and then evaluated with local barycentric Lagrange
    interpolation on ``stencil`` points.  Values may be 1-D (n,) or 2-D
    (n, k) for several densities at once.
    """

    def __init__(self, values, oversample=8, stencil=16):
        values = np.asarray(values, dtype=float)
        n = values.shape[0]
        m = oversample * n
        c = fft(values, axis=0)
        cp = np.zeros((m,) + values.shape[1:], dtype=complex)
        h = n // 2
        cp[:h] = c[:h]
        cp[m - h + 1:] = c[n - h + 1:]
        cp[h] = c[h] / 2
        cp[m - h] = c[h] / 2
        self.fine = np.real(ifft(cp, axis=0)) * oversample
        self.m = m
        self.stencil = stencil
        self._w = _bary_weights(stencil)

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        p = self.stencil
        s = np.mod(u, TWO_PI) / (TWO_PI / self.m)
        i0 = np.floor(s).astype(int) - (p // 2 - 1)
        idx = i0[:, None] + np.arange(p)[None, :]
        x = s[:, None] - idx
        vals = self.fine[idx % self.m]
        exact = np.abs(x) < 1e-14
        x = np.where(exact, 1.0, x)
        t = self._w[None, :] / x
        t = np.where(exact.any(1, keepdims=True), exact.astype(float), t)
        t = t / t.sum(1, keepdims=True)
        if vals.ndim == 3:
            return np.einsum("ij,ijk->ik", t, vals)
        return (t * vals).sum(1)


def spectral_derivative(values):
    """Derivative in ``u`` of the trigonometric interpolant at the nodes."""
    values = np.asarray(values, dtype=float)
    n = values.shape[0]
    k = np.fft.fftfreq(n, 1.0 / n)
    k[n // 2] = 0.0
    shape = (n,) + (1,) * (values.ndim - 1)
    return np.real(ifft(1j * k.reshape(shape) * fft(values, axis=0), axis=0))
