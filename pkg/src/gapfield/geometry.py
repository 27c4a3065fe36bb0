"""Smooth strictly convex closed curves and their placement at a small gap.

Three curve classes are supported: circles, rotated ellipses and convex
radial Fourier curves ``rho(t) = r0 + sum a_n cos(n t) + b_n sin(n t)``.
All curves are parameterized counterclockwise on ``[0, 2 pi)`` so the
outward normal is the tangent rotated clockwise.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, DomainError

CONVEXITY_SAMPLES = 2048
MIN_CURVATURE = 1e-8


def _rot(angle):
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s], [s, c]])


@dataclass(frozen=True)
class Curve:
    """A closed curve ``x(t) = center + Rot(angle) @ local(t)``.

    Parameters
    ----------
    kind : {"circle", "ellipse", "fourier"}
    center : tuple of float
    params : tuple
        circle: ``(radius,)``; ellipse: ``(a, b)`` with ``a >= b > 0``;
        fourier: ``(r0, ((n, a_n, b_n), ...))``.
    angle : float
        Rotation applied to the local shape.
    """

    kind: str
    center: tuple = (0.0, 0.0)
    params: tuple = (1.0,)
    angle: float = 0.0
    _checked: bool = field(default=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if self.kind == "circle":
            (r,) = self.params
            if not r > 0:
                raise DomainError(f"circle radius must be positive, got {r}")
        elif self.kind == "ellipse":
            a, b = self.params
            if not (a >= b > 0):
                raise DomainError(f"ellipse needs a >= b > 0, got a={a}, b={b}")
        elif self.kind == "fourier":
            r0, modes = self.params
            modes = tuple((int(n), float(an), float(bn)) for n, an, bn in modes)
            if any(n < 1 for n, _, _ in modes):
                raise DomainError("fourier mode numbers must be >= 1")
            object.__setattr__(self, "params", (float(r0), modes))
        else:
            raise DomainError(f"unknown curve kind {self.kind!r}")
        if not self._checked:
            self._validate()
            object.__setattr__(self, "_checked", True)

    # constructors ---------------------------------------------------------
    @classmethod
    def circle(cls, center=(0.0, 0.0), radius=1.0):
        return cls("circle", center, (float(radius),))

    @classmethod
    def ellipse(cls, center=(0.0, 0.0), a=1.0, b=1.0, angle=0.0):
        return cls("ellipse", center, (float(a), float(b)), float(angle))

    @classmethod
    def fourier(cls, center=(0.0, 0.0), r0=1.0, modes=(), angle=0.0):
        return cls("fourier", center, (float(r0), tuple(modes)), float(angle))

    # local shape ----------------------------------------------------------
    def _radial(self, t):
        r0, modes = self.params
        rho = np.full_like(t, r0)
        d1 = np.zeros_like(t)
        d2 = np.zeros_like(t)
        for n, an, bn in modes:
            c, s = np.cos(n * t), np.sin(n * t)
            rho = rho + an * c + bn * s
            d1 = d1 + n * (-an * s + bn * c)
            d2 = d2 - n * n * (an * c + bn * s)
        return rho, d1, d2

    def _local(self, t, order):
        c, s = np.cos(t), np.sin(t)
        if self.kind == "circle":
            r = self.params[0]
            out = [(r * c, r * s), (-r * s, r * c), (-r * c, -r * s)]
        elif self.kind == "ellipse":
            a, b = self.params
            out = [(a * c, b * s), (-a * s, b * c), (-a * c, -b * s)]
        else:
            rho, d1, d2 = self._radial(t)
            out = [
                (rho * c, rho * s),
                (d1 * c - rho * s, d1 * s + rho * c),
                (d2 * c - 2 * d1 * s - rho * c, d2 * s + 2 * d1 * c - rho * s),
            ]
        return np.stack(out[order], axis=-1)

    def _eval(self, t, order):
        t = np.asarray(t, dtype=float)
        loc = self._local(t, order) @ _rot(self.angle).T
        if order == 0:
            loc = loc + np.asarray(self.center)
        return loc

    def point(self, t):
        """Position ``x(t)``; shape ``t.shape + (2,)``."""
        return self._eval(t, 0)

    def tangent(self, t):
        """First derivative ``x'(t)``."""
        return self._eval(t, 1)

    def second(self, t):
        """Second derivative ``x''(t)``."""
        return self._eval(t, 2)

    def speed(self, t):
        return np.linalg.norm(self.tangent(t), axis=-1)

    def normal(self, t):
        """Unit outward normal."""
        d = self.tangent(t)
        nrm = np.linalg.norm(d, axis=-1, keepdims=True)
        return np.stack([d[..., 1], -d[..., 0]], axis=-1) / nrm

    # transformations ------------------------------------------------------
    def translated(self, v):
        c = np.asarray(self.center) + np.asarray(v, dtype=float)
        return Curve(self.kind, tuple(c), self.params, self.angle, _checked=True)

    def scaled(self, factor):
        """Uniform scaling about the origin."""
        f = float(factor)
        c = tuple(f * np.asarray(self.center))
        if self.kind == "fourier":
            r0, modes = self.params
            params = (f * r0, tuple((n, f * a, f * b) for n, a, b in modes))
        else:
            params = tuple(f * p for p in self.params)
        return Curve(self.kind, c, params, self.angle, _checked=True)

    def perimeter(self, n=4096):
        t = 2 * np.pi * np.arange(n) / n
        return float(self.speed(t).sum() * 2 * np.pi / n)

    def diameter(self, n=1024):
        x = self.point(2 * np.pi * np.arange(n) / n)
        return float(np.max(np.linalg.norm(x[:, None] - x[None, :], axis=-1)))

    def support(self, direction):
        """Parameter of the point maximizing ``x(t) . direction``."""
        dvec = np.asarray(direction, dtype=float)
        t = 2 * np.pi * np.arange(CONVEXITY_SAMPLES) / CONVEXITY_SAMPLES
        t0 = t[np.argmax(self.point(t) @ dvec)]
        for _ in range(50):
            f = self.tangent(t0) @ dvec
            fp = self.second(t0) @ dvec
            step = f / fp
            t0 = t0 - step
            if abs(step) < 1e-15:
                break
        return float(np.mod(t0, 2 * np.pi))

    def contains(self, x):
        """True for points strictly inside, via the winding number."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        n = 4096
        pts = self.point(2 * np.pi * np.arange(n) / n)
        a = pts[None, :, :] - x[:, None, :]
        b = np.roll(a, -1, axis=1)
        ang = np.arctan2(a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0],
                         (a * b).sum(-1))
        return np.abs(ang.sum(1)) > np.pi

    def _validate(self):
        t = 2 * np.pi * np.arange(CONVEXITY_SAMPLES) / CONVEXITY_SAMPLES
        sp = self.speed(t)
        if np.min(sp) <= 1e-12:
            raise DomainError("degenerate parameterization (zero speed)")
        kap = curvature(self, t)
        if np.min(kap) <= MIN_CURVATURE:
            raise DomainError(
                f"curve is not strictly convex (min curvature {np.min(kap):.3e})")
        # positive curvature everywhere plus total turning 2 pi gives a simple curve
        turning = np.sum(kap * sp) * 2 * np.pi / CONVEXITY_SAMPLES
        if abs(turning - 2 * np.pi) > 1e-6:
            raise DomainError("curve winds more than once")


def curvature(curve, t):
    """Signed curvature from the cross product of ``x'`` and ``x''``."""
    d1 = curve.tangent(t)
    d2 = curve.second(t)
    sp = np.linalg.norm(d1, axis=-1)
    if np.any(sp < 1e-14):
        raise DomainError("degenerate parameterization (zero speed)")
    return (d1[..., 0] * d2[..., 1] - d1[..., 1] * d2[..., 0]) / sp**3


def closest_parameter(curve, x):
    """Parameter of the point on ``curve`` closest to the external point ``x``."""
    x = np.asarray(x, dtype=float)
    t = 2 * np.pi * np.arange(2048) / 2048
    t0 = t[np.argmin(np.linalg.norm(curve.point(t) - x, axis=-1))]
    for _ in range(60):
        r = curve.point(t0) - x
        d1 = curve.tangent(t0)
        f = r @ d1
        fp = d1 @ d1 + r @ curve.second(t0)
        step = f / fp if fp > 0 else f / (d1 @ d1)
        t0 -= step
        if abs(step) < 1e-15:
            break
    t0 = float(np.mod(t0, 2 * np.pi))
    return t0, float(np.linalg.norm(curve.point(t0) - x))


def _newton_pair(c1, c2, s, t, maxit=60):
    for _ in range(maxit):
        x1, x2 = c1.point(s), c2.point(t)
        d1, d2 = c1.tangent(s), c2.tangent(t)
        r = x1 - x2
        F = np.array([r @ d1, r @ d2])
        J = np.array([[d1 @ d1 + r @ c1.second(s), -(d2 @ d1)],
                      [d1 @ d2, -(d2 @ d2) + r @ c2.second(t)]])
        try:
            ds, dt = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError:
            return s, t, False
        s, t = s + ds, t + dt
        if max(abs(ds), abs(dt)) < 1e-12:
            return s, t, True
    return s, t, False


def closest_points(curve1, curve2, seed=512):
    """Closest points between two disjoint convex curves.

    Returns
    -------
    z1, z2 : ndarray
    eps : float
    t1, t2 : float
    """
    for n in (seed, 4 * seed):
        tt = 2 * np.pi * np.arange(n) / n
        x1, x2 = curve1.point(tt), curve2.point(tt)
        d2 = ((x1[:, None, :] - x2[None, :, :]) ** 2).sum(-1)
        i, j = np.unravel_index(np.argmin(d2), d2.shape)
        s, t, ok = _newton_pair(curve1, curve2, tt[i], tt[j])
        if ok:
            break
    else:
        raise ConvergenceError("closest-point Newton iteration did not converge")
    s, t = float(np.mod(s, 2 * np.pi)), float(np.mod(t, 2 * np.pi))
    z1, z2 = curve1.point(s), curve2.point(t)
    gap = z2 - z1
    # disjoint convex curves: the connecting vector leaves each curve outward
    if gap @ curve1.normal(s) <= 0 or -gap @ curve2.normal(t) <= 0 \
            or curve1.contains(z2)[0] or curve2.contains(z1)[0]:
        raise DomainError("curves overlap")
    return z1, z2, float(np.linalg.norm(gap)), s, t


@dataclass(frozen=True)
class InclusionPair:
    """Two curves placed with closest points ``(-eps/2, 0)`` and ``(eps/2, 0)``."""

    curve1: Curve
    curve2: Curve
    eps: float
    t1: float
    t2: float
    z1: np.ndarray
    z2: np.ndarray
    kappa1: float
    kappa2: float

    @property
    def r1(self):
        return 1.0 / self.kappa1

    @property
    def r2(self):
        return 1.0 / self.kappa2

    @property
    def c1(self):
        return np.array([self.z1[0] - self.r1, self.z1[1]])

    @property
    def c2(self):
        return np.array([self.z2[0] + self.r2, self.z2[1]])

    @property
    def curves(self):
        return (self.curve1, self.curve2)

    @property
    def contact_parameters(self):
        return (self.t1, self.t2)

    def diameter(self):
        pts = np.concatenate([c.point(2 * np.pi * np.arange(512) / 512)
                              for c in self.curves])
        lo, hi = pts.min(0), pts.max(0)
        # bounding-box diagonal bounds the true diameter from above
        return float(np.linalg.norm(hi - lo))

    def scaled(self, factor):
        f = float(factor)
        return InclusionPair(self.curve1.scaled(f), self.curve2.scaled(f),
                             f * self.eps, self.t1, self.t2, f * self.z1,
                             f * self.z2, self.kappa1 / f, self.kappa2 / f)


def place_at_gap(shape1, shape2, eps, verify=True):
    """Translate two shapes so their gap ``eps`` is centered on the x-axis.

    The point of ``shape1`` furthest in ``+x`` moves to ``(-eps/2, 0)`` and
    the point of ``shape2`` furthest in ``-x`` moves to ``(eps/2, 0)``.
    Both normals there are horizontal, so these are the closest points.
    Shapes keep their orientation.
    """
    eps = float(eps)
    if not eps > 0:
        raise DomainError(f"gap must be positive, got {eps}")
    t1 = shape1.support((1.0, 0.0))
    t2 = shape2.support((-1.0, 0.0))
    c1 = shape1.translated(np.array([-eps / 2, 0.0]) - shape1.point(t1))
    c2 = shape2.translated(np.array([eps / 2, 0.0]) - shape2.point(t2))
    pair = InclusionPair(c1, c2, eps, t1, t2, c1.point(t1), c2.point(t2),
                         float(curvature(c1, t1)), float(curvature(c2, t2)))
    if verify:
        _, _, e, _, _ = closest_points(c1, c2)
        if abs(e - eps) > 1e-10 * max(1.0, eps):
            raise DomainError(
                f"placement produced gap {e!r} instead of {eps!r}; "
                "shapes may not be convex near the contact")
    return pair


def osculating_disks(pair):
    """Circles of radius ``1/kappa_j`` tangent to curve ``j`` at ``z_j``."""
    return (Curve.circle(pair.c1, pair.r1), Curve.circle(pair.c2, pair.r2))
