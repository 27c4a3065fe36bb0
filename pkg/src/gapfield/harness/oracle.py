"""Iterated circle-reflection series for two perfectly conducting disks.

For a field ``f`` harmonic inside disk ``j`` the exterior function
``f(c_j) - f(R_j x)`` matches ``-f`` up to a constant on the circle, has zero
flux through both circles and vanishes at infinity.  Applying this
alternately to each disk gives

``u = h + sum_{n >= 1} (-1)^n [h(X_n) - h(P_n)]``

summed over the two chains that start with disk 1 and with disk 2, where
``X_n = R_{a_n}(X_{n-1})``, ``X_0 = x`` and ``P_n = R_{a_n} ... R_{a_2}(c_{a_1})``.
The series converges geometrically for disjoint disks.
"""

from __future__ import annotations

import numpy as np

from ..errors import DomainError, OracleError

MAX_TERMS = 100_000
ROUNDOFF = 4 * np.finfo(float).eps


def _reflect(y, c, r):
    d = y - c
    return c + r * r * d / (d @ d)


def _reflect_jacobian(y, c, r):
    d = y - c
    s = d @ d
    n = d / np.sqrt(s)
    return r * r / s * (np.eye(2) - 2 * np.outer(n, n))


def image_series_oracle(c1, r1, c2, r2, h_value, h_grad, x, tol=1e-15):
    """Potential and gradient of two grounded-flux conducting disks.

    Parameters
    ----------
    c1, c2 : array_like
        Disk centers.
    r1, r2 : float
    h_value, h_grad : callable
        Background field and its gradient at a single 2-vector.
    x : array_like
        Exterior evaluation point.
    tol : float
        Stop once the estimated remainder of the series (last increment
        times ``rho / (1 - rho)`` with ``rho`` the observed contraction
        ratio) is below ``tol`` relative to ``max(1, |u|, |grad u|)``, or
        once the increment reaches the rounding floor.

    Returns
    -------
    u : float
    grad : ndarray
    terms : int
    """
    x = np.asarray(x, dtype=float)
    disks = ((np.asarray(c1, float), float(r1)), (np.asarray(c2, float), float(r2)))
    for c, r in disks:
        if np.linalg.norm(x - c) <= r:
            raise DomainError("oracle point lies inside a disk")
    u = float(h_value(x))
    grad = np.asarray(h_grad(x), dtype=float).copy()
    used = 0
    for first in (0, 1):
        xn = x.copy()
        jac = np.eye(2)
        p = None
        j = first
        sign = 1.0
        prev = None
        for n in range(1, MAX_TERMS + 1):
            c, r = disks[j]
            jac = _reflect_jacobian(xn, c, r) @ jac
            xn = _reflect(xn, c, r)
            p = c.copy() if p is None else _reflect(p, c, r)
            sign = -sign
            du = sign * (h_value(xn) - h_value(p))
            dg = sign * (jac.T @ np.asarray(h_grad(xn), dtype=float))
            u += du
            grad += dg
            j = 1 - j
            size = max(abs(du), float(np.linalg.norm(dg)))
            scale = max(1.0, abs(u), float(np.linalg.norm(grad)))
            # increments shrink geometrically; bound the tail from the last ratio
            rho = size / prev if prev else 1.0
            prev = size
            tail = size * rho / (1 - rho) if rho < 1 else np.inf
            if size <= ROUNDOFF * scale or max(size, tail) < tol * scale:
                used = max(used, n)
                break
        else:
            raise OracleError(f"image series did not converge in {MAX_TERMS} terms")
    return u, grad, used


def oracle_for_pair(pair, h, x, tol=1e-15):
    """Oracle at points ``x`` (m, 2) for a circle pair and a background ``h``."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    out_u = np.empty(len(x))
    out_g = np.empty((len(x), 2))
    for i, xi in enumerate(x):
        out_u[i], out_g[i], _ = image_series_oracle(
            pair.c1, pair.r1, pair.c2, pair.r2, h.value, h.gradient, xi, tol)
    return out_u, out_g


def exterior_probes(pair, count, rng, near=0.3):
    """Random exterior points: a share close to the gap, the rest in a box.

    Box sizes scale with the configuration diameter (about 4 for unit disks)
    and are centered on the gap midpoint.
    """
    mid = 0.5 * (np.asarray(pair.z1) + np.asarray(pair.z2))
    s = pair.diameter() / 4
    pts = []
    while len(pts) < count:
        if len(pts) < int(near * count):
            y = mid + s * rng.uniform([-0.3, -0.3], [0.3, 0.3])
        else:
            y = mid + s * rng.uniform([-4.0, -3.0], [4.0, 3.0])
        if all(not c.contains(y)[0] for c in pair.curves):
            d = min(np.min(np.linalg.norm(c.point(np.linspace(0, 2 * np.pi, 2048)) - y,
                                          axis=-1)) for c in pair.curves)
            if d > 1e-4:
                pts.append(y)
    return np.array(pts)
