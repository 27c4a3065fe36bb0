import numpy as np
import pytest
from scipy.integrate import quad

from gapfield.discretization import discretize
from gapfield.errors import NearZoneError
from gapfield.geometry import Curve, place_at_gap
from gapfield.potentials import (assemble_K, assemble_S, near_eval, near_grad,
                                 npstar_cross, npstar_self, pair_field, slp_eval,
                                 slp_matrix_on)
from gapfield.spectral import symmetrization_residual
from gapfield.solver import GapProblem

UNIT = discretize(Curve.circle(radius=1.0), 64)
ELLIPSE = Curve.ellipse(a=1.6, b=0.9, angle=0.3)


def brute_single_layer(curve, density, x, start=0.0):
    """Adaptive quadrature of (1/2pi) int ln|x - y| phi dsigma.

    For on-curve targets ``start`` is the target parameter, so the log
    singularity sits at the endpoints of the interval.
    """
    def f(t):
        y = curve.point(t)
        return np.log(np.linalg.norm(x - y)) / (2 * np.pi) * density(t) * curve.speed(t)
    return quad(f, start, start + 2 * np.pi, epsabs=1e-15, epsrel=1e-13, limit=400)[0]


def test_uniform_circle_outside_and_inside():
    one = np.ones(UNIT.n)
    assert slp_eval(UNIT, one, np.array([2.0, 0.0])) == pytest.approx(np.log(2), abs=1e-14)
    assert abs(slp_eval(UNIT, one, np.array([0.3, 0.1]))) < 1e-14


def test_ellipse_far_field_against_adaptive_quadrature():
    g = discretize(ELLIPSE, 128)
    x = np.array([4.0, 3.0])
    exact = brute_single_layer(ELLIPSE, np.cos, x)
    assert slp_eval(g, np.cos(g.t), x) == pytest.approx(exact, abs=1e-12)


def test_near_zone_refused():
    with pytest.raises(NearZoneError):
        slp_eval(UNIT, np.ones(UNIT.n), np.array([1.001, 0.0]))


def test_circle_self_matrix_on_constants():
    np.testing.assert_allclose(slp_matrix_on(UNIT) @ np.ones(UNIT.n), 0.0, atol=1e-14)


@pytest.mark.parametrize("m", [1, 2, 5, 17])
def test_circle_self_matrix_fourier_modes(m):
    S = slp_matrix_on(UNIT)
    np.testing.assert_allclose(S @ np.cos(m * UNIT.t), -np.cos(m * UNIT.t) / (2 * m),
                               atol=1e-10)


@pytest.mark.parametrize("radius", [0.3, 2.5])
def test_scaled_circle_constant_density(radius):
    g = discretize(Curve.circle((0.4, -1.0), radius), 64)
    np.testing.assert_allclose(slp_matrix_on(g) @ np.ones(64), radius * np.log(radius),
                               atol=1e-13)


def test_self_matrix_matches_adaptive_quadrature_on_ellipse():
    g = discretize(ELLIPSE, 128)
    dens = lambda t: np.cos(t) + 0.3 * np.sin(2 * t)
    vals = slp_matrix_on(g) @ dens(g.t)
    for k in (0, 17, 64):
        exact = brute_single_layer(ELLIPSE, dens, g.points[k], g.t[k])
        assert vals[k] == pytest.approx(exact, abs=1e-10)


@pytest.mark.parametrize("r", [0.5, 2.0])
def test_circle_np_operator(r):
    g = discretize(Curve.circle(radius=r), 64)
    K = npstar_self(g)
    np.testing.assert_allclose(K, np.broadcast_to(g.weights / (4 * np.pi * r), K.shape),
                               rtol=1e-12)
    np.testing.assert_allclose(K @ np.ones(64), 0.5, atol=1e-14)
    np.testing.assert_allclose(K @ np.cos(g.t), 0.0, atol=1e-12)


def test_gauss_identity_for_adjoint():
    g = discretize(ELLIPSE, 128)
    np.testing.assert_allclose(g.weights @ npstar_self(g), 0.5 * g.weights, atol=1e-10)


def test_cross_operator_circle_monopole():
    src = discretize(Curve.circle((0.0, 0.0), 0.5), 64)
    tgt = discretize(Curve.circle((6.0, 1.0), 1.0), 64)
    vals = npstar_cross(tgt, src) @ np.ones(64)
    # the uniform circle acts as a point charge 2 pi rho at its center
    d = tgt.points
    exact = 0.5 * (d * tgt.normals).sum(-1) / (d**2).sum(-1)
    np.testing.assert_allclose(vals, exact, atol=1e-12)


def test_cross_operator_vanishing_monopole():
    src = discretize(Curve.circle((0.0, 0.0), 1e-3), 64)
    tgt = discretize(Curve.circle((3.0, 0.0), 1.0), 64)
    assert np.max(np.abs(npstar_cross(tgt, src) @ np.cos(src.t))) < 1e-6


def test_mirror_symmetry_of_block_operator():
    pair = place_at_gap(Curve.circle(radius=1.0), Curve.circle(radius=1.0), 0.2)
    grids = [discretize(c, 64) for c in pair.curves]
    K = assemble_K(grids)
    t = grids[0].t
    phi1 = np.exp(np.cos(t)) + np.sin(2 * t) ** 2
    # the mirror x -> -x maps parameter t to pi - t
    mirror = (32 - np.arange(64)) % 64
    phi2 = phi1[mirror]
    out = K.matrix @ np.concatenate([phi1, phi2])
    np.testing.assert_allclose(out[64:], out[:64][mirror], atol=1e-12)


def test_block_gauss_identity():
    pair = place_at_gap(Curve.circle(radius=1.0), Curve.circle(radius=0.7), 0.1)
    grids = [discretize(c, 256) for c in pair.curves]
    K = assemble_K(grids)
    out = K.matrix @ np.concatenate([np.ones(256), np.zeros(256)])
    w = np.concatenate([g.weights for g in grids])
    assert w @ out == pytest.approx(0.5 * grids[0].perimeter, abs=1e-8)


def test_assembled_single_layer_matches_direct_evaluation():
    pair = place_at_gap(Curve.ellipse(a=1.2, b=0.8), Curve.circle(radius=1.0), 1.0)
    grids = [discretize(c, 64) for c in pair.curves]
    S = assemble_S(grids)
    phi1, phi2 = np.cos(grids[0].t), 1 + np.sin(grids[1].t)
    full = S.matrix @ np.concatenate([phi1, phi2])
    cross = full[:64] - slp_matrix_on(grids[0]) @ phi1
    np.testing.assert_allclose(cross, slp_eval(grids[1], phi2, grids[0].points), atol=1e-10)


@pytest.mark.parametrize("d", [1e-6, 1e-3])
def test_near_eval_uniform_circle(d):
    x = np.array([1.0 + d, 0.0])
    assert near_eval(UNIT, np.ones(UNIT.n), x) == pytest.approx(np.log(1 + d), abs=1e-12)


@pytest.mark.parametrize("d", [1e-8, 1e-5, 1e-2])
def test_near_eval_cosine_density_closed_form(d):
    theta = 0.7
    r = 1.0 + d
    x = r * np.array([np.cos(theta), np.sin(theta)])
    val = near_eval(UNIT, np.cos(UNIT.t), x)
    assert val == pytest.approx(-np.cos(theta) / (2 * r), abs=1e-10)
    # gradient of -cos(theta) / (2 r) in Cartesian components
    gr = np.array([np.cos(theta) ** 2 - np.sin(theta) ** 2,
                   2 * np.sin(theta) * np.cos(theta)]) / (2 * r * r)
    np.testing.assert_allclose(near_grad(UNIT, np.cos(UNIT.t), x), gr, atol=1e-9)


def test_near_eval_self_convergence():
    c = Curve.ellipse(a=1.3, b=0.9)
    x = c.point(0.4) + 1e-6 * c.normal(0.4)
    vals = []
    for n in (256, 512):
        g = discretize(c, n)
        vals.append(near_eval(g, np.exp(np.sin(g.t)), x))
    assert abs(vals[0] - vals[1]) < 1e-11


def test_harmonic_off_boundary():
    g = discretize(ELLIPSE, 128)
    phi = np.cos(g.t) + 0.5
    h = 1e-4
    for x in (np.array([2.5, 0.4]), np.array([0.2, 0.1])):
        st = np.array([[0, 0], [h, 0], [-h, 0], [0, h], [0, -h]]) + x
        v = slp_eval(g, phi, st)
        assert abs((v[1:].sum() - 4 * v[0]) / h**2) < 1e-6


def test_mean_zero_density_decays():
    g = discretize(ELLIPSE, 128)
    phi = np.cos(g.t) * g.speed
    phi -= (g.weights @ phi) / g.perimeter
    near = np.abs(slp_eval(g, phi, np.array([2.5, 0.0])))
    far = np.abs(slp_eval(g, phi, np.array([1e3, 0.0])))
    assert far < 1e-2 * near


def test_weighted_symmetrization():
    pair = place_at_gap(Curve.ellipse(a=1.5, b=1.0),
                        Curve.ellipse(a=1.2, b=0.8, angle=np.pi / 2), 0.1)
    p = GapProblem(pair.scaled(1 / pair.diameter()), 256)
    assert symmetrization_residual(p.K, p.S) < 1e-8


def test_pair_field_sums_both_layers():
    pair = place_at_gap(Curve.circle(), Curve.circle(), 0.5)
    grids = [discretize(c, 64) for c in pair.curves]
    dens = np.concatenate([np.cos(grids[0].t), np.ones(64)])
    x = np.array([[0.0, 2.0]])
    v, _ = pair_field(grids, dens, x)
    exact = slp_eval(grids[0], dens[:64], x) + slp_eval(grids[1], dens[64:], x)
    np.testing.assert_allclose(v, exact, atol=1e-15)
