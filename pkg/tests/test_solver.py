import dataclasses

import numpy as np
import pytest

from gapfield.acceptance import H0, ellipse_sweep, problem
from gapfield.errors import DomainError
from gapfield.harness.oracle import oracle_for_pair
from gapfield.harness.sweep import orthogonalized_background
from gapfield.potentials import DensityPair
from gapfield.solver import (HarmonicBackground, decompose, decompose_disk,
                             decompose_singular, gap_maxima, grad_u, inner_product_hg,
                             leading_coefficient, max_gap_gradient, solve_insulating,
                             solve_perfect)

HX = HarmonicBackground.linear(1.0, 0.0)
HY = HarmonicBackground.linear(0.0, 1.0)
CONST = HarmonicBackground.from_mapping({"const": 2.5})


@pytest.fixture(scope="module")
def disks():
    return problem("disks", 0.05)


@pytest.fixture(scope="module")
def ell():
    return problem("ellipses", 0.01)


def test_background_from_mapping():
    h = HarmonicBackground.from_mapping({"re2": 1.0, "im1": 2.0, "const": -1.0})
    x = np.array([[0.3, -0.7], [1.2, 0.4]])
    z = x[:, 0] + 1j * x[:, 1]
    np.testing.assert_allclose(h.value(x), (z**2).real + 2 * z.imag - 1.0, atol=1e-15)
    # h = Re f with f = z^2 - 2i z - 1; gradient of Re f is (Re f', -Im f')
    fp = 2 * z - 2j
    np.testing.assert_allclose(h.gradient(x), np.stack([fp.real, -fp.imag], -1),
                               atol=1e-14)


def test_background_conjugate():
    h = HarmonicBackground.from_mapping({"re3": 1.0, "im1": 0.5})
    x = np.array([[0.3, -0.7]])
    rot = lambda v: np.stack([-v[..., 1], v[..., 0]], -1)
    # the conjugate's gradient is the quarter-turn of the original gradient
    np.testing.assert_allclose(h.conjugate().gradient(x), rot(h.gradient(x)), atol=1e-14)


def test_unknown_harmonic_term_rejected():
    with pytest.raises(DomainError):
        HarmonicBackground.from_mapping({"x": 1.0})


def test_constant_background(disks):
    res = solve_perfect(disks, CONST)
    np.testing.assert_allclose(res.density.values, 0.0, atol=1e-13)
    np.testing.assert_allclose(res.constants, 2.5, atol=1e-13)
    assert res.c_eps == pytest.approx(0.0, abs=1e-10)
    assert abs(res.hg) < 1e-12


def test_odd_background_antisymmetry(disks):
    res = solve_perfect(disks, HX)
    assert res.constants[0] == pytest.approx(-res.constants[1], abs=1e-10)
    x = np.array([[0.3, 1.2], [2.5, -0.4], [0.01, 0.05]])
    mx = x * np.array([-1.0, 1.0])
    np.testing.assert_allclose(res.value(mx), -res.value(x), atol=1e-8)


def test_conductor_conditions(ell):
    res = solve_perfect(ell, HX)
    assert res.density.is_mean_zero(ell.grids)
    assert max(res.deviations) <= 1e-6
    np.testing.assert_allclose(res.fluxes, 0.0, atol=1e-8)


def test_against_image_series(disks):
    res = solve_perfect(disks, HX)
    x = np.array([[0.0, 0.0], [0.0, 0.3], [-1.0, 1.5], [3.0, 0.2], [1.0, -1.01]])
    uo, go = oracle_for_pair(disks.pair, HX, x)
    u, g = res.value(x), res.gradient(x)
    assert np.max(np.abs(u - uo) / np.maximum(np.abs(uo), 1)) < 1e-6
    assert np.max(np.linalg.norm(g - go, axis=-1) / np.linalg.norm(go, axis=-1)) < 1e-6


def test_inner_product_of_constants_and_odd_fields(disks):
    assert abs(inner_product_hg(CONST, disks)) < 1e-12
    assert abs(inner_product_hg(HY, disks)) < 1e-10
    assert abs(inner_product_hg(HX, disks)) > 0.1


@pytest.mark.parametrize("eps", [1e-1, 1e-2])
def test_two_forms_of_c_agree(eps):
    res = solve_perfect(problem("ellipses", eps), HX)
    assert res.c_discrepancy <= 1e-6


def test_b_has_equal_boundary_constants(ell):
    res = solve_perfect(ell, HX)
    # b = u - c q with c from <h, g>
    b1 = res.constants[0] - res.c_eps_alt * ell.q.constants[0]
    b2 = res.constants[1] - res.c_eps_alt * ell.q.constants[1]
    assert abs(b1 - b2) <= 1e-6


def test_decomposition_identities(ell):
    res = solve_perfect(ell, HX)
    d = decompose(res)
    assert d.coefficient == pytest.approx(leading_coefficient(res.hg, ell.pair))
    assert d.coefficient * d.alpha_eps == pytest.approx(d.c_eps * d.a_eps, rel=1e-12)
    x = np.array([[0.0, 0.4], [1.0, 1.5]])
    bval, bgrad = decompose_singular(res)
    np.testing.assert_allclose(bgrad(x), res.gradient(x) - d.c_eps * ell.q.gradient(x))
    coeff, alpha, rval, rgrad = decompose_disk(res)
    np.testing.assert_allclose(rgrad(x), res.gradient(x)
                               - coeff * alpha * ell.disks.gradient(x))
    # u = c q + b holds for values too
    np.testing.assert_allclose(bval(x) + d.c_eps * ell.q.value(x), res.value(x))


def test_alpha_tends_to_one_on_ellipses():
    rows = ellipse_sweep()
    last = min(rows, key=lambda r: r.eps)
    assert abs(last.alpha_eps - 1) <= 0.2
    dev = [abs(r.alpha_eps - 1) for r in sorted(rows, key=lambda r: -r.eps)]
    assert dev[-1] < dev[0]


def test_remainders_small_compared_with_u(ell):
    m = gap_maxima(decompose(solve_perfect(ell, HX)))
    assert m["b"] < 0.01 * m["u"] and m["r"] < 0.01 * m["u"]


def test_gradient_with_zero_density_is_background(disks):
    res = solve_perfect(disks, HX)
    zero = DensityPair(np.zeros_like(res.density.values), res.density.sizes)
    res0 = dataclasses.replace(res, density=zero)
    np.testing.assert_allclose(grad_u(res0, np.array([[0.0, 2.0], [3.0, 1.0]])),
                               [[1.0, 0.0], [1.0, 0.0]], atol=1e-15)


def test_grad_u_refuses_interior_points(disks):
    res = solve_perfect(disks, HX)
    with pytest.raises(DomainError):
        grad_u(res, disks.pair.c1)


def test_gap_maximum_at_segment_ends():
    p = problem("disks", 1e-3)
    res = solve_perfect(p, HX)
    e = p.pair.eps
    xs = np.linspace(-e / 2, e / 2, 201)[1:-1]
    gn = np.linalg.norm(res.gradient(np.stack([xs, 0 * xs], -1)), axis=-1)
    far_end = min(abs(xs[np.argmax(gn)] - e / 2), abs(xs[np.argmax(gn)] + e / 2))
    assert far_end <= 1e-2 * np.sqrt(e)
    total = max_gap_gradient(res.gradient, res.boundary_gradient(), p)
    assert total >= gn.max() * (1 - 1e-6)


def test_insulating_neumann_and_symmetry(disks):
    ins = solve_insulating(disks, HY)
    assert ins.neumann_residual() <= 1e-5
    x = np.array([[0.3, 1.2], [2.5, -0.4], [0.01, 0.02]])
    mx = x * np.array([-1.0, 1.0])
    np.testing.assert_allclose(ins.value(mx), ins.value(x), atol=1e-8)


def test_insulating_value_and_gradient_consistent(disks):
    ins = solve_insulating(disks, HY)
    x = np.array([[0.2, 1.3], [-2.5, 0.6], [3.1, -0.2]])
    h = 1e-5
    fd = np.stack([(ins.value(x + h * e) - ins.value(x - h * e)) / (2 * h)
                   for e in np.eye(2)], -1)
    np.testing.assert_allclose(ins.gradient(x), fd, atol=1e-7)


def test_orthogonalized_background(disks):
    h = orthogonalized_background(HX, H0, disks)
    assert abs(inner_product_hg(h, disks)) < 1e-12
