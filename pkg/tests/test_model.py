import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import quadrature_projection
from wavebeam.model import (
    RescaleParams,
    check_nu,
    cubic_projection,
    energy,
    energy_defect,
    evaluate_field,
    jacobian,
    linear_weights,
    make_point,
    point_from_vector,
    rescale,
    rescaled_shape,
    residual,
)
from wavebeam.continuation import newton_correct, trunk_seed

shapes = st.tuples(st.integers(1, 4), st.integers(1, 4))


@st.composite
def grids(draw, max_abs=3.0):
    M, N = draw(shapes)
    return draw(arrays(float, (M, N), elements=st.floats(-max_abs, max_abs)))


def test_check_nu():
    assert check_nu(1) == 1 and check_nu(2) == 2
    for bad in (0, 3, -1):
        with pytest.raises(ValueError):
            check_nu(bad)


@settings(max_examples=40, deadline=None)
@given(grids())
def test_cubic_projection_matches_quadrature(c):
    np.testing.assert_allclose(cubic_projection(c), quadrature_projection(c),
                               atol=1e-12 * max(1.0, np.abs(c).max() ** 3))


def test_one_mode_projection_closed_form():
    # cos^3 sin^3 has cos(tau) sin(x) coefficient (3/4)^2
    c = np.array([[2.0]])
    assert cubic_projection(c)[0, 0] == pytest.approx(9 / 16 * 8, rel=1e-15)


def test_linear_weights():
    w = linear_weights(2, 2, 1.5, 2)
    np.testing.assert_allclose(w, [[1 - 2.25, 81 - 2.25], [1 - 9 * 2.25, 81 - 9 * 2.25]])


@pytest.mark.parametrize("nu", [1, 2])
@pytest.mark.parametrize("omega", [1.01, 1.7, 3.0])
def test_trunk_closed_form_is_one_mode_solution(nu, omega):
    A = 4 / 3 * math.sqrt(omega**2 - 1)
    assert abs(residual(np.array([[A]]), omega, nu)[0, 0]) < 1e-14


@settings(max_examples=25, deadline=None)
@given(grids(max_abs=2.0), st.floats(0.5, 3.0), st.sampled_from([1, 2]))
def test_jacobian_matches_finite_differences(c, omega, nu):
    J = jacobian(c, omega, nu)
    y = np.append(c.ravel(), omega)
    h = 1e-6
    fd = np.empty_like(J)
    for k in range(y.size):
        e = np.zeros_like(y)
        e[k] = h
        yp, ym = y + e, y - e
        fd[:, k] = (residual(yp[:-1].reshape(c.shape), yp[-1], nu)
                    - residual(ym[:-1].reshape(c.shape), ym[-1], nu)).ravel() / (2 * h)
    scale = max(1.0, np.abs(J).max())
    assert np.abs(J - fd).max() <= 1e-6 * scale


def test_evaluate_field_one_mode():
    c = np.array([[1.5]])
    tau, x = 0.3, 1.1
    assert evaluate_field(c, tau, x) == pytest.approx(1.5 * math.cos(tau) * math.sin(x))
    assert evaluate_field(c, 0.0, 0.0) == 0.0
    assert abs(evaluate_field(c, 0.0, math.pi)) < 1e-15


def test_energy_one_mode_direct_quadrature():
    # E = int_0^pi [omega^2 u_tau^2/2 + (d_x^nu u)^2/2 + u^4/4] dx at tau=0
    A, omega, nu = 0.7, 1.3, 2
    x = np.linspace(0, np.pi, 20001)
    u = A * np.sin(x)
    dens = 0.5 * u**2 + 0.25 * u**4          # u_tau = 0 at tau = 0, |d_x^2 sin| = sin
    expected = np.trapezoid(dens, x) if hasattr(np, "trapezoid") else np.trapz(dens, x)
    assert energy(np.array([[A]]), omega, nu) == pytest.approx(expected, rel=1e-8)


def test_energy_conserved_along_solution():
    p = newton_correct(make_point(trunk_seed(4, 2, 2, 1.5).coeffs, 1.5, 2))
    assert energy_defect(p.coeffs, p.omega, p.nu) < 1e-3


def test_make_point_rejects_bad_grids():
    with pytest.raises(ValueError):
        make_point(np.array([[np.nan]]), 1.2, 1)
    with pytest.raises(ValueError):
        make_point(np.zeros((0, 2)), 1.2, 1)
    with pytest.raises(ValueError):
        make_point(np.zeros((1, 1)), -1.0, 1)


def test_point_vector_roundtrip():
    p = make_point(np.arange(6.0).reshape(2, 3) / 10, 1.4, 1)
    q = point_from_vector(p.vector(), 2, 3, 1)
    np.testing.assert_array_equal(p.coeffs, q.coeffs)
    assert q.omega == p.omega and q.energy == p.energy
    assert p.fundamental == 0.0 and p.M == 2 and p.N == 3


def test_with_stability_is_a_copy():
    p = make_point(np.ones((1, 1)), 1.4, 1)
    q = p.with_stability("stable")
    assert q.stability == "stable" and p.stability is None


def test_rescale_params_validation():
    for bad in ((2, 1), (1, 0), (-1, 3)):
        with pytest.raises(ValueError):
            RescaleParams(*bad)
    assert rescaled_shape(2, 2, RescaleParams(3, 3)) == (5, 5)


@pytest.mark.parametrize("nu", [1, 2])
@pytest.mark.parametrize("mn", [(1, 3), (3, 1), (3, 3), (5, 1)])
def test_rescaled_trunk_point_is_solution(nu, mn):
    p = trunk_seed(1, 1, nu, 1.6)
    q = rescale(p, RescaleParams(*mn))
    m, n = mn
    assert q.omega == pytest.approx(n**nu * 1.6 / m, rel=1e-15)
    assert q.energy == pytest.approx(n ** (4 * nu) * p.energy, rel=1e-12)
    assert q.residual_norm <= n ** (3 * nu) * max(p.residual_norm, 1e-15) * 10
    assert q.coeffs[(m - 1) // 2, (n - 1) // 2] == n**nu * p.coeffs[0, 0]


def test_rescale_into_larger_shape():
    p = trunk_seed(2, 2, 2, 1.2)
    q = rescale(p, RescaleParams(1, 3), shape=(3, 6))
    assert q.coeffs.shape == (3, 6)
    with pytest.raises(ValueError):
        rescale(p, RescaleParams(1, 3), shape=(1, 1))
