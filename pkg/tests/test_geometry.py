import numpy as np
import pytest

from hypflow.ambient import DimensionError, DomainError, hbar, make_ambient, sphere_area
from hypflow.geometry import (NumericBlowupError, RadialProfile, area, constant_profile, d_theta,
                              derivatives, geometry_slice, gradient_sq, hessian_relation_check, integrate,
                              laplace_beltrami, phi_from_rho, profile_from_function, reduced_grid,
                              reduced_measure, rho_from_phi, total_measure)


def test_reduced_grid():
    theta = reduced_grid(5 * 2 + 1)
    assert theta[0] == 0 and theta[-1] == pytest.approx(np.pi)
    with pytest.raises(ValueError):
        reduced_grid(5)


@pytest.mark.parametrize('order, exact', [(1, lambda t: -np.sin(t)), (2, lambda t: -np.cos(t)),
                                          (3, lambda t: np.sin(t))])
def test_d_theta_fourth_order(order, exact):
    errors = []
    for nodes in (33, 65):
        theta = reduced_grid(nodes)
        h = theta[1] - theta[0]
        errors.append(np.max(np.abs(d_theta(np.cos(theta), h, order) - exact(theta))))
    assert errors[1] < 1e-5
    assert errors[0] / errors[1] > 12


def test_d_theta_constants_vanish():
    theta = reduced_grid(17)
    for order in (1, 2, 3):
        np.testing.assert_allclose(d_theta(np.full(17, 0.7), theta[1], order), 0, atol=1e-10)
    with pytest.raises(ValueError):
        d_theta(theta, theta[1], 4)


def test_derivatives_scale(ch2, rh3):
    theta = reduced_grid(129)
    np.testing.assert_allclose(derivatives(np.cos(theta), ch2, 1), -2 * np.sin(theta), atol=1e-6)
    np.testing.assert_allclose(derivatives(np.cos(theta), rh3, 2), -np.cos(theta), atol=1e-6)


def test_phi_rho_inverse():
    rho = np.array([1e-3, 0.1, 1.0, 5.0, 20.0])
    np.testing.assert_allclose(rho_from_phi(phi_from_rho(rho)), rho, rtol=1e-10)
    assert phi_from_rho(1.0) == pytest.approx(np.log(np.tanh(0.5)))
    with pytest.raises(DomainError):
        phi_from_rho(-1.0)
    with pytest.raises(DomainError):
        rho_from_phi(0.0)


def test_total_measure(rh3, ch2, hh2):
    theta = reduced_grid(1025)
    assert integrate(np.sin(theta), theta) == pytest.approx(2.0, abs=1e-10)
    assert integrate(np.sin(theta)**3, theta) == pytest.approx(4 / 3, abs=1e-10)
    assert integrate(reduced_measure(rh3, theta), theta) == pytest.approx(4 * np.pi, rel=1e-9)
    assert integrate(reduced_measure(ch2, theta), theta) == pytest.approx(2 * np.pi**2, rel=1e-9)
    assert integrate(reduced_measure(hh2, theta), theta) == pytest.approx(np.pi**4 / 3, rel=1e-9)
    assert total_measure(hh2) == pytest.approx(np.pi**4 / 3)


def test_profile_validation(rh3):
    theta = reduced_grid(9)
    with pytest.raises(DomainError, match='node 3'):
        RadialProfile(rh3, theta, np.where(np.arange(9) == 3, -0.1, 1.0))
    with pytest.raises(DomainError):
        RadialProfile(rh3, theta, np.full(9, np.nan))
    with pytest.raises(ValueError, match='uniform'):
        RadialProfile(rh3, theta**2 / np.pi, np.ones(9))
    with pytest.raises(ValueError):
        RadialProfile(rh3, theta, np.ones(8))
    with pytest.raises(DimensionError):
        RadialProfile(make_ambient('C', 3), theta, np.ones(9))


def test_profile_is_read_only(rh3):
    profile = profile_from_function(rh3, lambda t: 2 + 0.1 * np.cos(t), nodes=17)
    assert profile.nodes == 17
    assert profile.symmetry == 'axisymmetric'
    with pytest.raises(ValueError):
        profile.rho[0] = 1.0


def test_sphere_geometry(ambient):
    rho0 = 1.3
    sl = geometry_slice(constant_profile(ambient, rho0, nodes=129))
    coth, tanh = 1 / np.tanh(rho0), np.tanh(rho0)
    np.testing.assert_allclose(sl.v, 1.0)
    np.testing.assert_allclose(sl.H, hbar(rho0, ambient), rtol=1e-10)
    np.testing.assert_allclose(sl.horizontal, coth, rtol=1e-10)
    np.testing.assert_allclose(sl.vertical, coth + tanh, rtol=1e-10)
    assert sl.curvatures.shape == (129, ambient.m)
    expected = ambient.horizontal_dim * coth**2 + ambient.a * (coth + tanh)**2
    np.testing.assert_allclose(sl.A_sq, expected, rtol=1e-10)
    assert area(constant_profile(ambient, rho0, nodes=2048)) == pytest.approx(sphere_area(rho0, ambient), rel=1e-8)


def test_sphere_is_umbilic_in_real_space(rh3):
    sl = geometry_slice(constant_profile(rh3, 4.0, nodes=65))
    np.testing.assert_allclose(sl.traceless_sq, 0, atol=1e-20)


def test_mean_curvature_convergence(rh3):
    def H(nodes):
        return geometry_slice(profile_from_function(rh3, lambda t: 2 + 0.2 * np.cos(2 * t), nodes)).H

    coarse, medium, fine = H(65), H(129), H(257)
    e1 = np.max(np.abs(coarse - medium[::2]))
    e2 = np.max(np.abs(medium - fine[::2]))
    assert e1 / e2 > 5


def test_reversal_invariance(ambient):
    profile = profile_from_function(ambient, lambda t: 2 + 0.2 * np.cos(t) + 0.1 * np.cos(2 * t), 65)
    reversed_profile = RadialProfile(ambient, profile.theta, profile.rho[::-1])
    np.testing.assert_allclose(geometry_slice(reversed_profile).H, geometry_slice(profile).H[::-1], atol=1e-12)


def test_numeric_blowup(rh3):
    with pytest.raises(NumericBlowupError, match='node'):
        geometry_slice(constant_profile(rh3, 800.0, nodes=9))


def test_laplace_beltrami_on_sphere(ambient):
    rho0 = 1.0
    sl = geometry_slice(constant_profile(ambient, rho0, nodes=129))
    theta = sl.theta
    eigenvalue = ambient.m if ambient.field_kind == 'R' else 4 * ambient.horizontal_dim
    expected = -eigenvalue * np.cos(theta) / np.sinh(rho0)**2
    np.testing.assert_allclose(laplace_beltrami(np.cos(theta), sl), expected, atol=1e-6)
    c = ambient.coordinate_scale
    np.testing.assert_allclose(gradient_sq(np.cos(theta), sl), c**2 * np.sin(theta)**2 / np.sinh(rho0)**2,
                               atol=1e-6)


@pytest.mark.parametrize('field', ['C', 'H'])
@pytest.mark.parametrize('lam', [1.0, 1.7, 0.4])
def test_hessian_relation(field, lam):
    amb = make_ambient(field, 2)
    theta = reduced_grid(257)
    a, b = amb.a, amb.horizontal_dim
    # u = cos(theta) is the restriction of |q1|^2 - |q2|^2, a degree two harmonic
    reference = (-4 * b * np.cos(theta),
                 16 * b * np.cos(theta)**2 + 8 * a * np.sin(theta)**2,
                 4 * np.sin(theta)**2)
    res_lap, res_hess = hessian_relation_check(np.cos(theta), lam, amb, reference)
    assert res_lap < 1e-6
    assert res_hess < 1e-6


def test_hessian_relation_needs_fibers(rh3):
    theta = reduced_grid(33)
    with pytest.raises(DomainError):
        hessian_relation_check(np.cos(theta), 2.0, rh3, (theta, theta, theta))
