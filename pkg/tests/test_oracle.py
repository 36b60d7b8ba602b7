"""Reference checks: the independent helpers in oracle.py against closed forms and against hypflow."""
import numpy as np
import pytest

from hypflow.ambient import make_ambient
from hypflow.diagnostics import by_mass_limit, hawking_mass_limit
from hypflow.geometry import d_theta, reduced_grid
from oracle import (brute_mass_limits, constant_family, cosine_family, fd_derivative, first_eigen_family,
                    legendre2_family, quad, round_density)


def test_fd_derivative_fourth_order():
    errors = []
    for nodes in (65, 129):
        theta = np.linspace(0, np.pi, nodes)
        h = theta[1] - theta[0]
        errors.append(np.max(np.abs(fd_derivative(np.sin(theta), h, 1) - np.cos(theta))))
    assert errors[1] < 1e-6
    assert errors[0] / errors[1] > 12


def test_fd_derivative_constants_vanish():
    samples = np.full(20, 3.0)
    assert np.all(fd_derivative(samples, 0.1, 1) == 0)
    assert np.all(fd_derivative(samples, 0.1, 2) == 0)


def test_fd_derivative_legendre():
    theta = np.linspace(0, np.pi, 257)
    family = legendre2_family(1.0)
    h = theta[1] - theta[0]
    np.testing.assert_allclose(fd_derivative(family.f(theta), h, 1), family.df(theta), atol=1e-6)
    np.testing.assert_allclose(fd_derivative(family.f(theta), h, 2), family.d2f(theta), atol=1e-5)


def test_fd_derivative_rejects():
    with pytest.raises(ValueError):
        fd_derivative(np.ones(5), 0.1, 1)
    with pytest.raises(ValueError):
        fd_derivative(np.ones(10), 0.1, 3)


def test_quad():
    theta = np.linspace(0, np.pi, 512)
    assert quad(np.sin(theta), theta[1]) == pytest.approx(2.0, abs=1e-10)
    theta = np.linspace(0, np.pi, 1025)
    assert quad(np.sin(theta)**3, theta[1]) == pytest.approx(4 / 3, abs=1e-10)
    assert quad(round_density('C', 3, 1, theta), theta[1]) == pytest.approx(2 * np.pi**2, rel=1e-9)
    with pytest.raises(ValueError):
        quad(np.ones(7), 0.1)


@pytest.mark.parametrize('family', [legendre2_family(0.3), cosine_family(0.2, 2), first_eigen_family(0.4)],
                         ids=lambda family: family.name)
def test_family_derivatives(family):
    theta = np.linspace(0, np.pi, 513)
    h = theta[1] - theta[0]
    np.testing.assert_allclose(fd_derivative(family.f(theta), h, 1), family.df(theta), atol=1e-7)
    np.testing.assert_allclose(fd_derivative(family.f(theta), h, 2), family.d2f(theta), atol=1e-6)


@pytest.mark.parametrize('order', [1, 2])
def test_stencils_agree_in_the_interior(order):
    theta = reduced_grid(129)
    h = theta[1] - theta[0]
    u = np.cos(theta) + 0.3 * np.cos(3 * theta)
    np.testing.assert_allclose(d_theta(u, h, order)[3:-3], fd_derivative(u, h, order)[3:-3],
                               atol=1e-12 if order == 1 else 1e-10)


def test_constant_family_has_zero_masses():
    hawking, by = brute_mass_limits(constant_family(), 'R', 2, 0)
    assert hawking == pytest.approx(0, abs=1e-14)
    assert by == pytest.approx(0, abs=1e-14)


def test_first_eigen_family_has_zero_hawking_mass():
    hawking, _ = brute_mass_limits(first_eigen_family(0.3), 'R', 2, 0)
    assert hawking == pytest.approx(0, abs=1e-12)


@pytest.mark.parametrize('family', [legendre2_family(0.2), cosine_family(0.2), first_eigen_family(0.2)],
                         ids=lambda family: family.name)
def test_hawking_limit_matches_reference(family):
    amb = make_ambient('R', 3)
    expected, _ = brute_mass_limits(family, 'R', amb.m, amb.a)
    assert hawking_mass_limit(family.f, amb) == pytest.approx(expected, rel=1e-8, abs=1e-9)


@pytest.mark.parametrize('field, n', [('R', 3), ('C', 2), ('H', 2)])
@pytest.mark.parametrize('family', [legendre2_family(0.2), cosine_family(0.2), first_eigen_family(0.2)],
                         ids=lambda family: family.name)
def test_by_limit_matches_reference(field, n, family):
    amb = make_ambient(field, n)
    _, expected = brute_mass_limits(family, field, amb.m, amb.a)
    assert by_mass_limit(family.f, amb) == pytest.approx(expected, rel=1e-8, abs=1e-9)
