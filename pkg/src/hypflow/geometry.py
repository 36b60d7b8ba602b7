"""Geometry of invariant radial graphs rho(theta) over S^m in the reduced coordinate theta in [0, pi].

K = R: theta is the polar angle on S^m (axisymmetric profiles).
K != R, n = 2: theta = 2s with s the polar distance on the base S^{a+1}(1/2) of the Hopf fibration
(S^a-invariant profiles).

With c = 1 (R) or 2 (C, H) and b = m - a horizontal directions, the sigma-Hessian of an invariant
function has horizontal eigenvalues c^2 u'' (radial) and c^2 cot(theta) u' (b - 1 copies).
"""
import logging
from dataclasses import dataclass

import numpy as np
import scipy.integrate
import scipy.ndimage

from .ambient import (AmbientSpace, DimensionError, DomainError, berger_mixed_factor, hbar,
                      sphere_volume)


# 4th-order central differences, in correlate order (left to right)
STENCILS = {1: np.array([1., -8., 0., 8., -1.]) / 12,
            2: np.array([-1., 16., -30., 16., -1.]) / 12,
            3: np.array([1., -8., 13., 0., -13., 8., -1.]) / 8}

MIN_NODES = 7


class NumericBlowupError(FloatingPointError):
    pass


def reduced_grid(nodes: int = 512) -> np.ndarray:
    if nodes < MIN_NODES:
        raise ValueError(f'Need at least {MIN_NODES} nodes, got {nodes}.')
    return np.linspace(0, np.pi, nodes)


def d_theta(u, h: float, order: int) -> np.ndarray:
    """order-th theta derivative of an even (pole-symmetric) function.

    Args:
        u (np.ndarray): samples on the uniform grid, last axis is theta.
        h (float): grid step.
        order (int): 1, 2 or 3.

    Returns:
        np.ndarray: derivative samples, same shape as u.
    """
    if order not in STENCILS:
        raise ValueError(f'Derivative order must be 1, 2 or 3, got {order}.')
    # mirror reflection across both poles: invariant profiles are even there
    return scipy.ndimage.correlate1d(np.asarray(u, dtype=float), STENCILS[order],
                                     axis=-1, mode='mirror') / h**order


def cot_term(u_t, u_tt, theta) -> np.ndarray:
    """cot(theta) u_t, replaced by the pole limit u_tt at theta = 0 and pi."""
    out = np.empty_like(u_t)
    out[..., 1:-1] = u_t[..., 1:-1] * np.cos(theta[1:-1]) / np.sin(theta[1:-1])
    out[..., 0] = u_tt[..., 0]
    out[..., -1] = u_tt[..., -1]
    return out


def reduced_measure(amb: AmbientSpace, theta) -> np.ndarray:
    """Density W(theta) of the round measure of S^m against d theta."""
    theta = np.asarray(theta, dtype=float)
    if amb.field_kind == 'R':
        return sphere_volume(amb.m - 1) * np.sin(theta)**(amb.m - 1)
    b = amb.horizontal_dim
    return sphere_volume(amb.a) * sphere_volume(b - 1) * (np.sin(theta) / 2)**(b - 1) / 2


def total_measure(amb: AmbientSpace) -> float:
    return sphere_volume(amb.m)


def _log1mexp(x):
    """log(1 - e^x) for x < 0."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide='ignore'):
        return np.where(x > -np.log(2), np.log(-np.expm1(x)), np.log1p(-np.exp(x)))


def phi_from_rho(rho):
    """phi = ln tanh(rho/2), so that d phi / d rho = 1/sinh(rho) and phi(inf) = 0."""
    rho = np.asarray(rho, dtype=float)
    if np.any(np.isnan(rho)) or np.any(rho <= 0):
        raise DomainError(f'phi needs rho > 0, got {rho[~(rho > 0)].ravel()[0]}.')
    phi = _log1mexp(-rho) - np.log1p(np.exp(-rho))
    return phi if phi.ndim else float(phi)


def rho_from_phi(phi):
    """Inverse of phi_from_rho, defined for phi < 0."""
    phi = np.asarray(phi, dtype=float)
    if np.any(np.isnan(phi)) or np.any(phi >= 0):
        raise DomainError(f'rho needs phi < 0, got {phi[~(phi < 0)].ravel()[0]}.')
    rho = np.log1p(np.exp(phi)) - _log1mexp(phi)
    return rho if rho.ndim else float(rho)


@dataclass(frozen=True, eq=False)
class RadialProfile:
    """Invariant radial function rho > 0 sampled on the uniform reduced grid.

    Arrays are stored read-only.
    """
    amb: AmbientSpace
    theta: np.ndarray
    rho: np.ndarray

    def __post_init__(self):
        if self.amb.field_kind != 'R' and self.amb.n != 2:
            raise DimensionError(f'Profiles on {self.amb} are not supported: K != R needs n = 2.')
        theta = np.array(self.theta, dtype=float)
        rho = np.array(self.rho, dtype=float)
        if theta.ndim != 1 or theta.shape != rho.shape:
            raise ValueError(f'theta and rho must be 1-D of equal length, got {theta.shape} and {rho.shape}.')
        if theta.size < MIN_NODES:
            raise ValueError(f'Need at least {MIN_NODES} nodes, got {theta.size}.')
        h = np.pi / (theta.size - 1)
        if abs(theta[0]) > 1e-12 or np.max(np.abs(np.diff(theta) - h)) > 1e-9:
            raise ValueError('theta must be the uniform grid on [0, pi].')
        bad = np.flatnonzero(~(np.isfinite(rho) & (rho > 0)))
        if bad.size:
            raise DomainError(f'rho must be finite and positive: node {bad[0]} '
                              f'(theta={theta[bad[0]]:.6f}) has rho={rho[bad[0]]}.')
        theta.setflags(write=False)
        rho.setflags(write=False)
        object.__setattr__(self, 'theta', theta)
        object.__setattr__(self, 'rho', rho)

    @property
    def nodes(self) -> int:
        return self.theta.size

    @property
    def h(self) -> float:
        return float(self.theta[1] - self.theta[0])

    @property
    def symmetry(self) -> str:
        return 'axisymmetric' if self.amb.field_kind == 'R' else f'S^{self.amb.a}-invariant'

    @property
    def phi(self) -> np.ndarray:
        return phi_from_rho(self.rho)


def constant_profile(amb: AmbientSpace, rho0: float, nodes: int = 512) -> RadialProfile:
    return RadialProfile(amb, reduced_grid(nodes), np.full(nodes, float(rho0)))


def profile_from_function(amb: AmbientSpace, fun, nodes: int = 512) -> RadialProfile:
    """Sample rho = fun(theta) on the reduced grid."""
    theta = reduced_grid(nodes)
    return RadialProfile(amb, theta, np.broadcast_to(fun(theta), theta.shape))


def derivatives(u, amb: AmbientSpace, order: int, theta=None) -> np.ndarray:
    """c^N d^N u / d theta^N, the N-th derivative in sigma arclength along the reduced direction."""
    u = np.asarray(u, dtype=float)
    if theta is None:
        theta = reduced_grid(u.shape[-1])
    h = theta[1] - theta[0]
    return amb.coordinate_scale**order * d_theta(u, h, order)


@dataclass(frozen=True, eq=False)
class GeometrySlice:
    """Per-node geometry of a radial graph.

    curvatures holds the diagonal of the shape operator in the adapted frame: column 0 is the
    radial horizontal direction, then b - 1 tangential horizontal copies, then a vertical copies.
    """
    amb: AmbientSpace
    theta: np.ndarray
    rho: np.ndarray
    phi: np.ndarray
    grad_phi_sq: np.ndarray
    v: np.ndarray
    H: np.ndarray
    hbar: np.ndarray
    curvatures: np.ndarray
    hessian_trace: np.ndarray
    A_sq: np.ndarray
    traceless_sq: np.ndarray
    measure: np.ndarray
    area_element: np.ndarray

    @property
    def h(self) -> float:
        return float(self.theta[1] - self.theta[0])

    @property
    def nodes(self) -> int:
        return self.theta.size

    @property
    def horizontal(self) -> np.ndarray:
        return self.curvatures[:, :self.amb.horizontal_dim]

    @property
    def vertical(self) -> np.ndarray:
        return self.curvatures[:, self.amb.horizontal_dim:]

    @property
    def max_principal(self) -> float:
        return float(np.max(self.curvatures))


def _check_finite(name, values, theta):
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        raise NumericBlowupError(f'{name} is not finite at node {bad[0]} (theta={theta[bad[0]]:.6f}).')


@dataclass(frozen=True, eq=False)
class StageFields:
    """The fields a time step reads: phi, rho, sinh(rho), |grad phi|^2, v and H."""
    phi: np.ndarray
    rho: np.ndarray
    sinh: np.ndarray
    grad_phi_sq: np.ndarray
    v: np.ndarray
    H: np.ndarray


def _mean_curvature(phi, rho, amb: AmbientSpace, theta, h: float):
    c, b = amb.coordinate_scale, amb.horizontal_dim
    phi_s = c * d_theta(phi, h, 1)
    phi_ss = c**2 * d_theta(phi, h, 2)
    phi_tan = cot_term(c * phi_s, phi_ss, theta)
    grad_sq = phi_s**2
    v = np.sqrt(1 + grad_sq)
    trace = phi_ss / v**2 + (b - 1) * phi_tan
    sh = np.sinh(rho)
    hb = np.asarray(hbar(rho, amb))
    H = -trace / (v * sh) + hb / v
    return phi_ss, phi_tan, grad_sq, v, trace, sh, hb, H


def stage_fields(phi, amb: AmbientSpace, theta) -> StageFields:
    """v and H of the profile with ln tanh(rho/2) = phi, without the second fundamental form.

    Args:
        phi (np.ndarray): negative samples on the uniform reduced grid.
        amb (AmbientSpace): ambient space.
        theta (np.ndarray): the reduced grid.

    Returns:
        StageFields
    """
    phi = np.asarray(phi, dtype=float)
    rho = rho_from_phi(phi)
    with np.errstate(over='ignore', invalid='ignore', divide='ignore'):
        _, _, grad_sq, v, _, sh, _, H = _mean_curvature(phi, rho, amb, theta, theta[1] - theta[0])
    _check_finite('v', v, theta)
    _check_finite('H', H, theta)
    return StageFields(phi=phi, rho=rho, sinh=sh, grad_phi_sq=grad_sq, v=v, H=H)


def geometry_slice(profile: RadialProfile) -> GeometrySlice:
    """Evaluate the radial-graph geometry of a profile node by node.

    Args:
        profile (RadialProfile): invariant radial function.

    Returns:
        GeometrySlice
    """
    amb, theta, rho = profile.amb, profile.theta, profile.rho
    b, a, m = amb.horizontal_dim, amb.a, amb.m

    with np.errstate(over='ignore', invalid='ignore', divide='ignore'):
        phi = phi_from_rho(rho)
        phi_ss, phi_tan, grad_sq, v, trace, sh, hb, H = _mean_curvature(phi, rho, amb, theta, profile.h)
        ch = np.cosh(rho)
        coth = ch / sh
        tanh = sh / ch

        k_radial = -phi_ss / (v**3 * sh) + coth / v
        k_tangential = -phi_tan / (v * sh) + coth / v
        k_vertical = (coth + tanh) / v
        curvatures = np.column_stack([k_radial] + [k_tangential] * (b - 1) + [k_vertical] * a)

        # Berger Hessian with lam = cosh^2 rho: its mixed block pairs tangential and vertical
        # directions and gives the off-diagonal part of the shape operator
        off_diagonal_sq = a * berger_mixed_factor(ch**2) * grad_sq / (v * sh)**2
        A_sq = np.sum(curvatures**2, axis=1) + off_diagonal_sq
        traceless_sq = np.sum((curvatures - H[:, np.newaxis] / m)**2, axis=1) + off_diagonal_sq

        measure = reduced_measure(amb, theta)
        area_element = v * sh**m * ch**a * measure

    for name, values in (('v', v), ('H', H), ('|A|^2', A_sq), ('area element', area_element)):
        _check_finite(name, values, theta)
    return GeometrySlice(amb=amb, theta=theta, rho=rho, phi=phi, grad_phi_sq=grad_sq, v=v, H=H,
                         hbar=hb, curvatures=curvatures, hessian_trace=trace, A_sq=A_sq,
                         traceless_sq=traceless_sq, measure=measure, area_element=area_element)


def integrate(values, theta) -> float:
    """Quadrature over the reduced coordinate."""
    return float(scipy.integrate.simpson(values, x=theta))


def area(profile: RadialProfile) -> float:
    """|M| as the quadrature of the induced area element."""
    sl = geometry_slice(profile)
    return integrate(sl.area_element, sl.theta)


def gradient_sq(F, sl: GeometrySlice) -> np.ndarray:
    """|grad F|^2 on the induced metric for an invariant function F."""
    F_s = sl.amb.coordinate_scale * d_theta(F, sl.h, 1)
    return F_s**2 / (sl.v**2 * np.sinh(sl.rho)**2)


def laplace_beltrami(F, sl: GeometrySlice) -> np.ndarray:
    """Laplace-Beltrami operator of the induced metric on an invariant function F.

    Delta F = c^2 / A [B (F'' + (b-1) cot F') + B' F'] with A = v sinh^m cosh^a and
    B = sinh^(m-2) cosh^a / v.
    """
    amb = sl.amb
    c, b = amb.coordinate_scale, amb.horizontal_dim
    h = sl.h
    sh = np.sinh(sl.rho)
    ch = np.cosh(sl.rho)
    A = sl.v * sh**amb.m * ch**amb.a
    B = sh**(amb.m - 2) * ch**amb.a / sl.v
    F_t = d_theta(F, h, 1)
    F_tt = d_theta(F, h, 2)
    B_t = d_theta(B, h, 1)
    return c**2 / A * (B * (F_tt + (b - 1) * cot_term(F_t, F_tt, sl.theta)) + B_t * F_t)


def hessian_relation_check(u, lam: float, amb: AmbientSpace, reference):
    """Compare Berger and round Laplacian and Hessian norm of an invariant function.

    Args:
        u (np.ndarray): invariant test function on the reduced grid.
        lam (float): Berger parameter.
        amb (AmbientSpace): K != R.
        reference (tuple): (Delta_sigma u, |Hess_sigma u|^2, |grad_sigma u|^2) on the same grid,
            typically from closed forms.

    Returns:
        tuple: (max |Delta_e u - Delta_sigma u|,
                max ||Hess_e u|^2 - |Hess_sigma u|^2 - 2a(lam - 1)|grad u|^2|)
    """
    if amb.field_kind == 'R':
        raise DomainError('The Berger Hessian relation needs K != R.')
    if lam <= 0:
        raise DomainError(f'Berger parameter must be positive, got {lam}.')
    u = np.asarray(u, dtype=float)
    theta = reduced_grid(u.size)
    b = amb.horizontal_dim
    u_s = derivatives(u, amb, 1, theta)
    u_ss = derivatives(u, amb, 2, theta)
    u_tan = cot_term(amb.coordinate_scale * u_s, u_ss, theta)
    # vertical diagonal entries of the Hessian of a basic function vanish for every lam
    lap_e = u_ss + (b - 1) * u_tan
    hess_e = u_ss**2 + (b - 1) * u_tan**2 + amb.a * berger_mixed_factor(lam) * u_s**2

    lap_sigma, hess_sigma, grad_sigma = (np.asarray(r, dtype=float) for r in reference)
    res_lap = np.max(np.abs(lap_e - lap_sigma))
    res_hess = np.max(np.abs(hess_e - hess_sigma - 2 * amb.a * (lam - 1) * grad_sigma))
    logging.debug(f'Hessian relation on {amb}, lam={lam}: {res_lap:.3e}, {res_hess:.3e}')
    return float(res_lap), float(res_hess)
