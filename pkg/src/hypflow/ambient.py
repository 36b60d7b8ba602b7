"""Ambient hyperbolic spaces KH^n: structure constants, curvature and Berger metrics."""
import logging
from dataclasses import dataclass

import numpy as np
import scipy.special


FIELDS = {'R': 0, 'C': 1, 'H': 3}


class DimensionError(ValueError):
    pass


class DomainError(ValueError):
    pass


class CurvatureInputError(ValueError):
    pass


@dataclass(frozen=True)
class AmbientSpace:
    """Real, complex or quaternionic hyperbolic space of K-dimension n.

    Attributes:
        field_kind (str): 'R', 'C' or 'H'.
        n (int): dimension over K.
        a (int): dim_R K - 1 (number of vertical directions).
        m (int): (a+1)n - 1, dimension of a real hypersurface.
    """
    field_kind: str
    n: int
    a: int
    m: int

    @property
    def horizontal_dim(self) -> int:
        """Number of horizontal directions on S^m (b)."""
        return self.m - self.a

    @property
    def coordinate_scale(self) -> int:
        """Factor c with d/ds = c d/dtheta for the reduced coordinate."""
        return 1 if self.field_kind == 'R' else 2

    @property
    def horosphere_mean_curvature(self) -> int:
        return self.m + self.a

    @property
    def real_dim(self) -> int:
        return (self.a + 1) * self.n

    def __str__(self):
        return f'{self.field_kind}H^{self.n}'


def make_ambient(field_kind: str, n: int) -> AmbientSpace:
    """Build the ambient space and check the dimension hypotheses.

    Args:
        field_kind (str): 'R', 'C' or 'H'.
        n (int): dimension over K. Needs n >= 3 for 'R' and n >= 2 otherwise.

    Returns:
        AmbientSpace
    """
    if field_kind not in FIELDS:
        raise DimensionError(f'Unknown field {field_kind!r}. Expected one of {list(FIELDS)}.')
    if int(n) != n:
        raise DimensionError(f'Dimension must be an integer, got {n}.')
    n = int(n)
    n_min = 3 if field_kind == 'R' else 2
    if n < n_min:
        raise DimensionError(f'{field_kind}H^{n}: dimension too small, need n >= {n_min}.')
    a = FIELDS[field_kind]
    amb = AmbientSpace(field_kind=field_kind, n=n, a=a, m=(a + 1) * n - 1)
    logging.debug(f'Ambient {amb}: a={amb.a}, m={amb.m}.')
    return amb


def sphere_volume(k: int) -> float:
    """Volume of the round unit sphere S^k."""
    return 2 * np.pi**((k + 1) / 2) / scipy.special.gamma((k + 1) / 2)


_UNIT_QUATERNIONS = np.array([
    [[0, -1, 0, 0], [1, 0, 0, 0], [0, 0, 0, -1], [0, 0, 1, 0]],   # i
    [[0, 0, -1, 0], [0, 0, 0, 1], [1, 0, 0, 0], [0, -1, 0, 0]],   # j
    [[0, 0, 0, -1], [0, 0, -1, 0], [0, 1, 0, 0], [1, 0, 0, 0]],   # k
], dtype=float)


def complex_structures(amb: AmbientSpace) -> np.ndarray:
    """Complex structures J_i on the tangent space at the origin, R^{(a+1)n}.

    J_i is left multiplication by the i-th imaginary unit of K acting coordinatewise.

    Returns:
        np.ndarray: [a, (a+1)n, (a+1)n]
    """
    if amb.a == 0:
        return np.zeros((0, amb.n, amb.n))
    if amb.a == 1:
        units = _UNIT_QUATERNIONS[:1, :2, :2]
    else:
        units = _UNIT_QUATERNIONS
    return np.stack([np.kron(np.eye(amb.n), unit) for unit in units])


def ambient_curvature(X, Y, Z, W, amb: AmbientSpace) -> float:
    """R(X, Y, Z, W) of KH^n at the origin, from the explicit curvature display.

    Sign convention: R(X, Y, Y, X) = 1 + 3 sum_i <X, J_i Y>^2 for orthonormal X, Y;
    the sectional curvature is the negative of that value.
    """
    X, Y, Z, W = (np.asarray(vec, dtype=float) for vec in (X, Y, Z, W))
    value = -np.dot(X, Z) * np.dot(Y, W) + np.dot(X, W) * np.dot(Y, Z)
    for J in complex_structures(amb):
        value += (-np.dot(X, J @ Z) * np.dot(Y, J @ W)
                  + np.dot(X, J @ W) * np.dot(Y, J @ Z)
                  - 2 * np.dot(X, J @ Y) * np.dot(Z, J @ W))
    return float(value)


def ambient_sectional(X, Y, amb: AmbientSpace, tol: float = 1e-10) -> float:
    """R(X, Y, Y, X) for an orthonormal pair. Lies in [1, 4]; equals 1 for K=R."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if X.shape != (amb.real_dim,) or Y.shape != (amb.real_dim,):
        raise CurvatureInputError(f'Tangent vectors of {amb} need {amb.real_dim} components, '
                                  f'got {X.shape} and {Y.shape}.')
    gram = np.array([[X @ X, X @ Y], [Y @ X, Y @ Y]])
    deviation = np.max(np.abs(gram - np.eye(2)))
    if deviation > tol:
        raise CurvatureInputError(f'X, Y are not orthonormal (Gram matrix off by {deviation:.3e}).')
    return ambient_curvature(X, Y, Y, X, amb)


def sectional_curvature(X, Y, amb: AmbientSpace) -> float:
    return -ambient_sectional(X, Y, amb)


def sectional_bounds(amb: AmbientSpace):
    """(min, max) sectional curvature: (-4, -1) for K != R, (-1, -1) for K = R."""
    return (-1.0, -1.0) if amb.a == 0 else (-4.0, -1.0)


def ambient_ricci(amb: AmbientSpace) -> float:
    """Ricci eigenvalue on unit vectors; KH^n is Einstein."""
    return float(-(amb.m + 3 * amb.a))


def _check_radius(rho):
    rho = np.asarray(rho, dtype=float)
    if np.any(np.isnan(rho)) or np.any(rho <= 0):
        bad = rho[~(rho > 0)].ravel()[0]
        raise DomainError(f'Radius must be positive, got {bad}.')
    return rho


def hbar(rho, amb: AmbientSpace):
    """Mean curvature of the geodesic sphere of radius rho: m coth(rho) + a tanh(rho)."""
    rho = _check_radius(rho)
    value = amb.m / np.tanh(rho) + amb.a * np.tanh(rho)
    return value if value.ndim else float(value)


def hbar_derivative(rho, amb: AmbientSpace):
    """d hbar / d rho = -m / sinh^2 + a / cosh^2."""
    rho = _check_radius(rho)
    value = -amb.m / np.sinh(rho)**2 + amb.a / np.cosh(rho)**2
    return value if value.ndim else float(value)


def sphere_area(rho, amb: AmbientSpace):
    """Area of the geodesic sphere of radius rho: omega_m sinh^m cosh^a."""
    rho = _check_radius(rho)
    value = sphere_volume(amb.m) * np.sinh(rho)**amb.m * np.cosh(rho)**amb.a
    return value if value.ndim else float(value)


def berger_metric(amb: AmbientSpace, lam: float) -> np.ndarray:
    """Diagonal of the Berger metric e_lam in an adapted frame: horizontal 1, vertical lam."""
    if lam <= 0:
        raise DomainError(f'Berger parameter must be positive, got {lam}.')
    return np.concatenate((np.ones(amb.horizontal_dim), np.full(amb.a, float(lam))))


_SU2_STRUCTURE = np.zeros((3, 3, 3))
for _i, _j, _k in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
    _SU2_STRUCTURE[_i, _j, _k] = 2.0
    _SU2_STRUCTURE[_j, _i, _k] = -2.0


def berger_connection(lam) -> np.ndarray:
    """Levi-Civita coefficients of the Berger metric on S^3 = Sp(1).

    Left-invariant frame E1, E2 (horizontal), E3 (vertical) with [E1, E2] = 2 E3 and cyclic,
    metric diag(1, 1, lam). Koszul formula for left-invariant fields.

    Args:
        lam: Berger parameter, scalar or array.

    Returns:
        np.ndarray: gamma[..., i, j, k] with nabla_{E_i} E_j = sum_k gamma[..., i, j, k] E_k.
    """
    lam = np.asarray(lam, dtype=float)
    g = np.stack(np.broadcast_arrays(np.ones_like(lam), np.ones_like(lam), lam), axis=-1)
    C = _SU2_STRUCTURE
    koszul = 0.5 * (np.einsum('ijk,...k->...ijk', C, g)
                    - np.einsum('jki,...i->...ijk', C, g)
                    + np.einsum('kij,...j->...ijk', C, g))
    return koszul / g[..., np.newaxis, np.newaxis, :]


def berger_mixed_factor(lam):
    """Factor F with sum of squared mixed Hessian entries = F |grad u|^2 per vertical direction.

    For a basic function u and the unit vertical field e3 = E3 / sqrt(lam),
    Hess(E1, e3) u = -gamma_13^2 E2 u and Hess(E2, e3) u = -gamma_23^1 E1 u. The two coefficients
    have equal size, so counting both orderings of each pair gives F = gamma_13^2 + gamma_23^1^2.
    """
    lam = np.asarray(lam, dtype=float)
    if np.any(~(lam > 0)):
        raise DomainError(f'Berger parameter must be positive, got {lam[~(lam > 0)].ravel()[0]}.')
    gamma = berger_connection(lam) / np.sqrt(lam)[..., np.newaxis, np.newaxis, np.newaxis]
    value = gamma[..., 0, 2, 1]**2 + gamma[..., 1, 2, 0]**2
    return value if value.ndim else float(value)
