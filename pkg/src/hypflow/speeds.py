"""Speed functions psi(H) and their validation against the structural conditions.

Named families:
    imcf                   psi = x
    power:p                psi = x^p
    log1p                  psi = ln(1 + x)
    powersum:c1,p1;c2,p2   psi = sum_i c_i x^p_i
    expm1:k                psi = (e^{kx} - 1) / k
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, List, Tuple

import numpy as np
import scipy.stats


CONDITIONS = ('zero', 'positive', 'increasing', 'ii', 'iii', 'convex')
CONDITION_LABELS = {'zero': 'psi(0+) = 0',
                    'positive': 'psi > 0',
                    'increasing': "psi' > 0",
                    'ii': "x psi'/psi <= 1",
                    'iii': "psi'' psi - 2 psi'^2 <= 0",
                    'convex': '1/psi convex'}


class SpeedSpecError(ValueError):
    pass


class SpeedEvaluationError(FloatingPointError):
    pass


@dataclass(frozen=True)
class SpeedFunction:
    """psi with its first two derivatives, all vectorized over x > 0."""
    eval: Callable
    deriv: Callable
    deriv2: Callable
    label: str

    def __call__(self, x):
        return self.eval(x)


def imcf() -> SpeedFunction:
    return SpeedFunction(eval=lambda x: np.asarray(x, dtype=float),
                         deriv=lambda x: np.ones_like(x, dtype=float),
                         deriv2=lambda x: np.zeros_like(x, dtype=float),
                         label='imcf')


def power(p: float) -> SpeedFunction:
    return powersum([(1.0, p)], label=f'power:{p:g}')


def log1p() -> SpeedFunction:
    return SpeedFunction(eval=np.log1p,
                         deriv=lambda x: 1 / (1 + np.asarray(x, dtype=float)),
                         deriv2=lambda x: -1 / (1 + np.asarray(x, dtype=float))**2,
                         label='log1p')


def powersum(terms: List[Tuple[float, float]], label: str = None) -> SpeedFunction:
    """psi = sum c x^p over terms [(c, p), ...]."""
    coeffs = np.array([c for c, _ in terms], dtype=float)
    powers = np.array([p for _, p in terms], dtype=float)

    def _sum(x, scale, shift):
        x = np.asarray(x, dtype=float)
        return np.sum(scale[:, np.newaxis] * x.ravel()[np.newaxis, :]**(powers - shift)[:, np.newaxis],
                      axis=0).reshape(x.shape)

    if label is None:
        label = 'powersum:' + ';'.join(f'{c:g},{p:g}' for c, p in terms)
    return SpeedFunction(eval=lambda x: _sum(x, coeffs, 0),
                         deriv=lambda x: _sum(x, coeffs * powers, 1),
                         deriv2=lambda x: _sum(x, coeffs * powers * (powers - 1), 2),
                         label=label)


def expm1(k: float) -> SpeedFunction:
    return SpeedFunction(eval=lambda x: np.expm1(k * np.asarray(x, dtype=float)) / k,
                         deriv=lambda x: np.exp(k * np.asarray(x, dtype=float)),
                         deriv2=lambda x: k * np.exp(k * np.asarray(x, dtype=float)),
                         label=f'expm1:{k:g}')


def _parse_float(token: str, spec: str) -> float:
    try:
        value = float(token)
    except ValueError:
        raise SpeedSpecError(f'Could not parse number {token!r} in speed {spec!r}.')
    if not np.isfinite(value):
        raise SpeedSpecError(f'Non-finite parameter {token!r} in speed {spec!r}.')
    return value


def parse_speed(spec: str) -> SpeedFunction:
    """Build a SpeedFunction from its name, e.g. 'log1p' or 'powersum:1,0.5;0.5,1'."""
    spec = spec.strip()
    name, _, params = spec.partition(':')
    name = name.strip().lower()
    if name in ('imcf', 'log1p'):
        if params:
            raise SpeedSpecError(f'Speed {name!r} takes no parameters, got {params!r}.')
        return imcf() if name == 'imcf' else log1p()
    if not params:
        raise SpeedSpecError(f'Speed {spec!r} needs parameters.')
    if name == 'power':
        p = _parse_float(params, spec)
        if p <= 0:
            raise SpeedSpecError(f'power:p needs p > 0, got {p}. Negative powers violate psi(0+) = 0.')
        return power(p)
    if name == 'powersum':
        terms = []
        for term in params.split(';'):
            parts = term.split(',')
            if len(parts) != 2:
                raise SpeedSpecError(f'powersum term {term!r} must be "c,p" in speed {spec!r}.')
            c, p = (_parse_float(part, spec) for part in parts)
            if c <= 0 or p <= 0:
                raise SpeedSpecError(f'powersum term {term!r} needs c > 0 and p > 0.')
            terms.append((c, p))
        return powersum(terms, label=f'powersum:{params}')
    if name == 'expm1':
        k = _parse_float(params, spec)
        if k <= 0:
            raise SpeedSpecError(f'expm1:k needs k > 0, got {k}.')
        return expm1(k)
    raise SpeedSpecError(f'Unknown speed {name!r}. Known: imcf, power:p, log1p, powersum:c,p;..., expm1:k.')


def default_grid(nb_points: int = 200) -> np.ndarray:
    return np.logspace(-4, 3, nb_points)


@dataclass
class ValidationReport:
    label: str
    checks: dict = field(default_factory=dict)
    violations: list = field(default_factory=list)
    zero_limit: float = np.nan

    @property
    def passed(self) -> bool:
        return not self.violations

    def failed_conditions(self):
        return [name for name in CONDITIONS if not self.checks.get(name, True)]

    def render(self) -> str:
        lines = [f'speed: {self.label}']
        for name in CONDITIONS:
            status = 'pass' if self.checks.get(name, True) else 'FAIL'
            line = f'{name:>10}  {CONDITION_LABELS[name]:<28} {status}'
            bad = [v for v in self.violations if v[0] == name]
            if bad:
                line += f'  ({len(bad)} points, first x={bad[0][1]:.6e} value={bad[0][2]:.6e})'
            lines.append(line)
        lines.append(f'psi(0+) ~ {self.zero_limit:.3e}')
        lines.append('result: ' + ('pass' if self.passed else 'fail'))
        return '\n'.join(lines)


def _evaluate(fun, x, what, label):
    with np.errstate(all='ignore'):
        values = np.asarray(fun(x), dtype=float)
    bad = ~np.isfinite(values)
    if np.any(bad):
        where = np.asarray(x, dtype=float)[bad][0]
        raise SpeedEvaluationError(f'{label}: {what} is not finite at x={where:.6e}.')
    return values


def zero_limit(psi: SpeedFunction, nb_points: int = 13) -> float:
    """Extrapolate psi(0+) from x_k = 10^(-4-k).

    If psi decays like a power (log-log slope bounded away from 0) the limit is 0; otherwise
    the value at the smallest x is taken as the limit.
    """
    x = 10.0**(-4 - np.arange(nb_points))
    values = _evaluate(psi.eval, x, 'psi', psi.label)
    if np.all(values > 0):
        slope = scipy.stats.linregress(np.log(x[-4:]), np.log(values[-4:])).slope
        decreasing = np.all(np.diff(values) < 0)
        logging.debug(f'{psi.label}: log-log slope near 0 is {slope:.4f}.')
        if slope > 1e-3 and decreasing:
            return 0.0
    return float(values[-1])


def validate_speed(psi: SpeedFunction, grid=None, tol: float = 1e-10, zero_tol: float = 1e-6) -> ValidationReport:
    """Check the structural conditions pointwise on the grid.

    Args:
        psi (SpeedFunction): speed to check.
        grid (np.ndarray, optional): positive, increasing points covering [1e-4, 1e3]. Defaults to default_grid().
        tol (float, optional): absolute tolerance of the pointwise conditions. Defaults to 1e-10.
        zero_tol (float, optional): bound on the extrapolated psi(0+). Defaults to 1e-6.

    Returns:
        ValidationReport: all violations as (condition, x, value).
    """
    x = default_grid() if grid is None else np.asarray(grid, dtype=float)
    if x.ndim != 1 or x.size == 0:
        raise ValueError('Validation grid must be a nonempty 1-D array.')
    if np.any(x <= 0) or np.any(np.diff(x) <= 0):
        raise ValueError('Validation grid must be strictly positive and increasing.')
    if x[0] > 1e-4 * (1 + 1e-12) or x[-1] < 1e3 * (1 - 1e-12):
        raise ValueError(f'Validation grid [{x[0]:g}, {x[-1]:g}] does not span [1e-4, 1e3].')

    psi0 = _evaluate(psi.eval, x, 'psi', psi.label)
    psi1 = _evaluate(psi.deriv, x, "psi'", psi.label)
    psi2 = _evaluate(psi.deriv2, x, "psi''", psi.label)

    report = ValidationReport(label=psi.label)
    pointwise = {'positive': (psi0, psi0 > 0),
                 'increasing': (psi1, psi1 > 0)}
    with np.errstate(all='ignore'):
        ratio = x * psi1 / psi0
        # factored so that fast growing psi does not overflow into inf - inf
        concavity = psi1**2 * ((psi0 / psi1) * (psi2 / psi1) - 2)
    pointwise['ii'] = (ratio, ratio - 1 <= tol)
    pointwise['iii'] = (concavity, concavity <= tol)

    inverse = 1 / psi0
    slopes = np.diff(inverse) / np.diff(x)
    jumps = np.diff(slopes)
    scale = np.abs(slopes[1:]) + np.abs(slopes[:-1])
    convex_ok = np.ones_like(x, dtype=bool)
    convex_ok[1:-1] = jumps >= -tol - 1e-8 * scale
    convex_lhs = np.zeros_like(x)
    convex_lhs[1:-1] = jumps
    pointwise['convex'] = (convex_lhs, convex_ok)

    report.zero_limit = zero_limit(psi)
    report.checks['zero'] = abs(report.zero_limit) <= zero_tol
    if not report.checks['zero']:
        report.violations.append(('zero', 0.0, report.zero_limit))

    for name in CONDITIONS[1:]:
        lhs, ok = pointwise[name]
        report.checks[name] = bool(np.all(ok))
        report.violations.extend((name, float(xi), float(li)) for xi, li in zip(x[~ok], lhs[~ok]))

    logging.info(f'Validated {psi.label}: ' + ('pass' if report.passed else f'fail {report.failed_conditions()}'))
    return report
