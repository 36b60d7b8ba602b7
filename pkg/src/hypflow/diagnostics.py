"""Decay rates, masses, rescaled limits and evolution residuals of flow trajectories."""
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg
import scipy.optimize
import scipy.stats
import toolz
import xarray as xr

from .ambient import AmbientSpace, ambient_ricci, hbar_derivative, make_ambient, sphere_area
from .flow import basic_hooks, state_at
from .geometry import (GeometrySlice, cot_term, d_theta, derivatives, gradient_sq, integrate,
                       laplace_beltrami, reduced_grid, reduced_measure)
from .speeds import SpeedFunction, parse_speed
from . import trajectory as tr


ROUND_THRESHOLD = 1e-8
NONCONSTANT_THRESHOLD = 1e-4


class FitError(ValueError):
    pass


class RootFindError(RuntimeError):
    pass


class WrongFieldError(ValueError):
    pass


@dataclass(frozen=True)
class RateFit:
    """Least-squares fit of log(series) = intercept - rate * t on [t_start, t_end]."""
    rate: float
    t_start: float
    t_end: float
    residual: float
    intercept: float
    stderr: float

    def within(self, target: float, tolerance: float) -> bool:
        return abs(self.rate - target) <= tolerance * abs(target)


def _ambient(traj: xr.Dataset) -> AmbientSpace:
    return make_ambient(traj.attrs['field'], int(traj.attrs['n']))


def _speed(traj: xr.Dataset, psi: Optional[SpeedFunction]) -> SpeedFunction:
    return parse_speed(traj.attrs['speed']) if psi is None else psi


def target_rate(amb: AmbientSpace, psi: SpeedFunction, factor: float = 2.0) -> float:
    """factor / psi(m + a)."""
    return factor / float(psi.eval(amb.horosphere_mean_curvature))


def default_window(times, start: float = 2.0):
    """Last 60% of the run, excluding t < start."""
    t0, t1 = float(times[0]), float(times[-1])
    t_start = max(start, t0 + 0.4 * (t1 - t0))
    if t_start >= t1:
        logging.warning(f'Run ends at t={t1:.3g} before the fit window start {start}; using the last 60%.')
        t_start = t0 + 0.4 * (t1 - t0)
    return t_start, t1


def _log_linear(times, values, window):
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if window is None:
        window = default_window(times)
    t_start, t_end = window
    if not t_end > t_start:
        raise FitError(f'Empty fit window [{t_start}, {t_end}].')
    mask = (times >= t_start - 1e-12) & (times <= t_end + 1e-12)
    if np.sum(mask) < 3:
        raise FitError(f'Need at least 3 samples in [{t_start:.3g}, {t_end:.3g}], got {np.sum(mask)}.')
    t, y = times[mask], values[mask]
    if np.any(~(y > 0)):
        bad = np.flatnonzero(~(y > 0))[0]
        raise FitError(f'Nonpositive value {y[bad]} at t={t[bad]:.6g} in fit window.')
    fit = scipy.stats.linregress(t, np.log(y))
    residual = float(np.sqrt(np.mean((np.log(y) - (fit.intercept + fit.slope * t))**2)))
    return fit, residual, float(t[0]), float(t[-1])


def fit_decay(series: xr.DataArray, window=None) -> RateFit:
    """Exponential decay rate of a positive series.

    Args:
        series (xarray.DataArray): values over time.
        window (tuple, optional): (t_start, t_end). Defaults to default_window.

    Returns:
        RateFit: rate > 0 for decaying series.
    """
    fit, residual, t_start, t_end = _log_linear(series.time.values, series.values, window)
    return RateFit(rate=-float(fit.slope), t_start=t_start, t_end=t_end, residual=residual,
                   intercept=float(fit.intercept), stderr=float(fit.stderr))


def fit_growth(series: xr.DataArray, window=None) -> RateFit:
    """Exponential growth rate of a positive series."""
    fit, residual, t_start, t_end = _log_linear(series.time.values, series.values, window)
    return RateFit(rate=float(fit.slope), t_start=t_start, t_end=t_end, residual=residual,
                   intercept=float(fit.intercept), stderr=float(fit.stderr))


@dataclass(frozen=True)
class VolumeGrowth:
    fit: RateFit
    target: float
    v_ratio: float
    bounded: bool


def volume_growth(traj: xr.Dataset, psi: SpeedFunction = None, window=None, bound: float = 10.0) -> VolumeGrowth:
    """Growth rate of log |M_t| and boundedness of |M_t| exp(-(m+a) t / psi(m+a))."""
    amb = _ambient(traj)
    psi = _speed(traj, psi)
    target = target_rate(amb, psi, factor=amb.horosphere_mean_curvature)
    fit = fit_growth(traj.area, window)
    v_norm = traj.area.values * np.exp(-target * traj.time.values)
    v_ratio = float(np.max(v_norm) / np.min(v_norm))
    logging.info(f'Volume growth rate {fit.rate:.6f} (target {target:.6f}), V max/min {v_ratio:.4f}.')
    return VolumeGrowth(fit=fit, target=target, v_ratio=v_ratio, bounded=v_ratio <= bound)


def second_ff_series(amb: AmbientSpace):
    """Squared deviation series fitted for the second fundamental form."""
    if amb.field_kind == 'R':
        return {'horizontal': 'sup_horizontal_dev_sq', 'traceless': 'sup_traceless_sq'}
    return {'horizontal': 'sup_horizontal_dev_sq', 'vertical': 'sup_vertical_dev_sq'}


def second_ff_convergence(traj: xr.Dataset, psi: SpeedFunction = None, window=None):
    """Decay of the squared second fundamental form deviations from the horosphere values.

    Returns:
        dict: name -> (RateFit, target rate). 'traceless' (K=R), 'horizontal', 'vertical' (K!=R).
    """
    amb = _ambient(traj)
    psi = _speed(traj, psi)
    target = target_rate(amb, psi, factor=4.0)
    fits = dict()
    for name, series in second_ff_series(amb).items():
        if series not in traj:
            logging.warning(f'{series} not recorded, skipping the {name} fit.')
            continue
        fits[name] = (fit_decay(traj[series], window), target)
    return fits


def hawking_mass(sl: GeometrySlice) -> float:
    """|M|^(-1+4/m) int |traceless A|^2 dmu, for K = R."""
    amb = sl.amb
    if amb.field_kind != 'R':
        raise WrongFieldError(f'The Hawking mass is defined for K=R only, got {amb}.')
    total = integrate(sl.area_element, sl.theta)
    return total**(-1 + 4 / amb.m) * integrate(sl.traceless_sq * sl.area_element, sl.theta)


def by_mass(sl: GeometrySlice) -> float:
    """|M|^(-1+2/(m+a)) int (H - hbar) dmu."""
    amb = sl.amb
    total = integrate(sl.area_element, sl.theta)
    return total**(-1 + 2 / amb.horosphere_mean_curvature) * integrate((sl.H - sl.hbar) * sl.area_element, sl.theta)


def mass(sl: GeometrySlice) -> float:
    """Hawking mass for K = R, Brown-York-like mass otherwise."""
    return hawking_mass(sl) if sl.amb.field_kind == 'R' else by_mass(sl)


def _limit_samples(f, amb: AmbientSpace, nodes: int):
    if callable(f):
        theta = reduced_grid(nodes)
        values = np.broadcast_to(f(theta), theta.shape).astype(float)
    else:
        values = np.asarray(f, dtype=float)
        theta = reduced_grid(values.size)
    return theta, values, reduced_measure(amb, theta)


def hawking_mass_limit(f, amb: AmbientSpace, nodes: int = 1025) -> float:
    """(int e^{mf})^(-1+4/m) int e^{(m-2)f} |traceless Hess e^{-f}|^2 over the round sphere.

    Args:
        f: samples on the reduced grid or a callable of theta.
        amb (AmbientSpace): K = R.
        nodes (int, optional): grid nodes when f is callable. Defaults to 1025.
    """
    if amb.field_kind != 'R':
        raise WrongFieldError(f'The Hawking mass limit is defined for K=R only, got {amb}.')
    theta, f, weight = _limit_samples(f, amb, nodes)
    m = amb.m
    w = np.exp(-f)
    h = theta[1] - theta[0]
    w_t = d_theta(w, h, 1)
    w_tt = d_theta(w, h, 2)
    eig_radial = w_tt
    eig_tangential = cot_term(w_t, w_tt, theta)
    mean_eig = (eig_radial + (m - 1) * eig_tangential) / m
    traceless_sq = (eig_radial - mean_eig)**2 + (m - 1) * (eig_tangential - mean_eig)**2
    volume = integrate(np.exp(m * f) * weight, theta)
    return volume**(-1 + 4 / m) * integrate(np.exp((m - 2) * f) * traceless_sq * weight, theta)


def by_mass_limit(f, amb: AmbientSpace, nodes: int = 1025) -> float:
    """(int e^{(m+a)f})^(-1+2/(m+a)) int e^{(m+a)f} (w Delta w - (m+a)/2 |grad w|^2), w = e^{-f}."""
    theta, f, weight = _limit_samples(f, amb, nodes)
    k = amb.horosphere_mean_curvature
    w = np.exp(-f)
    w_s = derivatives(w, amb, 1, theta)
    w_ss = derivatives(w, amb, 2, theta)
    w_tan = cot_term(amb.coordinate_scale * w_s, w_ss, theta)
    laplacian = w_ss + (amb.horizontal_dim - 1) * w_tan
    integrand = np.exp(k * f) * (w * laplacian - k / 2 * w_s**2)
    volume = integrate(np.exp(k * f) * weight, theta)
    return volume**(-1 + 2 / k) * integrate(integrand * weight, theta)


@dataclass(frozen=True)
class MassBoundReport:
    rate: float
    c: float
    decay_rate: Optional[float]
    inf_margin: float
    compliant: bool


def mass_bound_check(traj: xr.Dataset, rate: float = None, psi: SpeedFunction = None,
                     window=None, tolerance: float = 0.2) -> MassBoundReport:
    """Check dQ/dt >= -c exp(-rate t) for a finite c.

    c is the smallest constant valid on all samples. The negative part of dQ/dt is fitted on the
    late window where it is positive; its decay rate must not fall below (1 - tolerance) rate.

    Args:
        traj (xarray.Dataset): trajectory with a mass series.
        rate (float, optional): bound rate. Defaults to 2/psi(m+a).
        psi (SpeedFunction, optional): speed. Defaults to the trajectory's speed.
        window (tuple, optional): fit window of the negative part. Defaults to default_window.
        tolerance (float, optional): relative slack on the decay rate. Defaults to 0.2.

    Returns:
        MassBoundReport
    """
    amb = _ambient(traj)
    if rate is None:
        rate = target_rate(amb, _speed(traj, psi))
    t = traj.time.values
    Q = traj.mass.values
    dQ = np.gradient(Q, t)
    negative = np.maximum(-dQ, 0.0)
    c = float(np.max(negative * np.exp(rate * t)))
    inf_margin = float(np.min(Q - c * np.exp(-rate * t) / rate))

    decay_rate = None
    # masses are O(1); a negative part below this floor is round-off
    floor = 1e-12 * max(np.max(np.abs(Q)), 1.0)
    if window is None:
        window = default_window(t)
    mask = (t >= window[0]) & (t <= window[1])
    if np.sum(mask) >= 3 and np.all(negative[mask] > floor):
        series = xr.DataArray(negative, dims=['time'], coords={'time': t})
        decay_rate = fit_decay(series, window).rate
    compliant = bool(np.isfinite(c) and (decay_rate is None or decay_rate >= (1 - tolerance) * rate))
    logging.info(f'Mass bound: c={c:.4e}, decay rate {decay_rate}, margin {inf_margin:.4e}, compliant={compliant}.')
    return MassBoundReport(rate=rate, c=c, decay_rate=decay_rate, inf_margin=inf_margin, compliant=compliant)


def _by_mass_rate(sl: GeometrySlice, psi: SpeedFunction) -> float:
    """dQ/dt of the Brown-York-like mass from the normal variation with speed 1/psi(H)."""
    amb = sl.amb
    k = amb.horosphere_mean_curvature
    alpha = -1 + 2 / k
    speed = 1 / psi.eval(sl.H)
    total = integrate(sl.area_element, sl.theta)
    excess = integrate((sl.H - sl.hbar) * sl.area_element, sl.theta)
    area_rate = integrate(sl.H * speed * sl.area_element, sl.theta)
    # d hbar/dt along the normal: hbar'(rho) <speed nu, d_rho> = hbar' speed / v
    integrand = speed * ((sl.H - sl.hbar) * sl.H - sl.A_sq - ambient_ricci(amb)
                         - hbar_derivative(sl.rho, amb) / sl.v)
    return (alpha * total**(alpha - 1) * area_rate * excess
            + total**alpha * integrate(integrand * sl.area_element, sl.theta))


def by_mass_evolution_residual(traj: xr.Dataset, index: int = -2, psi: SpeedFunction = None) -> float:
    """|difference quotient of Q - mean of the Q-evolution right hand side| for samples index, index+1."""
    psi = _speed(traj, psi)
    index = index % traj.time.size
    first, second = state_at(traj, index), state_at(traj, index + 1)
    lhs = (by_mass(second.slice) - by_mass(first.slice)) / (second.t - first.t)
    rhs = 0.5 * (_by_mass_rate(first.slice, psi) + _by_mass_rate(second.slice, psi))
    return float(abs(lhs - rhs))


def _h_rate(sl: GeometrySlice, psi: SpeedFunction) -> np.ndarray:
    """dH/dt at fixed theta: normal evolution plus the tangential reparametrization term."""
    amb = sl.amb
    H = sl.H
    p0, p1, p2 = psi.eval(H), psi.deriv(H), psi.deriv2(H)
    normal = (p1 / p0**2 * laplace_beltrami(H, sl)
              + (p2 * p0 - 2 * p1**2) / p0**3 * gradient_sq(H, sl)
              - (sl.A_sq + ambient_ricci(amb)) / p0)
    phi_s = derivatives(sl.phi, amb, 1, sl.theta)
    H_s = derivatives(H, amb, 1, sl.theta)
    return normal + phi_s * H_s / (p0 * sl.v * np.sinh(sl.rho))


def evolution_residual_H(traj: xr.Dataset, index: int = -2, psi: SpeedFunction = None) -> float:
    """sup over nodes of |difference quotient of H - mean of the H-evolution right hand side|."""
    psi = _speed(traj, psi)
    index = index % traj.time.size
    first, second = state_at(traj, index), state_at(traj, index + 1)
    lhs = (second.slice.H - first.slice.H) / (second.t - first.t)
    rhs = 0.5 * (_h_rate(first.slice, psi) + _h_rate(second.slice, psi))
    return float(np.max(np.abs(lhs - rhs)))


def area_matched_radius(total: float, amb: AmbientSpace) -> float:
    """rho~ with sphere_area(rho~) = total."""
    if not total > 0:
        raise RootFindError(f'Area must be positive, got {total}.')
    target = np.log(total)

    def mismatch(r):
        return np.log(sphere_area(r, amb)) - target

    lo, hi = 1e-8, 1.0
    for _ in range(60):
        if mismatch(hi) > 0:
            break
        lo, hi = hi, 2 * hi
    if not (mismatch(lo) < 0 < mismatch(hi)):
        raise RootFindError(f'Could not bracket the area-matched radius for |M|={total:.6e} on {amb}.')
    logging.debug(f'Area-matched radius bracket [{lo:.4g}, {hi:.4g}].')
    return float(scipy.optimize.brentq(mismatch, lo, hi, xtol=1e-14, rtol=1e-14))


def rescaled_limit(traj: xr.Dataset, index: int = -1) -> xr.DataArray:
    """Conformal factor f~ = rho - rho~ of the rescaled limit, rho~ the area-matched radius.

    Returns:
        xarray.DataArray: f~ over theta; attrs rho_tilde, t and cauchy = sup |f~(t) - f~(t/2)|.
    """
    amb = _ambient(traj)
    index = index % traj.time.size

    def conformal_factor(i):
        state = state_at(traj, i)
        rho_tilde = area_matched_radius(integrate(state.slice.area_element, state.slice.theta), amb)
        return state.profile.rho - rho_tilde, rho_tilde

    f_final, rho_tilde = conformal_factor(index)
    t_final = float(traj.time[index])
    f_half, _ = conformal_factor(tr.sample_index(traj, t_final / 2))
    cauchy = float(np.max(np.abs(f_final - f_half)))
    logging.info(f'Rescaled limit at t={t_final:.4g}: rho~={rho_tilde:.6f}, Cauchy estimate {cauchy:.3e}.')
    return xr.DataArray(f_final, dims=['theta'], coords={'theta': traj.theta.values},
                        attrs={'description': 'Conformal factor of the rescaled limit metric.',
                               'rho_tilde': rho_tilde, 't': t_final, 'cauchy': cauchy})


@dataclass(frozen=True)
class YamabeVerdict:
    verdict: str
    residual: float


def yamabe_classify(f, amb: AmbientSpace) -> YamabeVerdict:
    """Classify e^{2f} sigma by the constancy of its (scalar, Webster or qc) curvature.

    K = R: relative sigma-weighted residual of projecting e^{-f} onto span{1, cos theta}.
    K != R: sigma-weighted variance of f.
    """
    f = np.asarray(f, dtype=float)
    theta = reduced_grid(f.size)
    weight = reduced_measure(amb, theta)
    if amb.field_kind == 'R':
        w = np.exp(-f)
        root = np.sqrt(weight)
        basis = np.column_stack((np.ones_like(theta), np.cos(theta)))
        coeffs, *_ = scipy.linalg.lstsq(basis * root[:, np.newaxis], w * root)
        residual = np.sqrt(integrate((w - basis @ coeffs)**2 * weight, theta) / integrate(w**2 * weight, theta))
        constant_label = 'round'
    else:
        mean = integrate(f * weight, theta) / integrate(weight, theta)
        residual = integrate((f - mean)**2 * weight, theta) / integrate(weight, theta)
        constant_label = 'constant'
    residual = float(residual)
    if residual > NONCONSTANT_THRESHOLD:
        verdict = 'non-constant'
    elif residual < ROUND_THRESHOLD:
        verdict = constant_label
    else:
        verdict = 'indeterminate'
        logging.warning(f'Yamabe classification indeterminate: residual {residual:.3e}.')
    return YamabeVerdict(verdict=verdict, residual=residual)


def standard_hooks(amb: AmbientSpace, psi: SpeedFunction):
    """Series recorded by runs driven from the command line."""
    target = amb.horosphere_mean_curvature
    growth = target_rate(amb, psi, factor=target)

    def area(state):
        return integrate(state.slice.area_element, state.slice.theta)

    hooks = {'V_norm': lambda state: area(state) * np.exp(-growth * state.t),
             'sup_H_dev': lambda state: np.max(np.abs(state.slice.H - target)),
             'max_pc': lambda state: state.slice.max_principal,
             'norm_d2phi': lambda state: np.max(np.abs(derivatives(state.slice.phi, amb, 2))),
             'norm_d3phi': lambda state: np.max(np.abs(derivatives(state.slice.phi, amb, 3))),
             'mass': lambda state: mass(state.slice),
             'rho_min': lambda state: np.min(state.profile.rho),
             'rho_max': lambda state: np.max(state.profile.rho),
             'sup_horizontal_dev_sq': lambda state: np.max((state.slice.horizontal - 1)**2)}
    if amb.field_kind == 'R':
        hooks['sup_traceless_sq'] = lambda state: np.max(state.slice.traceless_sq)
    else:
        hooks['sup_vertical_dev_sq'] = lambda state: np.max((state.slice.vertical - 2)**2)
    return toolz.merge(basic_hooks(), hooks)


NOT_COMPUTED = 'not-computed'


def summary(traj: xr.Dataset, psi: SpeedFunction = None, masses: bool = True, residuals: bool = True,
            yamabe: bool = True, window_start: float = 2.0):
    """Flat report of a trajectory: name -> (value, target, tolerance).

    Entries that could not be evaluated carry the value 'not-computed'. The 'verification' entry is
    'pass' when min H > 0, the area grows, sup |grad phi|^2 does not increase (1e-8 slack) and the
    mass bound holds.
    """
    amb = _ambient(traj)
    psi = _speed(traj, psi)
    window = default_window(traj.time.values, window_start)
    rate = target_rate(amb, psi)
    report = dict()

    def attempt(name, fun, target=None, tolerance=None):
        try:
            report[name] = (fun(), target, tolerance)
        except (FitError, RootFindError, KeyError) as e:
            logging.warning(f'{name}: {e}')
            report[name] = (NOT_COMPUTED, target, tolerance)

    volume = None
    try:
        volume = volume_growth(traj, psi, window)
    except FitError as e:
        logging.warning(f'volume growth: {e}')
    growth = target_rate(amb, psi, factor=amb.horosphere_mean_curvature)
    report['volume_rate'] = (volume.fit.rate if volume else NOT_COMPUTED, growth, 0.05)
    report['V_ratio'] = (volume.v_ratio if volume else NOT_COMPUTED, 10.0, None)
    attempt('grad_decay_rate', lambda: fit_decay(traj.sup_grad_phi_sq, window).rate, rate, 0.15)
    if 'sup_H_dev' in traj:
        attempt('H_decay_rate', lambda: fit_decay(traj.sup_H_dev, window).rate, rate, 0.2)
    for name, series in second_ff_series(amb).items():
        attempt(f'{name}_rate', lambda series=series: fit_decay(traj[series], window).rate,
                target_rate(amb, psi, factor=4.0), 0.2)

    min_H = float(traj.min_H.min())
    grad_increase = float(np.max(np.diff(traj.sup_grad_phi_sq.values), initial=0.0))
    area_growing = bool(np.all(np.diff(traj.area.values) > 0))
    report['min_H'] = (min_H, 0.0, None)
    report['grad_increase'] = (grad_increase, 0.0, 1e-8)
    report['area_increasing'] = ('yes' if area_growing else 'no', None, None)

    bound = None
    if masses and 'mass' in traj:
        report['mass_initial'] = (float(traj.mass[0]), None, None)
        report['mass_final'] = (float(traj.mass[-1]), None, None)
        bound = mass_bound_check(traj, rate, psi, window)
        report['mass_bound_c'] = (bound.c, None, None)
        report['mass_bound_decay'] = (bound.decay_rate if bound.decay_rate is not None else NOT_COMPUTED, rate, 0.2)
        report['mass_bound_margin'] = (bound.inf_margin, None, None)
    else:
        for name in ('mass_initial', 'mass_final', 'mass_bound_c', 'mass_bound_decay', 'mass_bound_margin'):
            report[name] = (NOT_COMPUTED, None, None)

    if residuals and traj.time.size >= 2:
        attempt('H_residual', lambda: evolution_residual_H(traj, -2, psi), 0.0, None)
        attempt('by_mass_residual', lambda: by_mass_evolution_residual(traj, -2, psi), 0.0, None)
    else:
        report['H_residual'] = (NOT_COMPUTED, 0.0, None)
        report['by_mass_residual'] = (NOT_COMPUTED, 0.0, None)

    if yamabe:
        try:
            limit = rescaled_limit(traj)
            verdict = yamabe_classify(limit.values, amb)
            report['rho_tilde'] = (limit.attrs['rho_tilde'], None, None)
            report['cauchy'] = (limit.attrs['cauchy'], None, None)
            report['yamabe_verdict'] = (verdict.verdict, None, None)
            report['yamabe_residual'] = (verdict.residual, NONCONSTANT_THRESHOLD, ROUND_THRESHOLD)
        except RootFindError as e:
            logging.warning(f'rescaled limit: {e}')
            yamabe = False
    if not yamabe:
        for name in ('rho_tilde', 'cauchy', 'yamabe_verdict', 'yamabe_residual'):
            report[name] = (NOT_COMPUTED, None, None)

    passed = min_H > 0 and area_growing and grad_increase <= 1e-8 and (bound is None or bound.compliant)
    report['verification'] = ('pass' if passed else 'fail', None, None)
    return report


def render_summary(report) -> str:
    """key = value lines, with target and tolerance where they apply."""
    lines = []
    for name, (value, target, tolerance) in report.items():
        text = f'{value:.12e}' if isinstance(value, float) else str(value)
        if target is not None:
            text += f'  target={target:.6e}'
        if tolerance is not None:
            text += f'  tolerance={tolerance:.3g}'
        lines.append(f'{name} = {text}')
    return '\n'.join(lines) + '\n'
