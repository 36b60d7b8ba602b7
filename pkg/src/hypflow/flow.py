"""Explicit time integration of the scalar flow of phi and the geodesic sphere reference.

The radial function evolves by d rho/dt = v / psi(H), so that

    d phi / dt = v / (sinh(rho) psi(H)),   phi = ln tanh(rho/2).
"""
import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.integrate
import xarray as xr

from .ambient import AmbientSpace, DomainError, hbar, make_ambient
from .geometry import (GeometrySlice, NumericBlowupError, RadialProfile, StageFields, geometry_slice,
                       integrate, stage_fields)
from .speeds import SpeedFunction
from . import trajectory as tr


RK4_STABILITY = 2.78  # extent of the classical RK4 region on the negative real axis
STENCIL_RADIUS = 16 / 3  # spectral radius of the 4th-order second difference times h^2
_T_EPS = 1e-12


class FlowBreakdownError(RuntimeError):
    pass


class StabilityError(RuntimeError):
    pass


class MaxStepsError(FlowBreakdownError):
    pass


@dataclass(frozen=True)
class StepControl:
    """Time stepping parameters.

    Attributes:
        t_end (float): stop time.
        cfl (float): safety factor on the parabolic bound, 0 < cfl <= 1.
        dt_min (float): smallest step before giving up.
        dt_max (float): largest step.
        max_steps (int): accepted step budget.
        cadence (float): output interval.
    """
    t_end: float
    cfl: float = 0.5
    dt_min: float = 1e-8
    dt_max: float = 1e-2
    max_steps: int = 1_000_000
    cadence: float = 0.1

    def __post_init__(self):
        if not self.t_end > 0:
            raise ValueError(f't_end must be positive, got {self.t_end}.')
        if not 0 < self.cfl <= 1:
            raise ValueError(f'cfl must be in (0, 1], got {self.cfl}.')
        if not 0 < self.dt_min <= self.dt_max:
            raise ValueError(f'Need 0 < dt_min <= dt_max, got dt_min={self.dt_min}, dt_max={self.dt_max}.')
        if self.max_steps < 1:
            raise ValueError(f'max_steps must be positive, got {self.max_steps}.')
        if not self.cadence > 0:
            raise ValueError(f'cadence must be positive, got {self.cadence}.')


@dataclass(frozen=True, eq=False)
class FlowState:
    """Profile at time t.

    fields carries what a time step needs; the full geometry slice is built on first access.
    """
    t: float
    profile: RadialProfile
    fields: StageFields = field(default=None, repr=False)
    _slice: GeometrySlice = field(default=None, init=False, repr=False)

    def __post_init__(self):
        if self.fields is None:
            object.__setattr__(self, 'fields', stage_fields(self.profile.phi, self.amb, self.profile.theta))

    @property
    def amb(self) -> AmbientSpace:
        return self.profile.amb

    @property
    def slice(self) -> GeometrySlice:
        if self._slice is None:
            object.__setattr__(self, '_slice', geometry_slice(self.profile))
        return self._slice


def _check_mean_convex(H, theta, t: float):
    bad = np.flatnonzero(~(H > 0))
    if bad.size:
        i = bad[0]
        raise FlowBreakdownError(f'Mean convexity lost at t={t:.6g}: node {i} '
                                 f'(theta={theta[i]:.6f}) has H={H[i]:.6e}.')


def _speed(psi: SpeedFunction, H, t: float):
    with np.errstate(all='ignore'):
        speed = np.asarray(psi.eval(H), dtype=float)
    bad = np.flatnonzero(~(np.isfinite(speed) & (speed > 0)))
    if bad.size:
        i = bad[0]
        raise FlowBreakdownError(f'psi(H) invalid at t={t:.6g}: node {i} has H={H[i]:.6e}, '
                                 f'psi(H)={speed[i]}.')
    return speed


def _phi_rate(fields: StageFields, theta, psi: SpeedFunction, t: float) -> np.ndarray:
    _check_mean_convex(fields.H, theta, t)
    return fields.v / (fields.sinh * _speed(psi, fields.H, t))


def rhs(state: FlowState, psi: SpeedFunction) -> np.ndarray:
    """d phi/dt = v / (sinh(rho) psi(H)) per node."""
    return _phi_rate(state.fields, state.profile.theta, psi, state.t)


def stable_dt(state: FlowState, psi: SpeedFunction, cfl: float = 1.0) -> float:
    """Largest explicit step for the diffusion coefficient psi'/psi^2 g^{ij}.

    dt <= cfl * 2.78 h^2 / lambda_max with lambda_max = 16/3 b max c^2 psi'(H) / (psi(H)^2 sinh^2 rho).
    """
    fields, amb = state.fields, state.amb
    _check_mean_convex(fields.H, state.profile.theta, state.t)
    speed = _speed(psi, fields.H, state.t)
    diffusion = amb.coordinate_scale**2 * psi.deriv(fields.H) / (speed**2 * fields.sinh**2)
    lam_max = STENCIL_RADIUS * amb.horizontal_dim * np.max(diffusion) / state.profile.h**2
    return float(cfl * RK4_STABILITY / lam_max)


def _stage(t: float, amb: AmbientSpace, theta, phi) -> StageFields:
    bad = np.flatnonzero(~(np.isfinite(phi) & (phi < 0)))
    if bad.size:
        raise StabilityError(f'Invalid state at t={t:.6g}: node {bad[0]} has phi={phi[bad[0]]}.')
    try:
        return stage_fields(phi, amb, theta)
    except (DomainError, NumericBlowupError) as e:
        raise StabilityError(f'Invalid state at t={t:.6g}: {e}') from e


def _state_from_phi(t: float, amb: AmbientSpace, theta, phi) -> FlowState:
    fields = _stage(t, amb, theta, phi)
    try:
        return FlowState(t, RadialProfile(amb, theta, fields.rho), fields)
    except DomainError as e:
        raise StabilityError(f'Invalid state at t={t:.6g}: {e}') from e


def step(state: FlowState, psi: SpeedFunction, dt: float) -> FlowState:
    """One classical Runge-Kutta step of the scalar flow of phi.

    Args:
        state (FlowState): current state, must be mean convex.
        psi (SpeedFunction): speed.
        dt (float): step size, at most stable_dt(state, psi).

    Returns:
        FlowState: state at t + dt.
    """
    if not dt > 0:
        raise ValueError(f'dt must be positive, got {dt}.')
    bound = stable_dt(state, psi)
    if dt > bound * (1 + 1e-12):
        raise StabilityError(f'dt={dt:.3e} exceeds the parabolic stability bound {bound:.3e} at t={state.t:.6g}.')
    amb, theta, t = state.amb, state.profile.theta, state.t
    phi = state.fields.phi

    k1 = rhs(state, psi)
    k2 = _phi_rate(_stage(t + dt / 2, amb, theta, phi + dt / 2 * k1), theta, psi, t + dt / 2)
    k3 = _phi_rate(_stage(t + dt / 2, amb, theta, phi + dt / 2 * k2), theta, psi, t + dt / 2)
    k4 = _phi_rate(_stage(t + dt, amb, theta, phi + dt * k3), theta, psi, t + dt)
    return _state_from_phi(t + dt, amb, theta, phi + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4))


def basic_hooks():
    """Series recorded when run is called without hooks."""
    return {'area': lambda state: integrate(state.slice.area_element, state.slice.theta),
            'sup_grad_phi_sq': lambda state: np.max(state.fields.grad_phi_sq),
            'min_H': lambda state: np.min(state.fields.H)}


def run(initial: RadialProfile, psi: SpeedFunction, control: StepControl, hooks=None) -> xr.Dataset:
    """Integrate the flow from initial data up to control.t_end.

    Samples are taken at t = 0 and at the first accepted step past each multiple of the cadence.

    Args:
        initial (RadialProfile): mean convex initial data.
        psi (SpeedFunction): speed.
        control (StepControl): time stepping.
        hooks (dict, optional): name -> callable(state) recorded at every sample. Defaults to basic_hooks().

    Returns:
        xarray.Dataset: trajectory, see trajectory.assemble.
    """
    amb = initial.amb
    hooks = basic_hooks() if hooks is None else hooks
    state = FlowState(0.0, initial)
    try:
        _check_mean_convex(state.fields.H, initial.theta, 0.0)
    except FlowBreakdownError as e:
        raise FlowBreakdownError(f'Initial datum is not mean convex. {e}') from e

    logging.info(f'Flow on {amb} with psi={psi.label}, {initial.nodes} nodes, t_end={control.t_end}.')
    recorder = tr.Recorder(initial.theta, hooks)
    recorder.record(state, dt=0.0)
    next_output = control.cadence
    steps = 0
    while state.t < control.t_end - _T_EPS:
        dt = min(control.dt_max, stable_dt(state, psi, control.cfl), control.t_end - state.t)
        while True:
            try:
                new_state = step(state, psi, dt)
                break
            except StabilityError as e:
                dt /= 2
                logging.debug(f'Step rejected at t={state.t:.6g} ({e}), retrying with dt={dt:.3e}.')
                if dt < control.dt_min:
                    raise FlowBreakdownError(f'Time step underflow at t={state.t:.6g}: '
                                             f'dt={dt:.3e} < dt_min={control.dt_min:.3e}.') from e
        steps += 1
        if steps > control.max_steps:
            raise MaxStepsError(f'Exceeded {control.max_steps} steps at t={state.t:.6g}.')
        state = new_state
        if state.t >= next_output - _T_EPS or state.t >= control.t_end - _T_EPS:
            recorder.record(state, dt)
            while next_output <= state.t + _T_EPS:
                next_output += control.cadence

    logging.info(f'Flow reached t={state.t:.6g} after {steps} steps, {len(recorder)} samples.')
    attrs = {'field': amb.field_kind, 'n': amb.n, 'a': amb.a, 'm': amb.m, 'speed': psi.label,
             'nodes': initial.nodes, 'cadence': control.cadence, 'steps': steps}
    return recorder.to_dataset(attrs)


def state_at(traj: xr.Dataset, index: int) -> FlowState:
    """Rebuild the FlowState of a recorded sample."""
    amb = make_ambient(traj.attrs['field'], int(traj.attrs['n']))
    sample = traj.isel(time=index)
    return FlowState(float(sample.time), RadialProfile(amb, traj.theta.values, sample.rho.values))


def geodesic_sphere_ode(rho0: float, psi: SpeedFunction, amb: AmbientSpace, t_end: float,
                        times=None) -> xr.DataArray:
    """Radius of the geodesic sphere flow, d rho/dt = 1 / psi(hbar(rho)).

    Args:
        rho0 (float): initial radius.
        psi (SpeedFunction): speed.
        amb (AmbientSpace): ambient space (any n).
        t_end (float): stop time.
        times (np.ndarray, optional): output times in [0, t_end]. Defaults to 501 equidistant points.

    Returns:
        xarray.DataArray: rho over time.
    """
    if not rho0 > 0:
        raise DomainError(f'Initial radius must be positive, got {rho0}.')
    times = np.linspace(0, t_end, 501) if times is None else np.asarray(times, dtype=float)

    def velocity(t, y):
        return [1 / float(psi.eval(hbar(y[0], amb)))]

    sol = scipy.integrate.solve_ivp(velocity, (0, t_end), [rho0], method='DOP853',
                                    t_eval=times, rtol=1e-12, atol=1e-12)
    if not sol.success:
        raise FlowBreakdownError(f'Geodesic sphere ODE failed: {sol.message}')
    return xr.DataArray(sol.y[0], dims=['time'], coords={'time': sol.t},
                        attrs={'description': f'Geodesic sphere radius on {amb}, psi={psi.label}.',
                               'units': 'length'})


def reaction_coefficient(state: FlowState, psi: SpeedFunction) -> np.ndarray:
    """d G / d phi of the scalar flow per node.

    v cosh/(sinh psi) (H psi'/psi - 1) - psi'/psi^2 (m + a + a/cosh^2), which tends to -1/psi(m+a).
    """
    fields, amb = state.fields, state.amb
    _check_mean_convex(fields.H, state.profile.theta, state.t)
    speed = _speed(psi, fields.H, state.t)
    dspeed = psi.deriv(fields.H)
    sh = fields.sinh
    ch = np.cosh(fields.rho)
    return (fields.v * ch / (sh * speed) * (fields.H * dspeed / speed - 1)
            - dspeed / speed**2 * (amb.m + amb.a + amb.a / ch**2))
