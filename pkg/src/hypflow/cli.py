"""Command line entry point `hypflow`.

    hypflow validate-speed log1p
    hypflow run flow.cfg
    hypflow sweep sweep.cfg
    hypflow compare-ode sphere.cfg

Exit codes: 0 success, 1 verification failure, 2 usage or config error, 3 numerical breakdown.
"""
import dataclasses
import logging
import os
import sys
from pathlib import Path

import dask
import defopt
import numpy as np
import pandas as pd

from . import config as cf
from . import diagnostics as dg
from . import flow
from . import speeds
from . import trajectory as tr
from .ambient import DomainError
from .diagnostics import RootFindError
from .flow import FlowBreakdownError, StabilityError
from .geometry import geometry_slice


EXIT_OK = 0
EXIT_VERIFICATION = 1
EXIT_USAGE = 2
EXIT_BREAKDOWN = 3

# FloatingPointError covers NumericBlowupError and SpeedEvaluationError
BREAKDOWN_ERRORS = (FlowBreakdownError, StabilityError, FloatingPointError, RootFindError)
# ValueError is a usage error only while inputs are read; later it is a numerical failure
INPUT_STAGES = ('config', 'speed', 'initial-data')

# summary entries copied into the sweep aggregate table
AGGREGATE_FIELDS = ['volume_rate', 'grad_decay_rate', 'H_decay_rate', 'mass_initial', 'mass_final',
                    'mass_bound_margin', 'yamabe_verdict', 'yamabe_residual', 'verification']


class StageError(Exception):
    """A failure in one stage of a command, with the exit code it maps to."""

    def __init__(self, stage: str, exit_code: int, error: Exception):
        super().__init__(f'{stage} stage failed: {type(error).__name__}: {error}')
        self.stage = stage
        self.exit_code = exit_code


class _Stage:

    def __init__(self, name: str):
        self.name = name

    def __enter__(self):
        logging.debug(f'Entering stage {self.name}.')
        return self

    def __exit__(self, exc_type, exc, traceback):
        if exc is None or isinstance(exc, StageError):
            return False
        if isinstance(exc, BREAKDOWN_ERRORS):
            raise StageError(self.name, EXIT_BREAKDOWN, exc) from exc
        if isinstance(exc, OSError):
            raise StageError(self.name, EXIT_USAGE, exc) from exc
        if isinstance(exc, ValueError):
            code = EXIT_USAGE if self.name in INPUT_STAGES else EXIT_BREAKDOWN
            raise StageError(self.name, code, exc) from exc
        return False


def execute(config: cf.RunConfig, savepath=None):
    """Run one configuration and write its outputs.

    Args:
        config (RunConfig): run parameters.
        savepath (str, optional): output directory. Defaults to config.output_path.

    Returns:
        tuple: (trajectory, summary report)
    """
    savepath = Path(config.output_path if savepath is None else savepath)
    with _Stage('config'):
        amb = config.ambient()
        psi = config.speed_function()
        control = config.step_control()
    with _Stage('initial-data'):
        initial = config.initial_profile()
        H = geometry_slice(initial).H
        if not np.all(H > 0):
            i = int(np.argmin(H))
            raise DomainError(f'Initial datum is not mean convex: node {i} has H={H[i]:.6e}.')
    with _Stage('flow'):
        traj = flow.run(initial, psi, control, hooks=dg.standard_hooks(amb, psi))
    with _Stage('diagnostics'):
        report = dg.summary(traj, psi, masses=config.masses, residuals=config.residuals,
                            yamabe=config.yamabe, window_start=config.window_start)
    with _Stage('output'):
        savepath.mkdir(parents=True, exist_ok=True)
        tr.to_csv(traj, savepath / 'timeseries.csv')
        with open(savepath / 'summary.txt', 'w') as f:
            f.write(dg.render_summary(report))
        if config.zarr:
            tr.save(savepath / 'trajectory.zarr', traj)
    logging.info(f'Outputs written to {savepath}.')
    return traj, report


def _verdict(report) -> int:
    return EXIT_OK if report['verification'][0] == 'pass' else EXIT_VERIFICATION


def _read(config_file: str):
    with _Stage('config'):
        return cf.read_config(config_file)


def validate_speed(speed: str) -> int:
    """Check a speed function against the admissibility conditions.

    Args:
        speed: Speed spec: imcf, log1p, power:p, powersum:c1,p1;c2,p2 or expm1:k.
    """
    try:
        with _Stage('speed'):
            psi = speeds.parse_speed(speed)
    except StageError as e:
        logging.error(str(e))
        return e.exit_code
    try:
        report = speeds.validate_speed(psi)
    except speeds.SpeedEvaluationError as e:
        print(f'speed: {psi.label}\nresult: fail ({e})')
        return EXIT_VERIFICATION
    print(report.render())
    return EXIT_OK if report.passed else EXIT_VERIFICATION


def run(config: str, *, output: str = '') -> int:
    """Run one flow and write timeseries.csv and summary.txt.

    Args:
        config: Config file with `key = value` lines.
        output: Output directory, overrides output.path.
    """
    try:
        run_config, sweeps = _read(config)
        if sweeps:
            logging.warning(f'Ignoring sweep lists {list(sweeps)}, use `hypflow sweep` for them.')
        if output:
            run_config = dataclasses.replace(run_config, output_path=output)
        _, report = execute(run_config)
    except StageError as e:
        logging.error(str(e))
        return e.exit_code
    print(dg.render_summary(report), end='')
    return _verdict(report)


def _sweep_member(index: int, overrides: dict, run_config: cf.RunConfig, savepath: Path) -> dict:
    row = {'run': f'run_{index:03d}'}
    row.update(overrides)
    try:
        _, report = execute(run_config, savepath / row['run'])
    except StageError as e:
        logging.error(f"{row['run']}: {e}")
        row.update({name: dg.NOT_COMPUTED for name in AGGREGATE_FIELDS})
        row.update(status=e.stage, exit_code=e.exit_code)
        return row
    row.update({name: report[name][0] if name in report else dg.NOT_COMPUTED for name in AGGREGATE_FIELDS})
    row.update(status='ok', exit_code=_verdict(report))
    return row


def sweep(config: str, *, output: str = '') -> int:
    """Run every combination of the `sweep.<key> = v1 | v2` lists of a config.

    Each combination writes to <output>/run_XXX/; <output>/aggregate.csv lists parameters and results.

    Args:
        config: Config file with `key = value` lines and sweep lists.
        output: Output directory, overrides output.path.
    """
    try:
        base, sweeps = _read(config)
        with _Stage('config'):
            runs = cf.expand_sweep(base, sweeps)
            workers = cf.sweep_workers()
    except StageError as e:
        logging.error(str(e))
        return e.exit_code

    savepath = Path(output or base.output_path)
    logging.info(f'Sweeping {len(runs)} runs over {list(sweeps)} with {workers} workers.')
    tasks = [dask.delayed(_sweep_member)(index, overrides, run_config, savepath)
             for index, (overrides, run_config) in enumerate(runs)]
    rows = dask.compute(*tasks, scheduler='threads', num_workers=workers)

    try:
        with _Stage('output'):
            savepath.mkdir(parents=True, exist_ok=True)
            df = pd.DataFrame(list(rows))
            df.to_csv(savepath / 'aggregate.csv', index=False)
    except StageError as e:
        logging.error(str(e))
        return e.exit_code
    logging.info(f'Aggregate of {len(rows)} runs written to {savepath / "aggregate.csv"}.')
    print(df.to_string(index=False))
    return max(row['exit_code'] for row in rows)


def compare_ode(config: str, *, tolerance: float = 1e-6) -> int:
    """Compare a flow from constant data with the geodesic sphere ODE.

    Args:
        config: Config file with constant initial data.
        tolerance: Largest accepted relative deviation of rho.
    """
    try:
        run_config, _ = _read(config)
        with _Stage('config'):
            amb = run_config.ambient()
            psi = run_config.speed_function()
            control = run_config.step_control()
        with _Stage('initial-data'):
            initial = run_config.initial_profile()
            if np.ptp(initial.rho) > 0:
                raise ValueError(f'compare-ode needs constant initial data, rho ranges over '
                                 f'[{np.min(initial.rho):.6g}, {np.max(initial.rho):.6g}].')
        with _Stage('flow'):
            traj = flow.run(initial, psi, control)
            times = traj.time.values
            ode = flow.geodesic_sphere_ode(float(initial.rho[0]), psi, amb, max(control.t_end, times[-1]), times)
    except StageError as e:
        logging.error(str(e))
        return e.exit_code

    deviation = np.abs(traj.rho - ode) / ode
    worst = deviation.max(dim='theta')
    index = int(worst.argmax())
    print(f'ambient = {amb}\nspeed = {psi.label}\nrho0 = {initial.rho[0]:.12e}\n'
          f'samples = {times.size}\nmax_relative_deviation = {float(worst[index]):.12e}\n'
          f'at_time = {times[index]:.12e}\ntolerance = {tolerance:.3g}')
    return EXIT_OK if float(worst[index]) <= tolerance else EXIT_VERIFICATION


def cli():
    import warnings
    warnings.filterwarnings("ignore")
    level = os.environ.get('HYPFLOW_LOGLEVEL', 'INFO').upper()
    logging.basicConfig(level=getattr(logging, level, logging.INFO))
    return defopt.run([validate_speed, run, sweep, compare_ode])


if __name__ == '__main__':
    sys.exit(cli())
