"""Run configuration from flat `key = value` files.

Accepted keys, types, defaults and ranges are declared in forms/run.yaml. Lines are
`dotted.key = value` with `#` comments; `sweep.<key> = v1 | v2 | ...` lists values to sweep over.
"""
import itertools
import logging
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import toolz
import yaml

from .ambient import AmbientSpace, make_ambient
from .flow import StepControl
from .geometry import RadialProfile
from . import loaders
from .speeds import SpeedFunction, parse_speed


FORM_FILE = Path(__file__).parent / 'forms' / 'run.yaml'

# dotted config key -> RunConfig field
KEYS = {'ambient.field': 'field',
        'ambient.n': 'n',
        'speed': 'speed',
        'init.family': 'family',
        'init.tau': 'tau',
        'init.eps': 'eps',
        'init.mode': 'mode',
        'init.shift': 'shift',
        'init.path': 'path',
        'grid.nodes': 'nodes',
        'time.t_end': 't_end',
        'time.cfl': 'cfl',
        'time.dt_min': 'dt_min',
        'time.dt_max': 'dt_max',
        'time.max_steps': 'max_steps',
        'output.path': 'output_path',
        'output.cadence': 'cadence',
        'output.zarr': 'zarr',
        'diagnostics.masses': 'masses',
        'diagnostics.residuals': 'residuals',
        'diagnostics.yamabe': 'yamabe',
        'diagnostics.window_start': 'window_start',
        'sweep.cap': 'sweep_cap'}

_TRUE = ('true', 'yes', '1', 'on')
_FALSE = ('false', 'no', '0', 'off')


class ConfigError(ValueError):
    pass


def load_form(form_file=FORM_FILE):
    """Form items keyed by name."""
    with open(form_file, 'r') as form_yaml:
        items = yaml.load(form_yaml, Loader=yaml.SafeLoader)['main']
    return {item['name']: item for item in items}


def _convert(item, raw):
    name, kind = item['name'], item['type']
    text = str(raw).strip()
    try:
        if kind == 'int':
            value = int(text)
        elif kind == 'double':
            value = float(text)
        elif kind == 'bool':
            if text.lower() not in _TRUE + _FALSE:
                raise ValueError(text)
            value = text.lower() in _TRUE
        else:
            value = text
    except ValueError:
        raise ConfigError(f'{name}: cannot read {text!r} as {kind}.')

    if kind == 'optional':
        options = [option.strip() for option in item['options'].split(',')]
        if value not in options:
            raise ConfigError(f'{name}: {value!r} is not one of {options}.')
    if 'range' in item and kind in ('int', 'double'):
        lo, hi = (float(bound) for bound in str(item['range']).split(','))
        if not lo <= value <= hi:
            raise ConfigError(f'{name}: {value} outside [{lo:g}, {hi:g}].')
    return value


def parse_text(text: str):
    """Split config text into plain values and sweep lists.

    Returns:
        tuple: (values, sweeps), both dicts keyed by dotted names holding raw strings.
    """
    values, sweeps = dict(), dict()
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split('#', 1)[0].strip()
        if not line:
            continue
        if '=' not in line:
            raise ConfigError(f'line {lineno}: expected "key = value", got {line!r}.')
        key, value = (part.strip() for part in line.split('=', 1))
        if key.startswith('sweep.') and key != 'sweep.cap':
            target = key[len('sweep.'):]
            entries = [entry.strip() for entry in value.split('|')] if value else []
            if not entries or any(not entry for entry in entries):
                raise ConfigError(f'line {lineno}: empty sweep list or entry for {target}.')
            if target in sweeps:
                raise ConfigError(f'line {lineno}: duplicate sweep key {target}.')
            sweeps[target] = entries
        else:
            if key in values:
                raise ConfigError(f'line {lineno}: duplicate key {key}.')
            values[key] = value
    return values, sweeps


@dataclass(frozen=True)
class RunConfig:
    field: str
    n: int
    speed: str
    family: str
    tau: float
    eps: float
    mode: int
    shift: float
    path: Optional[str]
    nodes: int
    t_end: float
    cfl: float
    dt_min: float
    dt_max: float
    max_steps: int
    output_path: str
    cadence: float
    zarr: bool
    masses: bool
    residuals: bool
    yamabe: bool
    window_start: float
    sweep_cap: int

    @classmethod
    def from_values(cls, values: dict, form=None) -> 'RunConfig':
        """Fill defaults from the form, convert and range check raw values."""
        form = load_form() if form is None else form
        unknown = sorted(set(values) - set(form))
        if unknown:
            raise ConfigError(f'Unknown config keys: {unknown}.')
        raw = toolz.merge({name: item.get('default') for name, item in form.items()}, values)
        converted = {KEYS[name]: _convert(form[name], raw[name]) for name in KEYS}
        path = converted['path'].strip()
        converted['path'] = path or None
        if converted['family'] == 'file' and converted['path'] is None:
            raise ConfigError("init.family = file needs init.path.")
        if converted['dt_min'] > converted['dt_max']:
            raise ConfigError(f"time.dt_min={converted['dt_min']} exceeds time.dt_max={converted['dt_max']}.")
        if not converted['dt_min'] > 0:
            raise ConfigError('time.dt_min must be positive.')
        return cls(**converted)

    def values(self) -> dict:
        """Dotted key -> value, the inverse of from_values."""
        return {name: getattr(self, attribute) for name, attribute in KEYS.items()}

    def ambient(self) -> AmbientSpace:
        return make_ambient(self.field, self.n)

    def speed_function(self) -> SpeedFunction:
        return parse_speed(self.speed)

    def step_control(self) -> StepControl:
        return StepControl(t_end=self.t_end, cfl=self.cfl, dt_min=self.dt_min, dt_max=self.dt_max,
                           max_steps=self.max_steps, cadence=self.cadence)

    def initial_profile(self) -> RadialProfile:
        return loaders.initial_profile(self.ambient(), self.family, nodes=self.nodes, tau=self.tau,
                                       eps=self.eps, mode=self.mode, shift=self.shift, path=self.path)


def read_config(filepath):
    """Parse a config file.

    Returns:
        tuple: (RunConfig, sweeps) with sweeps the raw `sweep.<key>` lists.
    """
    try:
        with open(filepath, 'r') as f:
            text = f.read()
    except OSError as e:
        raise ConfigError(f'Cannot read config {filepath}: {e}')
    values, sweeps = parse_text(text)
    config = RunConfig.from_values(values)
    logging.info(f'Config {filepath}: {config.field}H^{config.n}, speed {config.speed}, '
                 f'{config.family} initial data, {len(sweeps)} sweep keys.')
    return config, sweeps


def expand_sweep(config: RunConfig, sweeps: dict):
    """Cross product of the sweep lists applied to a base config.

    Returns:
        list: (overrides, RunConfig) per combination, in lexicographic order of the lists.
    """
    if not sweeps:
        raise ConfigError('No sweep.<key> lists in the config.')
    form = load_form()
    unknown = sorted(set(sweeps) - set(form))
    if unknown:
        raise ConfigError(f'Unknown sweep keys: {unknown}.')
    keys = list(sweeps)
    combinations = list(itertools.product(*(sweeps[key] for key in keys)))
    if len(combinations) > config.sweep_cap:
        raise ConfigError(f'Sweep has {len(combinations)} runs, more than sweep.cap={config.sweep_cap}.')
    base = {name: str(value) if value is not None else ' ' for name, value in config.values().items()}
    runs = []
    for combination in combinations:
        overrides = dict(zip(keys, combination))
        runs.append((overrides, RunConfig.from_values(toolz.merge(base, overrides), form)))
    return runs


def sweep_workers() -> int:
    """Worker count for sweeps: HYPFLOW_THREADS or the number of CPUs."""
    value = os.environ.get('HYPFLOW_THREADS')
    if value is None:
        return os.cpu_count() or 1
    try:
        workers = int(value)
    except ValueError:
        raise ConfigError(f'HYPFLOW_THREADS must be an integer, got {value!r}.')
    if workers < 1:
        raise ConfigError(f'HYPFLOW_THREADS must be positive, got {workers}.')
    return workers
