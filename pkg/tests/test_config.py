import pytest

from hypflow import config as cf
from hypflow.flow import StepControl
from hypflow.speeds import SpeedSpecError


def test_form_covers_every_key():
    form = cf.load_form()
    assert set(form) == set(cf.KEYS)
    for item in form.values():
        assert item['type'] in ('int', 'double', 'bool', 'string', 'optional', 'file_open', 'file_dir')


def test_defaults():
    config = cf.RunConfig.from_values({})
    assert (config.field, config.n, config.speed, config.family) == ('R', 3, 'imcf', 'constant')
    assert config.nodes == 512
    assert config.path is None
    assert config.masses and not config.zarr
    assert config.sweep_cap == 64
    assert isinstance(config.step_control(), StepControl)
    assert str(config.ambient()) == 'RH^3'


def test_parse_text():
    text = '\n'.join(['# comment', 'ambient.field = C  # trailing', 'ambient.n=2', '',
                      'sweep.speed = imcf | log1p', 'sweep.cap = 4'])
    values, sweeps = cf.parse_text(text)
    assert values == {'ambient.field': 'C', 'ambient.n': '2', 'sweep.cap': '4'}
    assert sweeps == {'speed': ['imcf', 'log1p']}


@pytest.mark.parametrize('text, match', [('ambient.field C', 'expected'),
                                         ('speed = imcf\nspeed = log1p', 'duplicate'),
                                         ('sweep.speed =', 'empty'),
                                         ('sweep.speed = imcf | ', 'empty'),
                                         ('sweep.speed = imcf\nsweep.speed = log1p', 'duplicate')])
def test_parse_errors(text, match):
    with pytest.raises(cf.ConfigError, match=match):
        cf.parse_text(text)


@pytest.mark.parametrize('values, match', [({'ambient.field': 'O'}, 'not one of'),
                                           ({'grid.nodes': '3'}, 'outside'),
                                           ({'grid.nodes': 'many'}, 'cannot read'),
                                           ({'time.cfl': '1.5'}, 'outside'),
                                           ({'output.zarr': 'maybe'}, 'cannot read'),
                                           ({'init.family': 'file'}, 'init.path'),
                                           ({'time.dt_min': '0.1', 'time.dt_max': '0.01'}, 'exceeds'),
                                           ({'time.dt_min': '0'}, 'positive'),
                                           ({'ambient.colour': 'red'}, 'Unknown')])
def test_from_values_errors(values, match):
    with pytest.raises(cf.ConfigError, match=match):
        cf.RunConfig.from_values(values)


def test_conversions():
    config = cf.RunConfig.from_values({'output.zarr': 'yes', 'diagnostics.masses': 'off',
                                       'init.tau': '2.5', 'time.max_steps': '10'})
    assert config.zarr is True
    assert config.masses is False
    assert config.tau == 2.5
    assert config.max_steps == 10


def test_values_inverse():
    config = cf.RunConfig.from_values({'ambient.field': 'H', 'ambient.n': '2', 'init.eps': '0.1'})
    values = config.values()
    assert values['ambient.field'] == 'H'
    assert values['init.eps'] == 0.1
    assert set(values) == set(cf.KEYS)


def test_read_config(write_config):
    path = write_config({'ambient.field': 'C', 'ambient.n': 2, 'speed': 'log1p', 'sweep.init.eps': '0 | 0.1'})
    config, sweeps = cf.read_config(path)
    assert config.ambient().a == 1
    assert config.speed_function().label == 'log1p'
    assert sweeps == {'init.eps': ['0', '0.1']}


def test_read_missing_config(tmp_path):
    with pytest.raises(cf.ConfigError, match='Cannot read'):
        cf.read_config(str(tmp_path / 'missing.cfg'))


def test_speed_is_parsed_lazily():
    config = cf.RunConfig.from_values({'speed': 'power:-1'})
    with pytest.raises(SpeedSpecError):
        config.speed_function()


def test_expand_sweep():
    base = cf.RunConfig.from_values({'grid.nodes': '33'})
    runs = cf.expand_sweep(base, {'speed': ['imcf', 'log1p'], 'init.tau': ['1', '2']})
    assert [overrides for overrides, _ in runs] == [
        {'speed': 'imcf', 'init.tau': '1'}, {'speed': 'imcf', 'init.tau': '2'},
        {'speed': 'log1p', 'init.tau': '1'}, {'speed': 'log1p', 'init.tau': '2'}]
    assert [(config.speed, config.tau) for _, config in runs] == [('imcf', 1.0), ('imcf', 2.0),
                                                                   ('log1p', 1.0), ('log1p', 2.0)]
    assert all(config.nodes == 33 and config.path is None for _, config in runs)


def test_expand_sweep_errors():
    base = cf.RunConfig.from_values({'sweep.cap': '3'})
    with pytest.raises(cf.ConfigError, match='No sweep'):
        cf.expand_sweep(base, {})
    with pytest.raises(cf.ConfigError, match='Unknown'):
        cf.expand_sweep(base, {'colour': ['red']})
    with pytest.raises(cf.ConfigError, match='sweep.cap'):
        cf.expand_sweep(base, {'speed': ['imcf', 'log1p'], 'init.tau': ['1', '2']})
    with pytest.raises(cf.ConfigError, match='outside'):
        cf.expand_sweep(base, {'grid.nodes': ['3']})


def test_sweep_workers(monkeypatch):
    monkeypatch.setenv('HYPFLOW_THREADS', '3')
    assert cf.sweep_workers() == 3
    monkeypatch.setenv('HYPFLOW_THREADS', 'zero')
    with pytest.raises(cf.ConfigError):
        cf.sweep_workers()
    monkeypatch.setenv('HYPFLOW_THREADS', '0')
    with pytest.raises(cf.ConfigError):
        cf.sweep_workers()
    monkeypatch.delenv('HYPFLOW_THREADS')
    assert cf.sweep_workers() >= 1
