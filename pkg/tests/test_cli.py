import numpy as np
import pandas as pd
import pytest

from hypflow import cli


SPHERE = {'ambient.field': 'R', 'ambient.n': 3, 'speed': 'imcf', 'init.family': 'constant', 'init.tau': 1.0,
          'grid.nodes': 33, 'time.t_end': 3.0, 'time.dt_max': 0.01, 'output.cadence': 0.1}


@pytest.mark.parametrize('speed, code', [('log1p', 0), ('power:0.5', 0), ('power:2', 1), ('expm1:1', 1),
                                         ('bogus', 2), ('power:-1', 2)])
def test_validate_speed(speed, code, capsys):
    assert cli.validate_speed(speed) == code
    if code == 0:
        assert 'result: pass' in capsys.readouterr().out


def test_run_writes_outputs(write_config, tmp_path, capsys):
    config = write_config(dict(SPHERE, **{'output.path': str(tmp_path / 'out')}))
    assert cli.run(config) == cli.EXIT_OK
    assert 'verification = pass' in capsys.readouterr().out
    out = tmp_path / 'out'
    assert (out / 'summary.txt').read_text().count('\n') > 10
    table = pd.read_csv(out / 'timeseries.csv')
    assert table.columns[0] == 't'
    assert table['t'].iloc[-1] == pytest.approx(3.0)
    assert not (out / 'trajectory.zarr').exists()


def test_run_is_deterministic(write_config, tmp_path):
    config = write_config(SPHERE)
    assert cli.run(config, output=str(tmp_path / 'a')) == cli.EXIT_OK
    assert cli.run(config, output=str(tmp_path / 'b')) == cli.EXIT_OK
    first = (tmp_path / 'a' / 'timeseries.csv').read_bytes()
    assert first == (tmp_path / 'b' / 'timeseries.csv').read_bytes()


def test_run_with_zarr(write_config, tmp_path):
    from hypflow.trajectory import load

    config = write_config(dict(SPHERE, **{'time.t_end': 0.5, 'output.zarr': 'yes', 'diagnostics.yamabe': 'no'}))
    cli.run(config, output=str(tmp_path / 'out'))
    traj = load(tmp_path / 'out' / 'trajectory.zarr')
    assert traj.attrs['speed'] == 'imcf'
    assert traj.time.values[-1] == pytest.approx(0.5)


def test_run_usage_errors(write_config, tmp_path):
    assert cli.run(str(tmp_path / 'missing.cfg')) == cli.EXIT_USAGE
    assert cli.run(write_config({'grid.nodes': 3})) == cli.EXIT_USAGE
    assert cli.run(write_config({'ambient.field': 'C', 'ambient.n': 3})) == cli.EXIT_USAGE


def test_run_rejects_non_mean_convex_datum(write_config, tmp_path):
    config = write_config(dict(SPHERE, **{'init.family': 'cosk', 'init.tau': 0.3, 'init.eps': 0.25,
                                          'init.mode': 8}))
    assert cli.run(config, output=str(tmp_path / 'out')) == cli.EXIT_USAGE
    assert not (tmp_path / 'out' / 'timeseries.csv').exists()


def test_run_breakdown(write_config, tmp_path):
    config = write_config(dict(SPHERE, **{'time.max_steps': 5}))
    assert cli.run(config, output=str(tmp_path / 'out')) == cli.EXIT_BREAKDOWN


def test_sweep(write_config, tmp_path, monkeypatch):
    monkeypatch.setenv('HYPFLOW_THREADS', '2')
    config = write_config(dict(SPHERE, **{'sweep.speed': 'imcf | log1p'}))
    assert cli.sweep(config, output=str(tmp_path / 'sweep')) == cli.EXIT_OK
    aggregate = pd.read_csv(tmp_path / 'sweep' / 'aggregate.csv')
    assert list(aggregate['run']) == ['run_000', 'run_001']
    assert list(aggregate['speed']) == ['imcf', 'log1p']
    assert list(aggregate['status']) == ['ok', 'ok']
    assert list(aggregate['verification']) == ['pass', 'pass']
    for run in ('run_000', 'run_001'):
        assert (tmp_path / 'sweep' / run / 'timeseries.csv').exists()


def test_sweep_records_failed_members(write_config, tmp_path, monkeypatch):
    monkeypatch.setenv('HYPFLOW_THREADS', '1')
    config = write_config(dict(SPHERE, **{'time.t_end': 0.5, 'sweep.time.max_steps': '5 | 1000'}))
    assert cli.sweep(config, output=str(tmp_path / 'sweep')) == cli.EXIT_BREAKDOWN
    aggregate = pd.read_csv(tmp_path / 'sweep' / 'aggregate.csv')
    assert list(aggregate['status']) == ['flow', 'ok']
    assert list(aggregate['exit_code'])[0] == cli.EXIT_BREAKDOWN


def test_sweep_needs_lists(write_config, tmp_path):
    assert cli.sweep(write_config(SPHERE), output=str(tmp_path / 'sweep')) == cli.EXIT_USAGE


def test_compare_ode(write_config, capsys):
    assert cli.compare_ode(write_config(dict(SPHERE, **{'time.t_end': 2.0}))) == cli.EXIT_OK
    out = capsys.readouterr().out
    assert 'max_relative_deviation' in out
    perturbed = write_config(dict(SPHERE, **{'init.family': 'cosk', 'init.eps': 0.05}), name='perturbed.cfg')
    assert cli.compare_ode(perturbed) == cli.EXIT_USAGE


def test_late_value_errors_are_breakdowns(write_config, tmp_path, monkeypatch):
    def singular(*args, **kwargs):
        raise np.linalg.LinAlgError('singular matrix')

    monkeypatch.setattr(cli.dg, 'summary', singular)
    config = write_config(dict(SPHERE, **{'time.t_end': 0.2}))
    assert cli.run(config, output=str(tmp_path / 'out')) == cli.EXIT_BREAKDOWN


def test_stage_exit_codes():
    for stage, code in [('config', cli.EXIT_USAGE), ('initial-data', cli.EXIT_USAGE),
                        ('flow', cli.EXIT_BREAKDOWN), ('diagnostics', cli.EXIT_BREAKDOWN)]:
        with pytest.raises(cli.StageError) as info:
            with cli._Stage(stage):
                raise ValueError('bad value')
        assert info.value.exit_code == code
    with pytest.raises(cli.StageError) as info:
        with cli._Stage('output'):
            raise PermissionError('read-only')
    assert info.value.exit_code == cli.EXIT_USAGE
