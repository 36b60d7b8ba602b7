import pytest

from hypflow.ambient import make_ambient
from hypflow.speeds import imcf, log1p, power


@pytest.fixture
def rh3():
    return make_ambient('R', 3)


@pytest.fixture
def ch2():
    return make_ambient('C', 2)


@pytest.fixture
def hh2():
    return make_ambient('H', 2)


@pytest.fixture(params=[('R', 3), ('C', 2), ('H', 2)], ids=['RH3', 'CH2', 'HH2'])
def ambient(request):
    return make_ambient(*request.param)


@pytest.fixture(params=['imcf', 'log1p', 'sqrt'])
def speed(request):
    return {'imcf': imcf, 'log1p': log1p, 'sqrt': lambda: power(0.5)}[request.param]()


@pytest.fixture
def write_config(tmp_path):
    """Write `key = value` lines to a config file under tmp_path."""
    def _write(values, name='run.cfg'):
        lines = [f'{key} = {value}' for key, value in values.items()]
        path = tmp_path / name
        path.write_text('# test config\n' + '\n'.join(lines) + '\n')
        return str(path)
    return _write
