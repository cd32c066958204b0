import numpy as np
import pytest

from airsindy.core.dataset import TimeWindow, write_csv
from airsindy.core.ode import QuadraticModel
from airsindy.core.synth import SyntheticSpec, synth_dataset

# y1 decays, y2 rises then relaxes; linear in y, so the fitted library can represent it exactly
BENIGN_COEFFS = np.array([
    [0.0, -0.2, 0.0, 0.0, 0.0, 0.0],
    [0.0, 0.1, -0.3, 0.0, 0.0, 0.0],
])
BENIGN_START = '2018-04-01T08:00:00+00:00'
BENIGN_HOURS = 12


@pytest.fixture(scope='session')
def benign_dataset():
    """Noiseless 13-hour station 'BENIGN' with physical NO2 and O3 readings."""
    spec = SyntheticSpec(
        QuadraticModel(BENIGN_COEFFS, ('NO2', 'O3')),
        y0=(2.0, -1.0),
        duration=BENIGN_HOURS,
        station='BENIGN',
        start=BENIGN_START,
        scale=((40.0, 10.0), (50.0, 12.0)),
    )
    return synth_dataset(spec)


@pytest.fixture(scope='session')
def fine_dataset():
    """The benign system sampled every 6 minutes at station 'FINE'."""
    spec = SyntheticSpec(
        QuadraticModel(BENIGN_COEFFS, ('NO2', 'O3')),
        y0=(2.0, -1.0),
        duration=BENIGN_HOURS,
        station='FINE',
        start=BENIGN_START,
        dt_hours=0.1,
        scale=((40.0, 10.0), (50.0, 12.0)),
    )
    return synth_dataset(spec)


@pytest.fixture
def benign_window():
    return TimeWindow('2018-04-01T08:00:00Z', '2018-04-01T20:00:00Z')


@pytest.fixture(scope='session')
def benign_csv(tmp_path_factory, benign_dataset):
    return write_csv(benign_dataset, tmp_path_factory.mktemp('data') / 'benign.csv')


@pytest.fixture
def write_readings(tmp_path):
    """Writes raw CSV text to a file and returns its path."""
    def _write(text, name='readings.csv'):
        path = tmp_path / name
        path.write_text(text.strip() + '\n', encoding='utf-8')
        return path
    return _write
