import numpy as np
import pytest

from datetime import datetime, timedelta

from climagen.climdata import ClimateSeries, HOURLY, DAILY


def make_series(values, variable="dry_bulb_temp", cadence=HOURLY, start=None):
    start = start or datetime(2001, 1, 1)
    step = timedelta(hours=1 if cadence == HOURLY else 24)
    ts = [start + i * step for i in range(len(values))]
    return ClimateSeries(variable, cadence, ts, np.asarray(values, dtype=float))


@pytest.fixture
def series_factory():
    return make_series


@pytest.fixture(autouse=True)
def _quiet_small_sample_warnings():
    import warnings

    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message=".*small sample.*")
        warnings.filterwarnings("ignore", message=".*only .* points.*")
        warnings.filterwarnings("ignore", message=".*only .* samples.*")
        warnings.filterwarnings("ignore", message=".*only .* lags.*")
        warnings.filterwarnings("ignore", message=".*only .* observations.*")
        yield
