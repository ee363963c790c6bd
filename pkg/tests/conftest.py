import numpy as np
import pytest

from cps_sentinel.dataio import ChannelSchema, TimeSeriesFrame
from cps_sentinel.rng import Rng


def make_frame(values, labels=None, start=0):
    """Frame with auto-named sensor channels; values is (rows, channels)."""
    values = np.asarray(values, dtype=np.float64)
    rows, channels = values.shape
    schema = ChannelSchema(
        names=tuple(f"C{i}" for i in range(channels)),
        kinds=("sensor",) * channels,
    )
    if labels is None:
        labels = np.zeros(rows, dtype=bool)
    return TimeSeriesFrame(
        schema=schema,
        timestamps=np.arange(start, start + rows, dtype=np.int64),
        values=values,
        labels=np.asarray(labels, dtype=bool),
    )


def random_frame(rows, channels, seed=0, start=0):
    rng = Rng(seed)
    values = rng.uniform_array(rows * channels).reshape(rows, channels)
    return make_frame(values, start=start)


@pytest.fixture
def tiny_frame():
    return make_frame([[0.0, 1.0], [0.5, 0.5], [1.0, 0.0], [0.25, 0.75], [0.75, 0.25]])
