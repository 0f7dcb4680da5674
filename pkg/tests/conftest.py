import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_table(rng, n_objects=None, n_users=None, density=0.6):
    """A random sparse table honouring the coverage invariants."""
    from privtd import ObservationTable

    N = n_objects or int(rng.integers(1, 12))
    S = n_users or int(rng.integers(2, 9))
    mask = rng.random((N, S)) < density
    mask[np.arange(N), rng.integers(0, S, N)] = True
    mask[rng.integers(0, N, S), np.arange(S)] = True
    obj, usr = np.nonzero(mask)
    vals = rng.normal(0, 5, len(obj))
    return ObservationTable(obj, usr, vals, N, S)
