import numpy as np
import pytest

from diffnea import simgen
from diffnea.fixtures import arm7_path, planar2_path
from diffnea.model import parse_urdf_file


@pytest.fixture(scope="session")
def arm7():
    return parse_urdf_file(arm7_path())


@pytest.fixture(scope="session")
def planar2():
    return parse_urdf_file(planar2_path())


@pytest.fixture(scope="session")
def planar2_data(planar2):
    """Short sine-tracking dataset on the 2-link fixture (8 s at 125 Hz)."""
    spec = simgen.SineSpec((3.0, 2.0), (0.5, 0.5), 8.0, 125.0)
    return simgen.generate_dataset(planar2, planar2.inertias, spec)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_state(rng, n, q_scale=1.5, qd_scale=2.0, qdd_scale=4.0):
    """One random joint state as three plain lists."""
    return (list(rng.uniform(-q_scale, q_scale, n)),
            list(rng.uniform(-qd_scale, qd_scale, n)),
            list(rng.uniform(-qdd_scale, qdd_scale, n)))
