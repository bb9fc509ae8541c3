import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings as hypothesis_settings

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

hypothesis_settings.register_profile("calib7", max_examples=20, deadline=None)
hypothesis_settings.load_profile("calib7")


@pytest.fixture
def rng():
    return np.random.default_rng(1)


@pytest.fixture(scope="session")
def round_base():
    from src.families.constructions import centered_axis, round_s2_frame_field
    return round_s2_frame_field(centered_axis(9, 1e-3), centered_axis(9, 1e-3))


@pytest.fixture(scope="session")
def fiber_lift():
    from src.families.constructions import degree_one_line, fiber_curve
    return fiber_curve(np.eye(7)[:, 4], degree_one_line)


@pytest.fixture(scope="session")
def smooth_lift():
    """Generic lift with fourth-order stencils; not CR-holomorphic."""
    from src.families.constructions import random_lift
    return random_lift(3, shape=(9, 9), step=1e-2, fd_order=4)


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: acceptance-scale runs; deselect with -m 'not slow'")
