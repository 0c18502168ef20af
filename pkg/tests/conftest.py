import os

import numpy as np
import pytest
from hypothesis import settings

from vvof.geometry import make_shape, voxelize
from vvof.grid import Grid

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def unit_grid(n, ndim=2, bc="zero-neumann"):
    return Grid.uniform((n,) * ndim, (1.0,) * ndim, bc=bc)


def disc_field(n, r=0.25, center=(0.5, 0.5)):
    return voxelize(make_shape("disc", r=r, center=center), unit_grid(n))


def sphere_field(n, r=0.25, center=(0.5, 0.5, 0.5)):
    return voxelize(make_shape("sphere", r=r, center=center), unit_grid(n, 3))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "acceptance_lines", None)
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(lines):
        terminalreporter.write_line(line)
