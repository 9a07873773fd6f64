import numpy as np
import pytest

from beamsparse.channels import ArrayGeometry, OfdmGrid
from beamsparse.kernels import DelayBeamGrid
from beamsparse.operators import build_operator

WAVELENGTH = 299792458.0 / 3.5e9


@pytest.fixture
def geom4x4():
    return ArrayGeometry(4, 4, WAVELENGTH, WAVELENGTH / 2)


@pytest.fixture
def tiny_ofdm():
    # 16 subcarriers, stride 4 -> 4 pilots
    return OfdmGrid(16, 30e3, 3.5e9, 4)


@pytest.fixture
def desk_ofdm():
    return OfdmGrid(256, 30e3, 3.5e9, 4)


@pytest.fixture
def tiny_operator(tiny_ofdm, geom4x4):
    grid = DelayBeamGrid.nyquist(tiny_ofdm, geom4x4)
    return build_operator(tiny_ofdm, geom4x4, grid, rank=2)


@pytest.fixture
def desk_operator(desk_ofdm, geom4x4):
    grid = DelayBeamGrid.nyquist(desk_ofdm, geom4x4)
    return build_operator(desk_ofdm, geom4x4, grid, rank=3)


def random_state(op, rng):
    a = op.zero_state()
    a.values[:] = rng.standard_normal(a.values.shape) + 1j * rng.standard_normal(a.values.shape)
    return a


@pytest.fixture
def make_state():
    return random_state
