import numpy as np
import pytest

from reinforced_mems.boundary_data import (
    PermittivityProfile,
    certify_growth_constants,
    default_grounded_family,
    series_capacitor_family,
)
from reinforced_mems.geometry import Deflection, DeviceConfig


def bump_profile(nodes, amplitude=1.0, L=1.0):
    """amplitude * (1 - (x/L)^2)^2 as an exact Hermite interpolant."""
    nodes = np.asarray(nodes, dtype=float)
    s = nodes / L
    values = amplitude * (1 - s**2) ** 2
    slopes = amplitude * (-4 * s * (1 - s**2)) / L
    values[[0, -1]] = 0.0
    slopes[[0, -1]] = 0.0
    return Deflection(nodes, values, slopes)


@pytest.fixture
def small_config():
    return DeviceConfig(nx=16, nz_free=8, nz_layer=8)


@pytest.fixture
def sigma2():
    return PermittivityProfile.constant(2.0, 1.0, 1.0)


@pytest.fixture
def default_bd(sigma2):
    bd = default_grounded_family(3.0, sigma2, 1.0)
    return bd.with_constants(*certify_growth_constants(bd, sigma2, (-0.5, 1.0)), (-0.5, 1.0))


@pytest.fixture
def capacitor_bd(sigma2):
    return series_capacitor_family(1.0, sigma2, 1.0)


@pytest.fixture
def bump():
    return bump_profile


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
