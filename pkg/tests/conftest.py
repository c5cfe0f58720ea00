import warnings

import numpy as np
import pytest

from jtprobe.model import ModelParams
from jtprobe.operators import HilbertSpace

TWO_PI = 2.0 * np.pi


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def small_space():
    return HilbertSpace(6, 5)


def random_params(rng, space, *, dissipative=False, equal=False, delta=True):
    """Random parameter set well inside the high-frequency regime (units: rad/ms)."""
    w = rng.uniform(0.5, 2.0)
    wy = w if equal else rng.uniform(0.5, 2.0)
    gx = rng.uniform(3.0, 8.0)
    gy = gx if equal else rng.uniform(3.0, 8.0)
    kw = dict(omega_x=w, omega_y=wy, g_x=gx, g_y=gy, phi=rng.uniform(300.0, 900.0), space=space)
    if delta:
        kw["delta"] = rng.uniform(-3.0, 3.0)
    if dissipative:
        g = rng.uniform(0.1, 0.8)
        kw.update(gamma_x=g, gamma_y=g if equal else rng.uniform(0.1, 0.8), gamma_dephase=rng.uniform(0.0, 1.0))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return ModelParams(**kw)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
