import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from postmarkov import collision, lindblad, pmme, qcore
from postmarkov.kernels import Exponential

settings.register_profile(
    "default",
    max_examples=40,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")

PSI0 = np.array([1.0, 2.0]) / math.sqrt(5)
ETA = np.diag([0.6, 0.4]).astype(complex)


@pytest.fixture
def rho0():
    return qcore.projector(PSI0)


@pytest.fixture
def eta():
    return ETA.copy()


@pytest.fixture
def pswap_setup():
    """Collision PSWAP(0.1), pre-measurement PSWAP(0.9), sigma_x measurement."""
    return collision.CollisionSpec.pswap(0.1), collision.MeasurementSpec.pswap(0.9, "x")


@pytest.fixture
def measurement_map(pswap_setup):
    spec, mspec = pswap_setup
    return collision.measurement_channel(spec, mspec, ETA)


@pytest.fixture
def damping_generator():
    return lindblad.build_superoperator(lindblad.amplitude_damping(1.0))


@pytest.fixture
def qubit_problem(damping_generator, measurement_map):
    """Amplitude damping at unit rate, measurement map of the PSWAP setup, exponential kernel."""
    return pmme.PMMEProblem.build(damping_generator, measurement_map, Exponential(1.0))


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)
