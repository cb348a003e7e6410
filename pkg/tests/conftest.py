import numpy as np
import pytest

from contact_noether.geometry import ExtendedPoint
from contact_noether.systems import make_harmonic_dissipative, make_kepler


@pytest.fixture
def kepler():
    return make_kepler(m=1.0, k_grav=1.0)


@pytest.fixture
def damped_oscillator():
    return make_harmonic_dissipative(m=1.0, f_spec=1.0, g0=0.2)


@pytest.fixture
def free_oscillator():
    return make_harmonic_dissipative(m=1.0, f_spec=1.0, g0=0.0)


def point(q, p, S=0.0, t=0.0) -> ExtendedPoint:
    return ExtendedPoint(np.atleast_1d(q), np.atleast_1d(p), S, t)
