import math

import pytest

from magflow.geom import UnitTangent
from magflow.hyperbolic import HyperbolicCylinder, find_closed_orbit


@pytest.fixture(scope="session")
def cylinder2():
    return HyperbolicCylinder(2.0)


@pytest.fixture(scope="session")
def orbit_half(cylinder2):
    """Closed orbit for b = 0.5 on the l = 2 cylinder."""
    system = cylinder2.system(0.5)
    return find_closed_orbit(system, cylinder2, 1, UnitTangent((0.0, 1.0), math.pi / 2))


@pytest.fixture(scope="session")
def burns():
    from magflow.examples.burns import build_burns_system
    return build_burns_system()
