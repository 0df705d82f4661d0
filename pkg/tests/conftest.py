import math

import numpy as np
import pytest
from scipy import special

from owclink import PointingGeometry


def geometry_for(a0, rho, beam_width_m=1.0):
    """Symmetric zero-boresight geometry with prescribed A0 and rho."""
    ups = special.erfinv(math.sqrt(a0))
    radius = ups * beam_width_m / math.sqrt(math.pi / 2)
    probe = PointingGeometry(radius, beam_width_m, 1.0)
    return PointingGeometry(radius, beam_width_m, probe.w_zeq_m / (2 * rho))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
