import sys
from pathlib import Path

import pytest

from photonreadout.core import GHZ, MHZ, US, PulseParams, SystemParams

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture
def fast_row():
    """First fast-readout parameter set, t_m = 1 us = 6 t_ph."""
    return SystemParams(5 * GHZ, 4.09 * GHZ, 53.6 * MHZ, 4.08 * MHZ), PulseParams(US / 6), 1 * US
