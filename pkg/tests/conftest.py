import math

import pytest

from pastsim.field import CoolingConfig, spaced_cooling_regions
from pastsim.process import ClogModel, ProcessConfig, SimSetup


def build_small_setup(ny=160, nx=33, h=5, alpha=0.04, water_rate=4.0,
                      persistence=1.0, propensity=None):
    """Desk-size simulator variant used throughout the unit tests."""
    process = ProcessConfig(
        shell_speed=2.0 * math.pi / 16.0, rows_on_shell=4, nozzles_per_row=h,
        belt_width=nx, belt_length=ny,
    )
    regions = spaced_cooling_regions(nx, ny, rows=2, length=12,
                                     j_start=10, j_end=ny - 10)
    cooling = CoolingConfig(rows=2, jets_per_row=3, water_rate=water_rate,
                            wetted_regions=regions, water_temp=72.0)
    clog = ClogModel(base_propensity=propensity, persistence=persistence)
    return SimSetup(process=process, cooling=cooling, clog=clog, alpha=alpha)


@pytest.fixture
def small_setup():
    return build_small_setup()
