import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from bpdg.dg_transport import build_kernel_tables
from bpdg.boundary import build_wall_tables
from bpdg.material_band import (MaterialParams, build_integral_tables,
                                nondimensionalize)
from bpdg.phase_grid import GridConfig, build_grid

# deterministic, bounded-cost profile; the slow end-to-end checks live in
# test_acceptance.py and do not use hypothesis
settings.register_profile(
    "suite",
    derandomize=True,
    max_examples=25,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")


@pytest.fixture(scope="session")
def small_setup():
    """Small but fully featured solver pieces shared by the unit tests.

    w_max is a whole number of phonon quanta so the inelastic channel can
    be enabled on this grid too.
    """
    params = MaterialParams()
    consts = nondimensionalize(params)
    cfg = GridConfig(Nx=6, Ny=4, Nw=8, Nmu=4, Nphi=4,
                     Lx=0.15, Ly=0.012, w_max=8.0 * consts.gamma,
                     gamma=consts.gamma, require_gamma_alignment=True)
    grid = build_grid(cfg)
    tables = build_integral_tables(grid, consts)
    ktab = build_kernel_tables(tables, consts)
    wt = build_wall_tables(tables)
    return params, consts, grid, tables, ktab, wt


@pytest.fixture()
def rng():
    return np.random.default_rng(20240817)
