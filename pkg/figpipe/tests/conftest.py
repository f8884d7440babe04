import numpy as np
import pytest

from figpipe.figure_pipeline import EXPECTED_COLUMNS

NX, NY = 6, 4
TIMES = (0.5, 1.0)


def write_moments(path, seed, times=TIMES, nx=NX, ny=NY, drop_col=None):
    """Schema-exact synthetic moments file with smooth fields."""
    rng = np.random.default_rng(seed)
    xs = (np.arange(nx) + 0.5) * (0.15 / nx)
    ys = (np.arange(ny) + 0.5) * (0.012 / ny)
    amp = rng.uniform(0.5, 2.0)
    cols = list(EXPECTED_COLUMNS)
    if drop_col:
        cols.remove(drop_col)
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(cols) + "\n")
        for t in times:
            for i, x in enumerate(xs):
                for j, y in enumerate(ys):
                    base = amp * (1.0 + 0.3 * np.sin(6.0 * x)
                                  * np.cos(9.0 * y) + 0.1 * t)
                    row = {
                        "t_ps": t, "x_um": x, "y_um": y,
                        "rho_cm3": 1e18 * base,
                        "energy_eV": 0.04 * base,
                        "Ux": 0.1 * base, "Uy": 0.01 * base,
                        "Vx_cms": 1e6 * base, "Vy_cms": 1e5 * base,
                        "Ex_kVcm": 60.0 * base, "Ey_kVcm": 5.0 * base,
                        "V_volts": base,
                    }
                    fh.write(",".join("%.17g" % row[c] for c in cols) + "\n")
    return path


def write_mass(path, seed, n=40):
    rng = np.random.default_rng(seed)
    t = np.linspace(0.0, 1.0, n)
    m = 1.0 + 1e-3 * np.cumsum(rng.normal(0, 0.1, n))
    with open(path, "w", newline="\n") as fh:
        fh.write("t_ps,relative_mass\n")
        for ti, mi in zip(t, m):
            fh.write("%.17g,%.17g\n" % (ti, mi))
    return path


@pytest.fixture
def run_tree(tmp_path):
    """Four run directories as the solver's comparison study leaves them."""
    for k, name in enumerate(("specular", "diffusive", "mixed", "soffer")):
        d = tmp_path / name
        d.mkdir()
        write_moments(d / "moments.csv", seed=k)
        write_mass(d / "mass.csv", seed=k)
    return tmp_path
