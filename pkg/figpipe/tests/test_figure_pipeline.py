import numpy as np
import pytest

from figpipe.figure_pipeline import (EXPECTED_COLUMNS, FigureSpec,
                                     SchemaError, build_mass_figure,
                                     build_moment_figure, load_mass_csv,
                                     load_moments_csv, main,
                                     plot_mass_overlay, plot_moment_grid)

from conftest import write_mass, write_moments

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


def test_schema_golden():
    # frozen contract with the solver's CSV writer; changing either side
    # must break this test
    assert EXPECTED_COLUMNS == (
        "t_ps", "x_um", "y_um", "rho_cm3", "energy_eV", "Ux", "Uy",
        "Vx_cms", "Vy_cms", "Ex_kVcm", "Ey_kVcm", "V_volts")


def test_load_moments(tmp_path):
    p = write_moments(tmp_path / "m.csv", seed=1)
    cols = load_moments_csv(p)
    assert tuple(cols.keys()) == EXPECTED_COLUMNS
    assert len(cols["t_ps"]) == 2 * 6 * 4
    assert set(np.unique(cols["t_ps"])) == {0.5, 1.0}


def test_missing_column_lists_schema(tmp_path):
    p = write_moments(tmp_path / "m.csv", seed=1, drop_col="energy_eV")
    with pytest.raises(SchemaError) as ei:
        load_moments_csv(p)
    msg = str(ei.value)
    assert "missing: energy_eV" in msg
    assert "expected: " + ", ".join(EXPECTED_COLUMNS) in msg


def test_mass_schema(tmp_path):
    p = write_mass(tmp_path / "mass.csv", seed=2)
    cols = load_mass_csv(p)
    assert tuple(cols.keys()) == ("t_ps", "relative_mass")
    bad = tmp_path / "bad.csv"
    bad.write_text("time,mass\n0,1\n")
    with pytest.raises(SchemaError, match="missing: t_ps"):
        load_mass_csv(bad)


def test_four_panel_density_figure(run_tree, tmp_path):
    spec = FigureSpec(
        inputs=[(n, run_tree / n / "moments.csv")
                for n in ("specular", "diffusive", "mixed", "soffer")],
        quantity="rho_cm3",
        out_path=tmp_path / "rho.png")
    fig = build_moment_figure(spec)
    titles = [ax.get_title() for ax in fig.axes if ax.get_title()]
    assert titles[:4] == ["specular", "diffusive", "mixed", "soffer"]
    import matplotlib.pyplot as plt
    plt.close(fig)

    out = plot_moment_grid(spec)
    data = out.read_bytes()
    assert data.startswith(PNG_MAGIC) and len(data) > 2000


def test_figure_rendering_deterministic(run_tree, tmp_path):
    spec1 = FigureSpec(inputs=[("specular",
                                run_tree / "specular" / "moments.csv")],
                       quantity="energy_eV", out_path=tmp_path / "a.png")
    spec2 = FigureSpec(inputs=spec1.inputs, quantity="energy_eV",
                       out_path=tmp_path / "b.png")
    a = plot_moment_grid(spec1).read_bytes()
    b = plot_moment_grid(spec2).read_bytes()
    assert a == b


def test_unknown_quantity(run_tree, tmp_path):
    spec = FigureSpec(inputs=[("specular",
                               run_tree / "specular" / "moments.csv")],
                      quantity="charge", out_path=tmp_path / "x.png")
    with pytest.raises(SchemaError, match="unknown quantity"):
        build_moment_figure(spec)


def test_grid_mismatch_rejected(run_tree, tmp_path):
    other = write_moments(tmp_path / "coarse.csv", seed=9, nx=3, ny=2)
    spec = FigureSpec(
        inputs=[("specular", run_tree / "specular" / "moments.csv"),
                ("coarse", other)],
        quantity="rho_cm3", out_path=tmp_path / "x.png")
    with pytest.raises(SchemaError, match="grid differs"):
        build_moment_figure(spec)


def test_snapshot_time_selection(run_tree, tmp_path):
    spec = FigureSpec(inputs=[("specular",
                               run_tree / "specular" / "moments.csv")],
                      quantity="rho_cm3", out_path=tmp_path / "x.png",
                      t_ps=0.5)
    fig = build_moment_figure(spec)
    assert "t = 0.5 ps" in fig.get_suptitle()
    import matplotlib.pyplot as plt
    plt.close(fig)

    spec_bad = FigureSpec(inputs=spec.inputs, quantity="rho_cm3",
                          out_path=tmp_path / "y.png", t_ps=0.123)
    with pytest.raises(SchemaError, match="no snapshot at"):
        build_moment_figure(spec_bad)


def test_mass_overlay(run_tree, tmp_path):
    inputs = [(n, run_tree / n / "mass.csv")
              for n in ("specular", "diffusive", "mixed", "soffer")]
    fig = build_mass_figure(inputs)
    legend = fig.axes[0].get_legend()
    assert [t.get_text() for t in legend.get_texts()] == [
        "specular", "diffusive", "mixed", "soffer"]
    import matplotlib.pyplot as plt
    plt.close(fig)

    out = plot_mass_overlay(inputs, tmp_path / "mass.png")
    assert out.read_bytes().startswith(PNG_MAGIC)


def test_cli_end_to_end(run_tree, tmp_path, capsys):
    out = tmp_path / "figs"
    assert main(["figures", str(run_tree), "--out", str(out)]) == 0
    stdout = capsys.readouterr().out
    assert (out / "rho_cm3_comparison.png").exists()
    assert (out / "mass_overlay.png").exists()
    assert "rho_cm3_comparison.png" in stdout

    assert main(["figures", str(run_tree), "--quantity", "energy_eV",
                 "--out", str(out)]) == 0
    capsys.readouterr()
    assert (out / "energy_eV_comparison.png").exists()


def test_cli_error_codes(run_tree, tmp_path, capsys):
    assert main(["figures", str(tmp_path / "nowhere")]) == 2
    capsys.readouterr()
    empty = tmp_path / "empty"
    empty.mkdir()
    assert main(["figures", str(empty)]) == 2
    assert "no subdirectory" in capsys.readouterr().err
    assert main(["figures", str(run_tree), "--quantity", "bogus",
                 "--out", str(tmp_path / "f")]) == 2
    capsys.readouterr()
