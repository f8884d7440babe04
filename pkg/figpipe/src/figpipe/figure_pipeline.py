"""Multi-panel comparison figures from the solver's CSV outputs.

Reads only the CSV files (no solver imports): `moments.csv` carries one
row per cell per snapshot with a fixed column set, `mass.csv` the
relative total mass per step.  The figure functions are deterministic
for fixed inputs: fixed panel order, fixed color scale taken from the
data, no timestamps in the image metadata.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

# contract with the solver's writer; the golden test pins this tuple
EXPECTED_COLUMNS = ("t_ps", "x_um", "y_um", "rho_cm3", "energy_eV",
                    "Ux", "Uy", "Vx_cms", "Vy_cms", "Ex_kVcm", "Ey_kVcm",
                    "V_volts")

MASS_COLUMNS = ("t_ps", "relative_mass")

# plottable quantities with display labels (coordinates excluded)
QUANTITY_LABELS = {
    "rho_cm3": "density [1/cm$^3$]",
    "energy_eV": "mean energy [eV]",
    "Ux": "x flux [10$^{28}$/(cm$^2$s)]",
    "Uy": "y flux [10$^{28}$/(cm$^2$s)]",
    "Vx_cms": "x velocity [cm/s]",
    "Vy_cms": "y velocity [cm/s]",
    "Ex_kVcm": "x field [kV/cm]",
    "Ey_kVcm": "y field [kV/cm]",
    "V_volts": "potential [V]",
}

# preferred panel order; unknown labels follow alphabetically
CANONICAL_ORDER = ("specular", "diffusive", "mixed", "soffer")


class SchemaError(ValueError):
    """Input file does not match the expected CSV contract."""


def _read_csv(path) -> Tuple[Tuple[str, ...], np.ndarray]:
    try:
        with open(path, "r") as fh:
            header = tuple(fh.readline().strip().split(","))
            rows = [ln.strip().split(",") for ln in fh if ln.strip()]
    except OSError as e:
        raise SchemaError(f"cannot read {path}: {e}") from e
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    try:
        data = np.array(rows, dtype=float)
    except ValueError as e:
        raise SchemaError(f"{path}: non-numeric data: {e}") from e
    if data.shape[1] != len(header):
        raise SchemaError(f"{path}: ragged rows")
    return header, data


def _check_schema(path, header, expected) -> None:
    if tuple(header) == tuple(expected):
        return
    missing = [c for c in expected if c not in header]
    extra = [c for c in header if c not in expected]
    parts = [f"{path}: column mismatch"]
    if missing:
        parts.append("missing: " + ", ".join(missing))
    if extra:
        parts.append("unexpected: " + ", ".join(extra))
    parts.append("expected: " + ", ".join(expected))
    raise SchemaError("; ".join(parts))


def load_moments_csv(path) -> Dict[str, np.ndarray]:
    """-> column name -> array, validated against the schema."""
    header, data = _read_csv(path)
    _check_schema(path, header, EXPECTED_COLUMNS)
    return {name: data[:, i] for i, name in enumerate(header)}


def load_mass_csv(path) -> Dict[str, np.ndarray]:
    header, data = _read_csv(path)
    _check_schema(path, header, MASS_COLUMNS)
    return {name: data[:, i] for i, name in enumerate(header)}


def _grid_shape(cols, path) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """-> (times, x centers, y centers); verifies the row layout."""
    times = np.unique(cols["t_ps"])
    xs = np.unique(cols["x_um"])
    ys = np.unique(cols["y_um"])
    if len(cols["t_ps"]) != len(times) * len(xs) * len(ys):
        raise SchemaError(f"{path}: rows do not tile a (t, x, y) grid")
    return times, xs, ys


def _cell_field(cols, quantity, t, xs, ys, path) -> np.ndarray:
    sel = cols["t_ps"] == t
    x, y, v = cols["x_um"][sel], cols["y_um"][sel], cols[quantity][sel]
    out = np.full((len(xs), len(ys)), np.nan)
    ix = np.searchsorted(xs, x)
    iy = np.searchsorted(ys, y)
    out[ix, iy] = v
    if np.any(np.isnan(out)):
        raise SchemaError(f"{path}: snapshot t = {t:g} ps is incomplete")
    return out


@dataclass
class FigureSpec:
    """One comparison figure: panels share quantity, grid, and snapshot.

    inputs: (label, moments CSV path) pairs in panel order.
    t_ps: snapshot time; None picks the last time in the first file.
    """

    inputs: Sequence[Tuple[str, Path]]
    quantity: str
    out_path: Path
    t_ps: Optional[float] = None
    title: Optional[str] = None


def _ordered_labels(labels: Sequence[str]) -> List[str]:
    known = [l for l in CANONICAL_ORDER if l in labels]
    rest = sorted(l for l in labels if l not in CANONICAL_ORDER)
    return known + rest


def build_moment_figure(spec: FigureSpec):
    """-> matplotlib Figure; separated from saving for the tests."""
    if spec.quantity not in QUANTITY_LABELS:
        raise SchemaError(
            f"unknown quantity {spec.quantity!r}; expected one of: "
            + ", ".join(QUANTITY_LABELS))
    if not spec.inputs:
        raise SchemaError("no input files")

    panels = []
    ref = None
    t = spec.t_ps
    for label, path in spec.inputs:
        cols = load_moments_csv(path)
        times, xs, ys = _grid_shape(cols, path)
        if ref is None:
            ref = (xs, ys)
            if t is None:
                t = float(times[-1])
        elif not (np.array_equal(xs, ref[0]) and np.array_equal(ys, ref[1])):
            raise SchemaError(f"{path}: grid differs from {spec.inputs[0][1]}")
        if not np.any(np.isclose(times, t)):
            raise SchemaError(f"{path}: no snapshot at t = {t:g} ps "
                              f"(has {', '.join(f'{v:g}' for v in times)})")
        t_here = float(times[np.argmin(np.abs(times - t))])
        panels.append((label, _cell_field(cols, spec.quantity, t_here,
                                          xs, ys, path)))

    xs, ys = ref
    vmin = min(np.min(f) for _, f in panels)
    vmax = max(np.max(f) for _, f in panels)
    if vmin == vmax:
        vmax = vmin + 1.0

    n = len(panels)
    ncols = 2 if n > 1 else 1
    nrows = (n + ncols - 1) // ncols
    fig, axes = plt.subplots(nrows, ncols, figsize=(4.2 * ncols,
                                                    3.2 * nrows),
                             squeeze=False, constrained_layout=True)
    # cell edges from the center columns (uniform mesh assumption)
    def edges(c):
        d = c[1] - c[0] if len(c) > 1 else 1.0
        return np.concatenate([[c[0] - d / 2], c + d / 2])

    xe, ye = edges(xs), edges(ys)
    im = None
    for ax, (label, f) in zip(axes.ravel(), panels):
        im = ax.pcolormesh(xe, ye, f.T, vmin=vmin, vmax=vmax,
                           shading="flat", rasterized=True)
        ax.set_title(label)
        ax.set_xlabel("x [$\\mu$m]")
        ax.set_ylabel("y [$\\mu$m]")
    for ax in axes.ravel()[n:]:
        ax.set_visible(False)
    cb = fig.colorbar(im, ax=axes.ravel().tolist(), shrink=0.85)
    cb.set_label(QUANTITY_LABELS[spec.quantity])
    fig.suptitle(spec.title or f"{spec.quantity} at t = {t:g} ps")
    return fig


def plot_moment_grid(spec: FigureSpec) -> Path:
    fig = build_moment_figure(spec)
    out = Path(spec.out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, dpi=150, metadata={"Software": "figpipe"})
    plt.close(fig)
    return out


def build_mass_figure(inputs: Sequence[Tuple[str, Path]],
                      title: Optional[str] = None):
    if not inputs:
        raise SchemaError("no input files")
    fig, ax = plt.subplots(figsize=(5.6, 3.6), constrained_layout=True)
    for label, path in inputs:
        cols = load_mass_csv(path)
        ax.plot(cols["t_ps"], cols["relative_mass"], label=label)
    ax.set_xlabel("t [ps]")
    ax.set_ylabel("relative mass")
    ax.legend()
    if title:
        ax.set_title(title)
    return fig


def plot_mass_overlay(inputs: Sequence[Tuple[str, Path]], out_path,
                      title: Optional[str] = None) -> Path:
    fig = build_mass_figure(inputs, title)
    out = Path(out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, dpi=150, metadata={"Software": "figpipe"})
    plt.close(fig)
    return out


# ---- CLI ----

def _discover_runs(root: Path, moments_name: str,
                   mass_name: str) -> List[Tuple[str, Path, Optional[Path]]]:
    """Subdirectories of root holding a moments CSV become panels."""
    found = []
    for sub in sorted(p for p in root.iterdir() if p.is_dir()):
        m = sub / moments_name
        if m.is_file():
            mass = sub / mass_name
            found.append((sub.name, m, mass if mass.is_file() else None))
    if not found:
        raise SchemaError(
            f"{root}: no subdirectory contains {moments_name}")
    order = _ordered_labels([f[0] for f in found])
    found.sort(key=lambda f: order.index(f[0]))
    return found


def _cmd_figures(args) -> int:
    root = Path(args.dir)
    if not root.is_dir():
        print(f"error: {root} is not a directory", file=sys.stderr)
        return 2
    runs = _discover_runs(root, args.moments_name, args.mass_name)
    out_dir = Path(args.out)

    spec = FigureSpec(
        inputs=[(label, m) for label, m, _ in runs],
        quantity=args.quantity,
        out_path=out_dir / f"{args.quantity}_comparison.png",
        t_ps=args.time)
    path = plot_moment_grid(spec)
    print(f"wrote {path}")

    mass_inputs = [(label, mass) for label, _, mass in runs
                   if mass is not None]
    if mass_inputs:
        path = plot_mass_overlay(mass_inputs, out_dir / "mass_overlay.png")
        print(f"wrote {path}")
    else:
        print("no mass CSVs found, skipping the overlay", file=sys.stderr)
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    ap = argparse.ArgumentParser(
        prog="figpipe",
        description="comparison figures from kinetic device solver CSVs")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("figures",
                       help="render comparison panels from run directories")
    p.add_argument("dir", help="directory with one subdirectory per run")
    p.add_argument("--quantity", default="rho_cm3",
                   help="moments column to plot (default rho_cm3)")
    p.add_argument("--out", default="figures")
    p.add_argument("--time", type=float, default=None,
                   help="snapshot time in ps (default: last)")
    p.add_argument("--moments-name", default="moments.csv")
    p.add_argument("--mass-name", default="mass.csv")
    p.set_defaults(fn=_cmd_figures)

    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except SchemaError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except Exception as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
