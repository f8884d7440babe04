"""Post-processing figures for the kinetic device solver's CSV outputs."""

from .figure_pipeline import (EXPECTED_COLUMNS, FigureSpec, SchemaError,
                              load_mass_csv, load_moments_csv, main,
                              plot_mass_overlay, plot_moment_grid)

__version__ = "0.1.0"

__all__ = [
    "EXPECTED_COLUMNS",
    "FigureSpec",
    "SchemaError",
    "load_mass_csv",
    "load_moments_csv",
    "plot_mass_overlay",
    "plot_moment_grid",
    "main",
]
