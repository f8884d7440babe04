"""Rectangular tensor-product phase-space mesh.

Five axes: position (x, y) in units of l* = 1e-6 m, dimensionless kinetic
energy w in [0, w_max], direction cosine mu in [-1, 1], and azimuth
phi in [0, pi] (the distribution is even in the suppressed out-of-plane
direction, so the half range carries all the information).

Spatial ghost layers exist at i in {0, Nx+1} and j in {0, Ny+1} and are
stored inline in the coefficient arrays.  The momentum axes have no ghost
layers: the faces at w=0, mu=+-1, phi=0 and phi=pi carry exactly zero flux
and the w=w_max face uses a zero exterior state (cut-off).

The phi grid must be symmetric under phi -> pi - phi.  The reflection index
map n' = Nphi - n + 1 (1-based) pairs each azimuth cell with its mirror
image; wall reflections and several table symmetries rely on it, so the
widths are mirror-copied to make dphi[n'] == dphi[n] hold bitwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

__all__ = [
    "GridConfig",
    "PhaseGrid",
    "GridError",
    "OddPhiCount",
    "GammaMisaligned",
    "build_grid",
    "reflect_phi_index",
]


class GridError(ValueError):
    """Invalid mesh request."""


class OddPhiCount(GridError):
    """Nphi must be even so the phi-reflection map swaps the half planes."""


class GammaMisaligned(GridError):
    """dw does not divide the phonon energy gamma (required when inelastic
    scattering is on, so the w +- gamma shifts land on cell boundaries)."""


@dataclass(frozen=True)
class GridConfig:
    """Mesh request consumed by :func:`build_grid`.

    Counts are cells per axis; Lx, Ly in l* units; w_max dimensionless.
    gamma is only used when require_gamma_alignment is set.  Explicit edge
    arrays override the uniform default for x, y, w; the mu and phi grids
    are always the mirrored uniform layout (the reflection identities need
    their symmetry to be exact).
    """

    Nx: int
    Ny: int
    Nw: int
    Nmu: int
    Nphi: int
    Lx: float
    Ly: float
    w_max: float
    gamma: Optional[float] = None
    require_gamma_alignment: bool = False
    x_edges: Optional[np.ndarray] = None
    y_edges: Optional[np.ndarray] = None
    w_edges: Optional[np.ndarray] = None


@dataclass(frozen=True)
class PhaseGrid:
    """Immutable mesh: edge arrays, widths, and centers per axis.

    dphi and the mu widths are mirror-constructed so that the symmetries
    dphi[n'] == dphi[n] and dmu[m] == dmu[Nmu-1-m] are exact, not just
    close.  Safe to share across workers.
    """

    Nx: int
    Ny: int
    Nw: int
    Nmu: int
    Nphi: int
    x_edges: np.ndarray
    y_edges: np.ndarray
    w_edges: np.ndarray
    mu_edges: np.ndarray
    phi_edges: np.ndarray
    Lx: float
    Ly: float
    w_max: float
    # widths (computed once in build_grid; dphi mirror-symmetrized)
    dx: np.ndarray = field(repr=False, default=None)
    dy: np.ndarray = field(repr=False, default=None)
    dw: np.ndarray = field(repr=False, default=None)
    dmu: np.ndarray = field(repr=False, default=None)
    dphi: np.ndarray = field(repr=False, default=None)

    @property
    def x_centers(self) -> np.ndarray:
        return 0.5 * (self.x_edges[:-1] + self.x_edges[1:])

    @property
    def y_centers(self) -> np.ndarray:
        return 0.5 * (self.y_edges[:-1] + self.y_edges[1:])

    @property
    def w_centers(self) -> np.ndarray:
        return 0.5 * (self.w_edges[:-1] + self.w_edges[1:])

    @property
    def shape(self) -> tuple:
        """Interior cell counts (Nx, Ny, Nw, Nmu, Nphi)."""
        return (self.Nx, self.Ny, self.Nw, self.Nmu, self.Nphi)

    @property
    def state_shape(self) -> tuple:
        """Coefficient array shape including the spatial ghost layers."""
        return (self.Nx + 2, self.Ny + 2, self.Nw, self.Nmu, self.Nphi)

    def momentum_cell_volumes(self) -> np.ndarray:
        """dw_k dmu_m dphi_n as an (Nw, Nmu, Nphi) array."""
        return (
            self.dw[:, None, None] * self.dmu[None, :, None] * self.dphi[None, None, :]
        )

    def total_volume(self) -> float:
        return float(
            self.dx.sum() * self.dy.sum()
            * (self.momentum_cell_volumes()).sum()
        )


def reflect_phi_index(n: int, Nphi: int) -> int:
    """Mirror azimuth cell index about phi = pi/2 (1-based): n' = Nphi - n + 1.

    An involution; maps the cos(phi) > 0 half onto the cos(phi) < 0 half.
    """
    if not 1 <= n <= Nphi:
        raise GridError(f"phi index {n} outside 1..{Nphi}")
    return Nphi - n + 1


def _uniform_edges(n: int, lo: float, hi: float) -> np.ndarray:
    return np.linspace(lo, hi, n + 1)


def _mirrored_symmetric_edges(n: int, half_span: float, center: float) -> np.ndarray:
    """Edges on [center-half_span, center+half_span], bitwise symmetric.

    Used for mu (center 0) and phi (center pi/2): the lower half is laid out
    uniformly and the upper half is the exact mirror, so paired widths are
    identical floats.
    """
    half = n // 2
    edges = np.empty(n + 1)
    for i in range(half + 1):
        edges[i] = center - half_span + i * (half_span / half)
    edges[half] = center  # exact midpoint
    for i in range(half):
        edges[n - i] = 2.0 * center - edges[i]
    return edges


def _mirror_widths(edges: np.ndarray) -> np.ndarray:
    """Cell widths with the upper half copied from the lower half bitwise."""
    n = len(edges) - 1
    half = n // 2
    widths = np.diff(edges)
    for i in range(half):
        widths[n - 1 - i] = widths[i]
    return widths


def build_grid(cfg: GridConfig) -> PhaseGrid:
    """Construct a validated :class:`PhaseGrid` (uniform per axis by default).

    Raises OddPhiCount, GammaMisaligned or GridError on invalid requests.
    """
    for name, count in (("Nx", cfg.Nx), ("Ny", cfg.Ny), ("Nw", cfg.Nw),
                        ("Nmu", cfg.Nmu), ("Nphi", cfg.Nphi)):
        if count < 2:
            raise GridError(f"{name} = {count}: need at least 2 cells per axis")
    if cfg.Nphi % 2 != 0:
        raise OddPhiCount(f"Nphi = {cfg.Nphi} is odd")
    if cfg.Nmu % 2 != 0:
        raise GridError(f"Nmu = {cfg.Nmu} is odd; the mirrored mu layout "
                        "needs an even count")
    if cfg.Lx <= 0 or cfg.Ly <= 0 or cfg.w_max <= 0:
        raise GridError(
            f"non-positive extent: Lx={cfg.Lx}, Ly={cfg.Ly}, w_max={cfg.w_max}"
        )

    x_edges = np.asarray(cfg.x_edges, dtype=np.float64) if cfg.x_edges is not None \
        else _uniform_edges(cfg.Nx, 0.0, cfg.Lx)
    y_edges = np.asarray(cfg.y_edges, dtype=np.float64) if cfg.y_edges is not None \
        else _uniform_edges(cfg.Ny, 0.0, cfg.Ly)
    w_edges = np.asarray(cfg.w_edges, dtype=np.float64) if cfg.w_edges is not None \
        else _uniform_edges(cfg.Nw, 0.0, cfg.w_max)
    mu_edges = _mirrored_symmetric_edges(cfg.Nmu, 1.0, 0.0)
    phi_edges = _mirrored_symmetric_edges(cfg.Nphi, 0.5 * math.pi, 0.5 * math.pi)

    for name, edges, count in (("x", x_edges, cfg.Nx), ("y", y_edges, cfg.Ny),
                               ("w", w_edges, cfg.Nw)):
        if len(edges) != count + 1:
            raise GridError(f"{name}_edges has {len(edges)} entries, need {count + 1}")
        if np.any(np.diff(edges) <= 0):
            raise GridError(f"{name}_edges not strictly increasing")
    if abs(w_edges[0]) != 0.0:
        raise GridError("w_edges must start at 0")

    if cfg.require_gamma_alignment:
        if cfg.gamma is None or cfg.gamma <= 0:
            raise GridError("gamma required for alignment check")
        dw = np.diff(w_edges)
        if not np.allclose(dw, dw[0], rtol=1e-12, atol=0.0):
            raise GammaMisaligned("alignment requires a uniform w grid")
        ratio = cfg.gamma / dw[0]
        if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio) or round(ratio) < 1:
            raise GammaMisaligned(
                f"dw = {dw[0]:.6g} does not divide gamma = {cfg.gamma:.6g}"
            )

    return PhaseGrid(
        Nx=cfg.Nx, Ny=cfg.Ny, Nw=cfg.Nw, Nmu=cfg.Nmu, Nphi=cfg.Nphi,
        x_edges=x_edges, y_edges=y_edges, w_edges=w_edges,
        mu_edges=mu_edges, phi_edges=phi_edges,
        Lx=float(x_edges[-1] - x_edges[0]),
        Ly=float(y_edges[-1] - y_edges[0]),
        w_max=float(w_edges[-1]),
        dx=np.diff(x_edges), dy=np.diff(y_edges), dw=np.diff(w_edges),
        dmu=_mirror_widths(mu_edges), dphi=_mirror_widths(phi_edges),
    )
