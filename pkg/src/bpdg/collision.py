"""Linear electron-phonon collision operator.

Acting on the weighted unknown Phi = s(w) f, the operator is

    C(Phi)(w, mu, phi) = s(w) [ c_0 A(w) + c_plus A(w + gamma) + c_minus A(w - gamma) ]
                       - Phi(w, mu, phi) * 2 pi [ c_0 s(w) + c_plus s(w - gamma)
                                                  + c_minus s(w + gamma) ]

with A(w) the angular integral of Phi over (mu, phi) at energy w.  The
elastic acoustic channel is c_0, phonon emission c_plus, absorption
c_minus (c_plus / c_minus = e^gamma, detailed balance).

Discretely the basis is piecewise constant in momentum, so the operator
is exact on the space once s(w) is replaced by its cell average s_bar.
The shifted evaluations need w +- gamma to land on cell boundaries
(gamma-alignment: gamma = J dw for integer J on a uniform w grid); both
Phi and the s_bar table are extended by zero outside [0, w_max], which is
what makes the discrete gain and loss totals cancel exactly per spatial
cell.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .material_band import CellIntegralTables, DimensionlessConstants
from .phase_grid import GammaMisaligned, PhaseGrid

__all__ = [
    "CollisionTables",
    "build_collision_tables",
    "angular_average",
    "apply_collision",
]

_MODES = ("full", "elastic", "off")


@dataclass(frozen=True)
class CollisionTables:
    """Precomputed per-run collision data.

    loss_factor[k] = 2 pi (c_0 s_bar[k] + c_plus s_bar[k-J] + c_minus s_bar[k+J])
    with the zero-extended cell-average table; J = shift = gamma / dw
    (0 when only the elastic channel is active).
    """

    c_0: float
    c_plus: float
    c_minus: float
    shift: int
    s_bar: np.ndarray
    loss_factor: np.ndarray
    dmu: np.ndarray
    dphi: np.ndarray

    @property
    def active(self) -> bool:
        return self.c_0 != 0.0 or self.c_plus != 0.0 or self.c_minus != 0.0


def _shifted(a: np.ndarray, offset: int) -> np.ndarray:
    """a[..., k + offset] along the last axis, zero-extended on both sides."""
    out = np.zeros_like(a)
    n = a.shape[-1]
    if offset >= 0:
        out[..., : n - offset] = a[..., offset:]
    else:
        out[..., -offset:] = a[..., : n + offset]
    return out


def build_collision_tables(grid: PhaseGrid,
                           consts: DimensionlessConstants,
                           tables: CellIntegralTables,
                           mode: str = "full") -> CollisionTables:
    """Assemble the loss table; validates gamma-alignment for the full mode."""
    if mode not in _MODES:
        raise ValueError(f"collision mode {mode!r}, expected one of {_MODES}")
    if mode == "off":
        c0 = cp = cm = 0.0
        J = 0
    elif mode == "elastic":
        c0, cp, cm = consts.c_0, 0.0, 0.0
        J = 0
    else:
        c0, cp, cm = consts.c_0, consts.c_plus, consts.c_minus
        dw = grid.dw
        if not np.allclose(dw, dw[0], rtol=1e-12, atol=0.0):
            raise GammaMisaligned("inelastic scattering needs a uniform w grid")
        ratio = consts.gamma / dw[0]
        J = int(round(ratio))
        if J < 1 or abs(ratio - J) > 1e-9 * max(1.0, ratio):
            raise GammaMisaligned(
                f"dw = {dw[0]:.6g} does not divide gamma = {consts.gamma:.6g}"
            )

    s_bar = tables.s_bar
    loss = 2.0 * np.pi * (c0 * s_bar
                          + cp * _shifted(s_bar, -J)
                          + cm * _shifted(s_bar, +J))
    return CollisionTables(c_0=c0, c_plus=cp, c_minus=cm, shift=J,
                           s_bar=s_bar, loss_factor=loss,
                           dmu=grid.dmu, dphi=grid.dphi)


def angular_average(coeff: np.ndarray, ct: CollisionTables) -> np.ndarray:
    """Angular integral over (mu, phi) per energy cell and basis coefficient.

    coeff has shape (..., Nw, Nmu, Nphi); returns (..., Nw).  Fixed-order
    contraction, deterministic.
    """
    wmn = ct.dmu[:, None] * ct.dphi[None, :]
    return np.einsum("...kmn,mn->...k", coeff, wmn, optimize=False)


def apply_collision(T: np.ndarray, X: np.ndarray, Y: np.ndarray,
                    ct: CollisionTables):
    """Projected C(Phi_h) for the three basis coefficient arrays.

    Arrays have shape (..., Nw, Nmu, Nphi) (leading spatial axes free, the
    caller passes interior views).  Returns matching (CT, CX, CY).  The
    gain is isotropic at each energy cell, so each coefficient channel
    closes on itself.
    """
    J = ct.shift
    out = []
    for c in (T, X, Y):
        A = angular_average(c, ct)
        G = ct.c_0 * A
        if J:
            # emission gain reads A at w + gamma, absorption at w - gamma
            G = G + ct.c_plus * _shifted(A, +J) + ct.c_minus * _shifted(A, -J)
        gain = ct.s_bar * G
        out.append(gain[..., :, None, None] - ct.loss_factor[:, None, None] * c)
    return tuple(out)
