"""Material model: constants, Kane dispersion, transport coefficients, tables.

Everything downstream works in the scaled variables
    x = x_phys / l*,  t = t_phys / t*,  Psi = V / V*
with l* = 1e-6 m, t* = 1e-12 s, V* = 1 V, and the dimensionless kinetic
energy w = eps / (kB T_L).  The Kane dispersion

    eps (1 + alpha eps) = hbar^2 |k|^2 / (2 m*)

maps |k| to w; the unknown evolved by the solver is Phi = s(w) f with the
Jacobian weight s(w) = sqrt(w (1 + alpha_K w)) (1 + 2 alpha_K w), where
alpha_K = alpha kB T_L is the dimensionless nonparabolicity.

The five advection coefficients of the transformed equation are

    g1 = c_x a(w) mu
    g2 = c_x a(w) sqrt(1-mu^2) cos(phi)
    g3 = -2 c_k a(w) [mu Ex + sqrt(1-mu^2) cos(phi) Ey]
    g4 = -c_k sqrt(1-mu^2)/sqrt(w(1+alpha_K w)) [sqrt(1-mu^2) Ex - mu cos(phi) Ey]
    g5 =  c_k sin(phi) Ey / (sqrt(w(1+alpha_K w)) sqrt(1-mu^2))

with a(w) = sqrt(w(1+alpha_K w)) / (1 + 2 alpha_K w) the scaled group speed.

Cell integrals of these coefficients are tabled once per run
(:class:`CellIntegralTables`) and shared by the transport assembly, the
wall boundary conditions, and the moment reductions.  The sharing is not a
convenience: the discrete zero-flux identities at reflecting walls cancel
only when both sides of the balance use bit-identical integral values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Union

import numpy as np

from .phase_grid import PhaseGrid

__all__ = [
    "MaterialParams",
    "DimensionlessConstants",
    "CellIntegralTables",
    "ConstantSpecularity",
    "SofferSpecularity",
    "SpecularityFunction",
    "kane_energy",
    "jacobian_weight",
    "group_speed_factor",
    "transport_coefficients",
    "nondimensionalize",
    "doping_dimensionless",
    "build_integral_tables",
    "with_specularity",
]

# ---- physical constants (SI) ----
Q_E = 1.602176634e-19      # C
M_E = 9.1093837015e-31     # kg
K_B = 1.380649e-23         # J/K
HBAR = 1.054571817e-34     # J s
EPS_0 = 8.8541878128e-12   # F/m

# silicon lattice data used for the default scattering constants
RHO_SI = 2330.0            # kg/m^3 mass density
U_L_SI = 9040.0            # m/s    longitudinal sound speed
XI_D_SI = 9.0              # eV     acoustic deformation potential
DTK_SI = 11.4e10           # eV/m   optical deformation potential

# reference scales
L_STAR = 1e-6              # m
T_STAR = 1e-12             # s
V_STAR = 1.0               # V


@dataclass(frozen=True)
class MaterialParams:
    """Physical inputs; all strictly positive.

    K0 and K are the elastic and inelastic scattering kernel constants as
    they appear inside the collision integrals (J^2 s; scaled to rates by
    2 m* t* sqrt(2 m* kB T_L) / hbar^3).  Left at None they are computed
    from the silicon lattice data above.
    """

    m_star: float = 0.32 * M_E          # kg
    alpha: float = 0.5                  # 1/eV
    hbar_omega_p: float = 0.063         # eV
    T_L: float = 300.0                  # K
    K0: Optional[float] = None
    K: Optional[float] = None
    eps_r_silicon: float = 11.7
    eps_r_oxide: float = 3.9

    def __post_init__(self):
        for name in ("m_star", "alpha", "hbar_omega_p", "T_L",
                     "eps_r_silicon", "eps_r_oxide"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        kT = K_B * self.T_L
        if self.K0 is None:
            k0 = (XI_D_SI * Q_E) ** 2 * kT / (
                4.0 * math.pi ** 2 * HBAR * RHO_SI * U_L_SI ** 2)
            object.__setattr__(self, "K0", k0)
        if self.K is None:
            omega_p = self.hbar_omega_p * Q_E / HBAR
            k = (DTK_SI * Q_E) ** 2 / (8.0 * math.pi ** 2 * RHO_SI * omega_p)
            object.__setattr__(self, "K", k)
        if self.K0 < 0 or self.K < 0:
            raise ValueError("scattering constants must be nonnegative")


@dataclass(frozen=True)
class DimensionlessConstants:
    """Scheme constants after nondimensionalization.

    c_x scales spatial transport, c_k field drift, (c_0, c_plus, c_minus)
    the elastic / phonon-emission / phonon-absorption collision kernels,
    gamma is the phonon energy in kB T_L units, c_p the Poisson right side
    scale, c_v the field-from-potential scale, alpha_K the dimensionless
    band nonparabolicity.  kT_eV converts w to eV, density_prefactor_m3
    converts the dimensionless density to 1/m^3.
    """

    c_x: float
    c_k: float
    c_0: float
    c_plus: float
    c_minus: float
    gamma: float
    c_p: float
    alpha_K: float
    c_v: float
    n_q: float
    kT_eV: float
    density_prefactor_m3: float


def nondimensionalize(params: MaterialParams) -> DimensionlessConstants:
    """Fold the SI inputs into the dimensionless scheme constants."""
    kT = K_B * params.T_L
    sqrt_2mkT = math.sqrt(2.0 * params.m_star * kT)
    c_x = (T_STAR / L_STAR) * math.sqrt(2.0 * kT / params.m_star)
    c_k = T_STAR * Q_E * (V_STAR / L_STAR) / sqrt_2mkT
    prefactor = (sqrt_2mkT / HBAR) ** 3
    c_p = prefactor * L_STAR ** 2 * Q_E / EPS_0
    gamma = params.hbar_omega_p * Q_E / kT
    n_q = 1.0 / math.expm1(gamma)  # phonon occupation
    P = 2.0 * params.m_star * T_STAR * sqrt_2mkT / HBAR ** 3
    return DimensionlessConstants(
        c_x=c_x,
        c_k=c_k,
        c_0=P * params.K0,
        c_plus=(n_q + 1.0) * P * params.K,
        c_minus=n_q * P * params.K,
        gamma=gamma,
        c_p=c_p,
        alpha_K=params.alpha * (kT / Q_E),
        c_v=1.0,
        n_q=n_q,
        kT_eV=kT / Q_E,
        density_prefactor_m3=prefactor,
    )


def doping_dimensionless(N_D_m3: float, consts: DimensionlessConstants) -> float:
    """Doping density in the solver's dimensionless units."""
    return N_D_m3 / consts.density_prefactor_m3


def kane_energy(k_norm: Union[float, np.ndarray],
                params: MaterialParams) -> Union[float, np.ndarray]:
    """Nonparabolic band energy (eV) at wavevector magnitude k_norm (1/m).

    Solves eps (1 + alpha eps) = hbar^2 k^2 / (2 m*) for the nonnegative
    root; reduces to the parabolic band for alpha -> 0.  Uses the
    subtraction-free quadratic form, stable for small k.
    """
    k = np.asarray(k_norm, dtype=np.float64)
    if np.any(k < 0):
        raise ValueError("k_norm must be nonnegative")
    u = (HBAR * k) ** 2 / (2.0 * params.m_star * Q_E)  # eV
    eps = 2.0 * u / (1.0 + np.sqrt(1.0 + 4.0 * params.alpha * u))
    return float(eps) if np.isscalar(k_norm) else eps


def jacobian_weight(w, alpha_K: float):
    """s(w) = sqrt(w(1+alpha_K w)) (1+2 alpha_K w), zero for w < 0."""
    w = np.asarray(w, dtype=np.float64)
    wp = np.maximum(w, 0.0)
    s = np.sqrt(wp * (1.0 + alpha_K * wp)) * (1.0 + 2.0 * alpha_K * wp)
    return s if s.ndim else float(s)


def group_speed_factor(w, alpha_K: float):
    """a(w) = sqrt(w(1+alpha_K w)) / (1+2 alpha_K w); increasing, a(0)=0,
    a(inf) = 1/(2 sqrt(alpha_K))."""
    w = np.asarray(w, dtype=np.float64)
    wp = np.maximum(w, 0.0)
    a = np.sqrt(wp * (1.0 + alpha_K * wp)) / (1.0 + 2.0 * alpha_K * wp)
    return a if a.ndim else float(a)


def transport_coefficients(w, mu, phi, Ex, Ey, consts: DimensionlessConstants):
    """Pointwise (g1, g2, g3, g4, g5) at interior momentum coordinates.

    Valid for w > 0 and |mu| < 1.  Callers never evaluate these on the
    singular faces (w=0, mu=+-1, phi=0, phi=pi): the face fluxes there are
    exactly zero by construction and are skipped in the assembly.
    """
    w = np.asarray(w, dtype=np.float64)
    mu = np.asarray(mu, dtype=np.float64)
    if np.any(np.abs(mu) > 1.0) or np.any(w < 0.0):
        raise ValueError("momentum coordinates outside domain")
    aK = consts.alpha_K
    root = np.sqrt(w * (1.0 + aK * w))
    a = root / (1.0 + 2.0 * aK * w)
    smu = np.sqrt(1.0 - mu ** 2)
    cphi = np.cos(phi)
    g1 = consts.c_x * a * mu
    g2 = consts.c_x * a * smu * cphi
    g3 = -2.0 * consts.c_k * a * (mu * Ex + smu * cphi * Ey)
    g4 = -consts.c_k * (smu / root) * (smu * Ex - mu * cphi * Ey)
    g5 = consts.c_k * np.sin(phi) * Ey / (root * smu)
    return g1, g2, g3, g4, g5


# ---- specularity models (wall reflection probability) ----

@dataclass(frozen=True)
class ConstantSpecularity:
    """Momentum-independent reflection probability p in [0, 1]."""

    p: float

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"specularity p = {self.p} outside [0, 1]")

    def evaluate(self, w, phi, alpha_K: float):
        return np.full(np.broadcast(np.asarray(w), np.asarray(phi)).shape, self.p)


@dataclass(frozen=True)
class SofferSpecularity:
    """Roughness model p(w, phi) = exp(-4 eta^2 w (1+alpha_K w) sin^2 phi).

    eta is the rms roughness height over the thermal wavelength; the
    exponent is the squared wall-normal wavevector component in thermal
    units.  Independent of mu and symmetric under phi -> pi - phi.
    """

    eta: float

    def __post_init__(self):
        if self.eta < 0:
            raise ValueError("eta must be nonnegative")

    def evaluate(self, w, phi, alpha_K: float):
        w = np.asarray(w, dtype=np.float64)
        phi = np.asarray(phi, dtype=np.float64)
        return np.exp(-4.0 * self.eta ** 2 * w * (1.0 + alpha_K * w)
                      * np.sin(phi) ** 2)


SpecularityFunction = Union[ConstantSpecularity, SofferSpecularity]


# ---- cell integral tables ----

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)


def w_cell_integral(f, w_lo: float, w_hi: float, npts: int = 8) -> float:
    """ integral of f(w) over [w_lo, w_hi] by Gauss-Legendre in u = sqrt(w).

    The substitution removes the sqrt(w) branch point at w = 0, so every
    integrand used here (a(w), s(w), e^-w s(w)) is analytic in u and the
    fixed-order rule is accurate to full precision on the first cell too.
    """
    if npts == 8:
        nodes, weights = _GL_NODES, _GL_WEIGHTS
    else:
        nodes, weights = np.polynomial.legendre.leggauss(npts)
    u_lo, u_hi = math.sqrt(w_lo), math.sqrt(w_hi)
    mid, half = 0.5 * (u_hi + u_lo), 0.5 * (u_hi - u_lo)
    u = mid + half * nodes
    return float(half * np.sum(weights * 2.0 * u * f(u * u)))


def _asinh_sqrt(aK: float, w: float) -> float:
    # antiderivative of 1/sqrt(w(1+aK w)) is (2/sqrt(aK)) asinh(sqrt(aK w)),
    # degenerating to 2 sqrt(w) in the parabolic limit
    if aK == 0.0:
        return 2.0 * math.sqrt(w)
    return 2.0 / math.sqrt(aK) * math.asinh(math.sqrt(aK * w))


@dataclass(frozen=True)
class CellIntegralTables:
    """Per-cell momentum integrals shared by every consumer.

    w tables (length Nw, per cell k):
      Iw       : integral of a(w) dw
      Iw_maxw  : integral of e^-w s(w) dw
      Iw_inv   : integral of dw / sqrt(w(1+alpha_K w))   (closed form)
      s_bar    : cell average of s(w)
      mw       : Iw_maxw / dw (cell-averaged wall Maxwellian weight)
      w_bar    : cell midpoints
      a_face   : a(w) at the Nw+1 cell edges (a_face[0] = 0 exactly)
    mu tables (length Nmu; closed forms):
      Imu      : integral of sqrt(1-mu^2) dmu
      Imu_mu   : integral of mu dmu, with Imu_mu_pos/neg the sign-split parts
      Imu_inv  : integral of dmu / sqrt(1-mu^2)
    phi tables (length Nphi; closed forms, mirror-constructed so that
    paired entries are bitwise negatives/copies):
      Iphi_cos : integral of cos(phi) dphi, with pos/neg sign-split parts
      sin_phi_face : sin(phi) at the Nphi+1 edges (0 exactly at both ends)
    Optional wall-reflection tables for a momentum-dependent specularity
    (populated by :func:`with_specularity`):
      Ip, Ip_maxw : cell integrals of p and (1-p) e^-w s(w)
      p_bar, q_bar: the same divided by the cell volume (q_bar collapses to
                    (1-p) mw for constant p, computed analytically).
    """

    grid: PhaseGrid
    alpha_K: float
    Iw: np.ndarray
    Iw_maxw: np.ndarray
    Iw_inv: np.ndarray
    s_bar: np.ndarray
    mw: np.ndarray
    w_bar: np.ndarray
    a_face: np.ndarray
    Imu: np.ndarray
    Imu_mu: np.ndarray
    Imu_mu_pos: np.ndarray
    Imu_mu_neg: np.ndarray
    Imu_inv: np.ndarray
    Iphi_cos: np.ndarray
    Iphi_cos_pos: np.ndarray
    Iphi_cos_neg: np.ndarray
    sin_phi_face: np.ndarray
    Ip: Optional[np.ndarray] = None
    Ip_maxw: Optional[np.ndarray] = None
    p_bar: Optional[np.ndarray] = None
    q_bar: Optional[np.ndarray] = None


def build_integral_tables(grid: PhaseGrid,
                          consts: DimensionlessConstants,
                          p_spec: Optional[SpecularityFunction] = None,
                          ) -> CellIntegralTables:
    """Build the shared tables; optionally attach specularity integrals.

    The phi tables are computed on the lower half plane and mirrored so the
    reflection identities hold exactly in floating point.
    """
    aK = consts.alpha_K
    Nw, Nmu, Nphi = grid.Nw, grid.Nmu, grid.Nphi
    we = grid.w_edges

    a_of_w = lambda w: np.sqrt(w * (1.0 + aK * w)) / (1.0 + 2.0 * aK * w)
    maxw = lambda w: np.exp(-w) * np.sqrt(w * (1.0 + aK * w)) * (1.0 + 2.0 * aK * w)
    s_of_w = lambda w: np.sqrt(w * (1.0 + aK * w)) * (1.0 + 2.0 * aK * w)

    Iw = np.array([w_cell_integral(a_of_w, we[k], we[k + 1]) for k in range(Nw)])
    Iw_maxw = np.array([w_cell_integral(maxw, we[k], we[k + 1]) for k in range(Nw)])
    s_int = np.array([w_cell_integral(s_of_w, we[k], we[k + 1]) for k in range(Nw)])
    Iw_inv = np.array([_asinh_sqrt(aK, we[k + 1]) - _asinh_sqrt(aK, we[k])
                       for k in range(Nw)])
    a_face = np.array([group_speed_factor(w, aK) for w in we])
    a_face[0] = 0.0  # exact: the w=0 face never transports

    # mu: closed-form antiderivatives
    me = grid.mu_edges
    F_imu = 0.5 * (me * np.sqrt(np.clip(1.0 - me ** 2, 0.0, None)) + np.arcsin(me))
    Imu = np.diff(F_imu)
    pos_part = np.maximum(me, 0.0) ** 2 * 0.5   # antiderivative of max(mu, 0)
    neg_part = np.minimum(me, 0.0) ** 2 * 0.5   # antiderivative of min(mu, 0)
    Imu_mu_pos = np.diff(pos_part)
    Imu_mu_neg = np.diff(neg_part)
    Imu_mu = Imu_mu_pos + Imu_mu_neg
    Imu_inv = np.diff(np.arcsin(me))

    # phi: mirror construction; lower half has cos(phi) > 0
    pe = grid.phi_edges
    half = Nphi // 2
    Iphi_cos = np.empty(Nphi)
    sin_face = np.empty(Nphi + 1)
    for n in range(half):
        Iphi_cos[n] = math.sin(pe[n + 1]) - math.sin(pe[n])
        Iphi_cos[Nphi - 1 - n] = -Iphi_cos[n]
    for f in range(half + 1):
        sin_face[f] = math.sin(pe[f])
        sin_face[Nphi - f] = sin_face[f]
    sin_face[0] = 0.0
    sin_face[Nphi] = 0.0
    Iphi_cos_pos = np.where(np.arange(Nphi) < half, Iphi_cos, 0.0)
    Iphi_cos_neg = np.where(np.arange(Nphi) >= half, Iphi_cos, 0.0)

    tables = CellIntegralTables(
        grid=grid, alpha_K=aK,
        Iw=Iw, Iw_maxw=Iw_maxw, Iw_inv=Iw_inv,
        s_bar=s_int / grid.dw, mw=Iw_maxw / grid.dw,
        w_bar=grid.w_centers.copy(), a_face=a_face,
        Imu=Imu, Imu_mu=Imu_mu, Imu_mu_pos=Imu_mu_pos, Imu_mu_neg=Imu_mu_neg,
        Imu_inv=Imu_inv,
        Iphi_cos=Iphi_cos, Iphi_cos_pos=Iphi_cos_pos, Iphi_cos_neg=Iphi_cos_neg,
        sin_phi_face=sin_face,
    )
    if p_spec is not None:
        tables = with_specularity(tables, p_spec)
    return tables


def with_specularity(tables: CellIntegralTables,
                     p_spec: SpecularityFunction) -> CellIntegralTables:
    """Return a copy of `tables` with the reflection integrals attached.

    The base arrays are shared by reference, so every consumer still sees
    bit-identical values.  For a constant p the cell averages are exact
    (p_bar = p, q_bar = (1-p) mw); for the roughness model they are
    quadrature values, mirrored in phi.
    """
    grid = tables.grid
    aK = tables.alpha_K
    Nw, Nmu, Nphi = grid.Nw, grid.Nmu, grid.Nphi
    vol = grid.momentum_cell_volumes()

    if isinstance(p_spec, ConstantSpecularity):
        p = p_spec.p
        p_bar = np.full((Nw, Nmu, Nphi), p)
        q_bar = np.broadcast_to(
            ((1.0 - p) * tables.mw)[:, None, None], (Nw, Nmu, Nphi)).copy()
        return replace(tables, Ip=p * vol, Ip_maxw=q_bar * vol,
                       p_bar=p_bar, q_bar=q_bar)

    # roughness model: p independent of mu, even about phi = pi/2
    we, pe = grid.w_edges, grid.phi_edges
    half = Nphi // 2
    nodes, weights = _GL_NODES, _GL_WEIGHTS
    Ig_p = np.empty((Nw, Nphi))      # integral of p over the (w, phi) cell
    Ig_q = np.empty((Nw, Nphi))      # integral of (1-p) e^-w s(w)
    for n in range(half):
        pm, ph = 0.5 * (pe[n + 1] + pe[n]), 0.5 * (pe[n + 1] - pe[n])
        phis = pm + ph * nodes
        for k in range(Nw):
            acc_p = 0.0
            acc_q = 0.0
            for wq, ww in zip(*_w_gauss_points(we[k], we[k + 1])):
                pv = p_spec.evaluate(wq, phis, aK)
                mx = math.exp(-wq) * jacobian_weight(wq, aK)
                acc_p += ww * ph * float(np.sum(weights * pv))
                acc_q += ww * ph * float(np.sum(weights * (1.0 - pv))) * mx
            Ig_p[k, n] = acc_p
            Ig_q[k, n] = acc_q
            Ig_p[k, Nphi - 1 - n] = acc_p
            Ig_q[k, Nphi - 1 - n] = acc_q

    Ip = Ig_p[:, None, :] * grid.dmu[None, :, None]
    Ip_maxw = Ig_q[:, None, :] * grid.dmu[None, :, None]
    return replace(tables, Ip=Ip, Ip_maxw=Ip_maxw,
                   p_bar=Ip / vol, q_bar=Ip_maxw / vol)


def _w_gauss_points(w_lo: float, w_hi: float):
    """Gauss points/weights in w for the u = sqrt(w) substitution."""
    u_lo, u_hi = math.sqrt(w_lo), math.sqrt(w_hi)
    mid, half = 0.5 * (u_hi + u_lo), 0.5 * (u_hi - u_lo)
    u = mid + half * _GL_NODES
    return u * u, half * _GL_WEIGHTS * 2.0 * u
