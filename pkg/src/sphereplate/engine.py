"""Matsubara summation of the scattering formula, PFA and derivative expansion.

Free energy and force follow from the round-trip operator ``M(i xi_l)``::

    F_free = kB T sum'_l log det(1 - M)
    F      = kB T sum'_l tr[(1 - M)^-1 dM/dz]

where the primed sum gives the ``l = 0`` term half weight. Both are obtained
from one LU factorization per angular block.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.constants import Boltzmann, c as SPEED_OF_LIGHT
from scipy.special import zeta

from .kernels import KernelContext, fresnel, zero_frequency_fresnel
from .materials import (
    Drude,
    MaterialModel,
    Plasma,
    Tabulated,
    ThermalSpec,
    Vacuum,
    matsubara_frequency,
    static_model,
)
from .spectral import QuadratureSpec, assemble_spectrum, build_quadrature, logdet_and_trace

log = logging.getLogger(__name__)


class SummationError(ArithmeticError):
    """The Matsubara sum did not converge within ``l_max_cap``."""


class ThetaError(ValueError):
    """No derivative-expansion coefficient is available at the requested separation."""


@dataclass(frozen=True)
class Geometry:
    """Sphere radius ``R`` and surface separation ``z`` (m)."""

    R: float
    z: float

    def __post_init__(self):
        if not (self.R > 0 and self.z > 0):
            raise ValueError("R and z must be positive")


@dataclass(frozen=True)
class Materials:
    """Sphere and plate materials."""

    sphere: MaterialModel
    plate: MaterialModel

    @classmethod
    def same(cls, model: MaterialModel) -> "Materials":
        return cls(model, model)


@dataclass
class ForceResult:
    """Outcome of a Matsubara summation.

    ``per_l`` holds ``(l, xi_l, force term, free-energy term)`` with the
    ``l = 0`` weight already applied; terms are in N and J.
    """

    force: float
    free_energy: float
    per_l: list = field(default_factory=list)
    l_used: int = 0
    converged: bool = True


# --------------------------------------------------------------------------
# quadrature selection
# --------------------------------------------------------------------------


def radial_scale(z: float, K: float) -> float:
    """Radial quadrature scale at imaginary wave number ``K``.

    ``1/z`` at low frequency; once ``K z > 1`` the integrand
    ``exp(-2 kappa z)`` only extends to ``k ~ sqrt(K/z)``, which then sets the scale.
    """
    return max(1.0 / z, math.sqrt(K / z))


QuadratureChoice = Optional[QuadratureSpec | Callable[[float, Geometry], QuadratureSpec]]


def _quadrature_for(quad: QuadratureChoice, geom: Geometry, K: float) -> QuadratureSpec:
    if quad is None:
        return QuadratureSpec.auto(geom.R, geom.z, radial_scale(geom.z, K))
    if callable(quad):
        return quad(K, geom)
    return quad


# --------------------------------------------------------------------------
# scattering formula
# --------------------------------------------------------------------------


def matsubara_term(
    geom: Geometry,
    materials: Materials,
    K: float,
    quad: QuadratureChoice = None,
    m_tol: float | None = 1e-12,
    term_tol: float = 1e-12,
):
    """``(log det(1 - M), tr[(1 - M)^-1 dM/dz])`` at wave number ``K = xi/c``.

    The trace is in 1/m. ``K = 0`` uses the zero-frequency kernels.
    """
    ctx = KernelContext(K, geom.R, geom.z, materials.sphere, materials.plate, term_tol=term_tol)
    spec = _quadrature_for(quad, geom, K)
    spectrum = assemble_spectrum(ctx, spec)
    ld, tr, _ = logdet_and_trace(spectrum, m_tol=m_tol)
    return ld, tr


def _summation(geom, materials, thermal, quad, l_min, want, m_tol, term_tol) -> ForceResult:
    kT = Boltzmann * thermal.T
    res = ForceResult(0.0, 0.0)
    small = 0
    for l in range(l_min, thermal.l_max_cap + 1):
        K = matsubara_frequency(thermal, l) / SPEED_OF_LIGHT
        ld, tr = matsubara_term(geom, materials, K, quad, m_tol, term_tol)
        weight = 0.5 if l == 0 else 1.0
        f_l, e_l = weight * kT * tr, weight * kT * ld
        res.force += f_l
        res.free_energy += e_l
        res.per_l.append((l, matsubara_frequency(thermal, l), f_l, e_l))
        res.l_used = l
        log.debug("l=%d K=%.6e force term %.6e", l, K, f_l)
        total, term = (res.force, f_l) if want == "force" else (res.free_energy, e_l)
        if total == 0.0 and term == 0.0:
            small += 1
        elif abs(term) < thermal.rel_tol * abs(total):
            small += 1
        else:
            small = 0
        if small >= 3:
            return res
    res.converged = False
    raise SummationError(f"Matsubara sum not converged within l_max_cap={thermal.l_max_cap}")


def casimir_free_energy(
    geom: Geometry,
    materials: Materials,
    thermal: ThermalSpec,
    quad: QuadratureChoice = None,
    l_min: int = 0,
    m_tol: float | None = 1e-12,
    term_tol: float = 1e-12,
) -> float:
    """Casimir free energy in J.

    Terms are added until three consecutive ones fall below
    ``thermal.rel_tol`` of the partial sum.
    """
    return _summation(geom, materials, thermal, quad, l_min, "energy", m_tol, term_tol).free_energy


def casimir_force(
    geom: Geometry,
    materials: Materials,
    thermal: ThermalSpec,
    quad: QuadratureChoice = None,
    l_min: int = 0,
    m_tol: float | None = 1e-12,
    term_tol: float = 1e-12,
) -> ForceResult:
    """Casimir force in N (negative means attraction) from the trace formula.

    Parameters
    ----------
    geom : Geometry
    materials : Materials
    thermal : ThermalSpec
        Temperature and summation tolerance.
    quad : QuadratureSpec, callable or None
        Fixed quadrature, a function ``(K, geom) -> QuadratureSpec``, or
        ``None`` for the default orders with the frequency-dependent radial scale.
    l_min : int
        First Matsubara index; ``l_min = 1`` drops the classical term.

    Returns
    -------
    ForceResult
        The free energy is accumulated alongside at no extra cost.
    """
    return _summation(geom, materials, thermal, quad, l_min, "force", m_tol, term_tol)


def _static_variant(material: MaterialModel, model_kind: str) -> MaterialModel:
    base = static_model(material)
    if isinstance(base, Vacuum):
        return base
    kind = model_kind.lower()
    if kind == "drude":
        return base if isinstance(base, Drude) else Drude(base.omega_p, 0.0)
    if kind == "plasma":
        return Plasma(base.omega_p)
    raise ValueError("model_kind must be 'drude' or 'plasma'")


def classical_force_term(
    geom: Geometry,
    materials: Materials,
    model_kind: str,
    T: float,
    quad: QuadratureChoice = None,
) -> float:
    """The ``l = 0`` contribution (half weight) to the force in N.

    ``model_kind`` selects the Drude or plasma zero-frequency response built
    from the plasma frequency of each material.
    """
    mats = Materials(_static_variant(materials.sphere, model_kind), _static_variant(materials.plate, model_kind))
    _, tr = matsubara_term(geom, mats, 0.0, quad)
    return 0.5 * Boltzmann * T * tr


# --------------------------------------------------------------------------
# proximity force approximation
# --------------------------------------------------------------------------

_PFA_NODES = 400


def _plane_plane_energy_term(materials: Materials, K: float, z: float, nodes: int) -> float:
    """``int k dk/(2 pi) sum_pol ln(1 - r_s r_p exp(-2 kappa z))`` in 1/m^2."""
    a = radial_scale(z, K) * 0.5
    k, w, _, _ = build_quadrature(QuadratureSpec(nodes, 2, a))
    if K == 0:
        rs = zero_frequency_fresnel(materials.sphere, k)
        rp = zero_frequency_fresnel(materials.plate, k)
    else:
        rs = fresnel(materials.sphere, K, k)
        rp = fresnel(materials.plate, K, k)
    kappa = np.sqrt(K * K + k * k)
    decay = np.exp(-2.0 * kappa * z)
    total = 0.0
    for r1, r2 in zip(rs, rp):
        total += np.sum(w * k * np.log1p(-np.asarray(r1) * np.asarray(r2) * decay))
    return total / (2.0 * math.pi)


def _pfa_nonzero_sum(materials, thermal, z, nodes):
    # terms are cheap; the tolerance is tightened well below the engine's
    tol = 1e-3 * thermal.rel_tol
    partial = 0.0
    small = 0
    for l in range(1, thermal.l_max_cap + 1):
        K = matsubara_frequency(thermal, l) / SPEED_OF_LIGHT
        term = _plane_plane_energy_term(materials, K, z, nodes)
        partial += term
        small = small + 1 if abs(term) < tol * abs(partial) else 0
        if small >= 3:
            return partial
    raise SummationError("PFA Matsubara sum not converged")


def pfa_force(
    geom: Geometry,
    materials: Materials,
    thermal: ThermalSpec,
    l_filter: str = "all",
    nodes: int = _PFA_NODES,
) -> float:
    """Proximity-force approximation ``2 pi R E_pp(z)`` in N.

    ``E_pp`` is the Lifshitz free energy per unit area of two half-spaces at
    gap ``z``. ``l_filter`` is ``"all"``, ``"l=0"`` or ``"l>0"``.
    """
    if l_filter not in ("all", "l=0", "l>0"):
        raise ValueError("l_filter must be 'all', 'l=0' or 'l>0'")
    kT = Boltzmann * thermal.T
    total = 0.0
    if l_filter in ("all", "l=0"):
        total += 0.5 * _plane_plane_energy_term(materials, 0.0, geom.z, nodes)
    if l_filter in ("all", "l>0"):
        total += _pfa_nonzero_sum(materials, thermal, geom.z, nodes)
    return 2.0 * math.pi * geom.R * kT * total


def ideal_pfa_force_T0(R: float, z: float) -> float:
    """Perfect reflectors at zero temperature: ``-pi^3 hbar c R / (360 z^3)``."""
    from scipy.constants import hbar

    return -math.pi**3 * hbar * SPEED_OF_LIGHT * R / (360.0 * z**3)


def ideal_classical_pfa_force(R: float, z: float, T: float, polarizations: int = 1) -> float:
    """``l = 0`` PFA force of perfect reflectors, ``-polarizations kB T zeta(3) R / (8 z^2)``.

    One polarization (TM) describes Drude metals, two the plasma model with
    ``omega_p -> inf``.
    """
    return -polarizations * Boltzmann * T * zeta(3) * R / (8.0 * z * z)


# --------------------------------------------------------------------------
# derivative expansion
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ThetaTable:
    """Rows ``(z, theta_drude, theta_plasma)`` with increasing ``z`` (m)."""

    z: tuple
    theta_drude: tuple
    theta_plasma: tuple

    def __post_init__(self):
        z = np.asarray(self.z, float)
        if z.ndim != 1 or z.size == 0 or len(self.theta_drude) != z.size or len(self.theta_plasma) != z.size:
            raise ValueError("theta table columns must have equal non-zero length")
        if np.any(np.diff(z) <= 0):
            raise ValueError("theta table z column must be strictly increasing")
        if not (np.all(np.isfinite(self.theta_drude)) and np.all(np.isfinite(self.theta_plasma))):
            raise ValueError("theta values must be finite")

    def theta(self, z: float, model_kind: str) -> float:
        col = self.theta_drude if model_kind.lower() == "drude" else self.theta_plasma
        zs = np.asarray(self.z, float)
        if z < zs[0] * (1 - 1e-12) or z > zs[-1] * (1 + 1e-12):
            raise ThetaError(f"z={z:g} m outside the theta table range")
        return float(np.interp(z, zs, np.asarray(col, float)))

    @classmethod
    def load(cls, path) -> "ThetaTable":
        rows = np.loadtxt(path, ndmin=2)
        if rows.shape[1] != 3:
            raise ValueError("theta table needs three columns: z_m theta_drude theta_plasma")
        return cls(tuple(rows[:, 0]), tuple(rows[:, 1]), tuple(rows[:, 2]))


@dataclass(frozen=True)
class DESpec:
    """Source of the curvature coefficient: a table, or derivation on demand.

    With ``derive=True`` and no table entry at the requested ``z``, theta is
    computed by :func:`derive_theta` at radius ``derive_radius_factor * R``.
    """

    table: Optional[ThetaTable] = None
    derive: bool = False
    derive_radius_factor: float = 2.0
    quad: QuadratureChoice = None


def theta_from_forces(f_exact: float, f_pfa: float, R: float, z: float) -> float:
    """Invert ``F_exact = F_PFA (1 - theta z/R)`` for ``theta``."""
    return (1.0 - f_exact / f_pfa) * R / z


def derive_theta(
    R: float,
    z_grid: Sequence[float],
    materials: Materials,
    thermal: ThermalSpec,
    quad: QuadratureChoice = None,
    check_radius_factor: float | None = 2.0,
    tolerance: float = 0.05,
):
    """Curvature coefficient ``theta(z)`` from exact and PFA ``l > 0`` forces.

    Returns a list of ``(z, theta)``. When ``check_radius_factor`` is set, theta
    is recomputed at that multiple of ``R``; a relative disagreement above
    ``tolerance`` means the grid lies outside the asymptotic regime and raises
    ``ThetaError``. The returned value is the one at ``R``.
    """
    rows = []
    for z in z_grid:
        if z / R > 1e-2:
            raise ThetaError(f"z/R = {z / R:.3g} exceeds 1e-2")
        th = _theta_at(R, z, materials, thermal, quad)
        if check_radius_factor:
            th2 = _theta_at(check_radius_factor * R, z, materials, thermal, quad)
            if abs(th2 - th) > tolerance * abs(th):
                raise ThetaError(f"theta not radius independent at z={z:g}: {th:.5g} vs {th2:.5g}")
        rows.append((z, th))
    return rows


def _theta_at(R, z, materials, thermal, quad):
    geom = Geometry(R, z)
    exact = casimir_force(geom, materials, thermal, quad, l_min=1).force
    pfa = pfa_force(geom, materials, thermal, "l>0")
    return theta_from_forces(exact, pfa, R, z)


def _model_kind(materials: Materials) -> str:
    return "plasma" if isinstance(static_model(materials.sphere), Plasma) else "drude"


def de_force(
    geom: Geometry,
    materials: Materials,
    thermal: ThermalSpec,
    de: DESpec,
    classical: float | None = None,
) -> float:
    """Derivative-expansion force ``F_{l=0} + F_PFA_{l>0} (1 - theta z/R)`` in N.

    The classical term is the exact zero-frequency scattering result (pass it
    as ``classical`` to reuse an earlier evaluation).
    """
    kind = _model_kind(materials)
    theta = None
    if de.table is not None:
        try:
            theta = de.table.theta(geom.z, kind)
        except ThetaError:
            if not de.derive:
                raise
    if theta is None:
        if not de.derive:
            raise ThetaError("no theta table given and derivation disabled")
        theta = _theta_at(de.derive_radius_factor * geom.R, geom.z, materials, thermal, de.quad)
    if classical is None:
        _, tr = matsubara_term(geom, materials, 0.0, de.quad)
        classical = 0.5 * Boltzmann * thermal.T * tr
    pfa = pfa_force(geom, materials, thermal, "l>0")
    return classical + pfa * (1.0 - theta * geom.z / geom.R)
