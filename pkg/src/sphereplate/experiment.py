"""Closed-form physics of the torsional-oscillator apparatus.

Electrostatic calibration force, separation reconstruction, patch-potential
force, thermal spectrum of the oscillator and its force sensitivity. All
quantities are SI.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.constants import Boltzmann, epsilon_0
from scipy.special import zeta


class GeometryError(ValueError):
    """A reconstructed or supplied separation is not physical."""


class AsymptoticRegimeWarning(UserWarning):
    """A closed-form estimate is used outside its asymptotic range of validity."""


PATCH_VALIDITY_M = 7e-6


@dataclass(frozen=True)
class OscillatorParams:
    """Torsional oscillator with the sphere mounted at lever arm ``b``.

    Parameters
    ----------
    kappa : float
        Torsional constant in N m/rad.
    Q : float
        Quality factor.
    f_r : float
        Resonance frequency in Hz.
    b : float
        Lever arm in m.
    T : float
        Temperature in K.
    S_elec : float
        Flat detection-noise density in rad^2/Hz.
    """

    kappa: float
    Q: float
    f_r: float
    b: float
    T: float
    S_elec: float = 0.0

    def __post_init__(self):
        for name in ("kappa", "Q", "f_r", "b", "T"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.S_elec < 0:
            raise ValueError("S_elec must be non-negative")


@dataclass(frozen=True)
class CalibrationState:
    """Electrostatic calibration: residual potential and fixed offsets."""

    V_o: float
    D1_plus_D2: float
    b: float

    def __post_init__(self):
        if not self.D1_plus_D2 > 0:
            raise ValueError("D1_plus_D2 must be positive")


def _image_sum(u: float, rtol: float = 1e-12) -> float:
    """Sum over n >= 1 of (coth u - n coth(n u)) / sinh(n u); negative."""
    coth_u = 1.0 / math.tanh(u)
    total = 0.0
    n = 1
    chunk = max(64, int(4.0 / u))
    while True:
        nn = np.arange(n, n + chunk, dtype=float)
        x = nn * u
        live = x < 700.0
        terms = np.zeros_like(nn)
        xl = x[live]
        terms[live] = (coth_u - nn[live] / np.tanh(xl)) / np.sinh(xl)
        total += float(np.sum(terms))
        last = terms[-1]
        # terms are all <= 0 and decay monotonically once n u > 2
        if x[-1] > 2.0 and (abs(last) < rtol * abs(total) or not live[-1]):
            return total
        n += chunk


def electrostatic_force(z, R, V, V_o):
    """Exact sphere-plate electrostatic force from the image-charge series.

    Parameters
    ----------
    z : float
        Closest separation in m.
    R : float
        Sphere radius in m.
    V, V_o : float
        Applied and residual potential in V.

    Returns
    -------
    float
        Force in N, never positive.

    Notes
    -----
    ``F = 2 pi eps0 (V - V_o)^2 sum_{n>=1} (coth u - n coth nu) / sinh nu``
    with ``cosh u = 1 + z/R``. Every summand is non-positive so the partial
    sums decrease monotonically. The series is truncated once the running
    term drops below 1e-12 of the total.
    """
    if not (z > 0 and R > 0):
        raise ValueError("z and R must be positive")
    dv2 = (V - V_o) ** 2
    if dv2 == 0.0:
        return 0.0
    u = math.acosh(1.0 + z / R)
    return 2.0 * math.pi * epsilon_0 * dv2 * _image_sum(u)


def separation(z_meas, cal: CalibrationState, alpha):
    """Sphere-plate separation ``z_meas - (D1 + D2) - b alpha``."""
    if abs(alpha) >= 1e-4:
        raise ValueError("torsional angle outside the small-angle regime (|alpha| < 1e-4 rad)")
    z = z_meas - cal.D1_plus_D2 - cal.b * alpha
    if z <= 0:
        raise GeometryError(f"reconstructed separation {z:.6g} m is not positive")
    return z


def patch_force(z, R, V_rms, l_bar, warn: bool = True):
    """Asymptotic patch-potential force ``-pi zeta(3) R eps0 V^2 l^2 / (2 z^3)``.

    The expression holds for separations well above the patch size. Below
    7 um an :class:`AsymptoticRegimeWarning` is emitted (not an error).
    """
    if not z > 0:
        raise ValueError("z must be positive")
    if warn and z < PATCH_VALIDITY_M:
        warnings.warn(
            f"patch force at z={z:.3g} m lies below the asymptotic regime z > 7 um",
            AsymptoticRegimeWarning,
            stacklevel=2,
        )
    return -math.pi * zeta(3) * R * epsilon_0 * V_rms**2 * l_bar**2 / (2.0 * z**3)


def oscillator_psd(p: OscillatorParams, f):
    """Angular noise density of the thermally driven oscillator, rad^2/Hz."""
    f = np.asarray(f, dtype=float)
    if np.any(f <= 0):
        raise ValueError("frequency must be positive")
    fr = p.f_r
    lor = fr**4 / ((fr**2 - f**2) ** 2 + f**2 * fr**2 / p.Q**2)
    out = 2.0 * Boltzmann * p.T / (math.pi * p.kappa * p.Q * fr) * lor + p.S_elec
    return float(out) if out.ndim == 0 else out


def min_detectable_force(p: OscillatorParams):
    """Thermal force noise at resonance, N/sqrt(Hz)."""
    return math.sqrt(2.0 * p.kappa * Boltzmann * p.T / (math.pi * p.Q * p.f_r)) / p.b


def rotation_frequency(f_r, n_tr: int, m: int = 1):
    """Spindle angular frequency placing harmonic ``m`` of the trench signal on resonance."""
    if n_tr < 1 or m < 1:
        raise ValueError("n_tr and m must be positive integers")
    return 2.0 * math.pi * f_r / (m * n_tr)
