"""Harmonic model of the rotating-trench force signal.

The sphere sees a periodic step as alternating high and low sectors pass
beneath it. Localized edge corrections and a small trigger phase ``delta``
leave a distinct fingerprint on each family of Fourier coefficients::

    b_odd(m)  = (2/pi) [|F|/m - m f1]
    b_even(m) = (2/pi) f0 m delta
    c_even(m) = (2/pi) [f0 - (m^2/2) f2]
    c_odd(m)  = -(2/pi) |F| delta

The fit is linear in every family, so least squares is exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats


class FitError(ValueError):
    """The harmonic data cannot determine the model parameters."""


@dataclass(frozen=True)
class HarmonicSet:
    """Fourier coefficients ``b_m`` (sines) and ``c_m`` (cosines) for m = 1..len."""

    b: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        b = np.array(self.b, dtype=float)
        c = np.array(self.c, dtype=float)
        if b.ndim != 1 or b.shape != c.shape or b.size == 0:
            raise ValueError("b and c must be equal-length 1-d sequences")
        if not (np.all(np.isfinite(b)) and np.all(np.isfinite(c))):
            raise ValueError("harmonic coefficients must be finite")
        b.flags.writeable = False
        c.flags.writeable = False
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)

    @property
    def m(self) -> np.ndarray:
        return np.arange(1, self.b.size + 1)

    def __len__(self):
        return self.b.size

    @classmethod
    def from_rows(cls, rows) -> "HarmonicSet":
        """Build from ``(m, b_m, c_m)`` rows; ``m`` must run contiguously from 1."""
        rows = sorted((int(r[0]), float(r[1]), float(r[2])) for r in rows)
        ms = [r[0] for r in rows]
        if ms != list(range(1, len(ms) + 1)):
            raise ValueError("harmonic indices must be contiguous from 1")
        return cls([r[1] for r in rows], [r[2] for r in rows])

    @classmethod
    def load(cls, path) -> "HarmonicSet":
        data = np.loadtxt(path, comments="#", ndmin=2)
        if data.shape[1] != 3:
            raise ValueError("harmonics file needs three columns: m b_m c_m")
        return cls.from_rows(data)


@dataclass(frozen=True)
class EdgeFitResult:
    """Fitted signal parameters and their confidence half-widths.

    ``ci`` maps each of ``F_abs, f0, f1, f2, delta`` to a half-width at
    level ``confidence``. ``b_even_rms`` is the RMS deviation of the even
    sine coefficients from their prediction (a consistency check, not fitted).
    """

    F_abs: float
    f0: float
    f1: float
    f2: float
    delta: float
    sigma: float
    confidence: float
    ci: dict = field(default_factory=dict)
    dof: int = 0
    b_even_rms: float = 0.0
    c_odd_slope: float = 0.0
    c_odd_slope_ci: float = 0.0

    def as_dict(self):
        return {"F_abs": self.F_abs, "f0": self.f0, "f1": self.f1, "f2": self.f2, "delta": self.delta}


def model_coefficients(F_abs, f0, f1, f2, delta, m_max):
    """Noise-free ``(b, c)`` for harmonics 1..m_max."""
    m = np.arange(1, m_max + 1, dtype=float)
    odd = m % 2 == 1
    k = 2.0 / math.pi
    b = np.where(odd, k * (F_abs / m - m * f1), k * f0 * m * delta)
    c = np.where(odd, -k * F_abs * delta, k * (f0 - 0.5 * m**2 * f2))
    return b, c


def synthesize_harmonics(F_abs, f0, f1, f2, delta, m_max=21, sigma=0.0, seed=None) -> HarmonicSet:
    """Model coefficients plus independent Gaussian noise of scale ``sigma``."""
    if m_max < 4:
        raise ValueError("m_max must be at least 4")
    b, c = model_coefficients(F_abs, f0, f1, f2, delta, m_max)
    if sigma > 0:
        rng = np.random.default_rng(seed)
        b = b + rng.normal(0.0, sigma, m_max)
        c = c + rng.normal(0.0, sigma, m_max)
    return HarmonicSet(b, c)


def _lstsq(X, y):
    if np.linalg.matrix_rank(X) < X.shape[1]:
        raise FitError("rank-deficient design matrix")
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    cov = np.linalg.inv(X.T @ X)
    return coef, cov, y - X @ coef


def fit_harmonics(data: HarmonicSet, confidence: float = 0.99) -> EdgeFitResult:
    """Extract |F|, edge moments, phase and noise level from harmonics.

    Parameters
    ----------
    data : HarmonicSet
        Measured or synthetic coefficients.
    confidence : float
        Two-sided level for the parameter half-widths.

    Returns
    -------
    EdgeFitResult

    Notes
    -----
    ``b_odd`` is fit to ``u1/m + u2 m`` and ``c_even`` to ``v0 + v2 m^2``.
    The common noise level comes from the odd-sine residuals with
    ``n_odd - 2`` degrees of freedom; it sets every half-width through the
    Student-t quantile at that many degrees of freedom.
    """
    if not 0 < confidence < 1:
        raise ValueError("confidence must lie in (0, 1)")
    m = data.m.astype(float)
    odd = data.m % 2 == 1
    mo, me = m[odd], m[~odd]
    if mo.size < 6 or me.size < 4:
        raise FitError("need at least 6 odd-sine and 4 even-cosine harmonics")

    (u1, u2), cov_u, res = _lstsq(np.column_stack([1.0 / mo, mo]), data.b[odd])
    dof = mo.size - 2
    sigma = math.sqrt(float(res @ res) / dof)
    F_abs = 0.5 * math.pi * u1
    if not F_abs > 0:
        raise FitError("fitted step amplitude is not positive")
    f1 = -0.5 * math.pi * u2

    (v0, v2), cov_v, _ = _lstsq(np.column_stack([np.ones_like(me), me**2]), data.c[~odd])
    f0 = 0.5 * math.pi * v0
    f2 = -math.pi * v2

    c_odd = data.c[odd]
    delta = -math.pi * float(np.mean(c_odd)) / (2.0 * F_abs)
    (_, slope), cov_s, _ = _lstsq(np.column_stack([np.ones_like(mo), mo]), c_odd)

    t = float(stats.t.ppf(0.5 + 0.5 * confidence, dof))
    se = lambda var: sigma * math.sqrt(var)  # noqa: E731
    ci = {
        "F_abs": t * 0.5 * math.pi * se(cov_u[0, 0]),
        "f1": t * 0.5 * math.pi * se(cov_u[1, 1]),
        "f0": t * 0.5 * math.pi * se(cov_v[0, 0]),
        "f2": t * math.pi * se(cov_v[1, 1]),
        # leading order: the |F| uncertainty is negligible next to c_odd noise
        "delta": t * 0.5 * math.pi * sigma / (math.sqrt(mo.size) * F_abs),
    }
    t95 = float(stats.t.ppf(0.975, dof))

    b_even_pred = (2.0 / math.pi) * f0 * me * delta
    b_even_rms = math.sqrt(float(np.mean((data.b[~odd] - b_even_pred) ** 2)))
    return EdgeFitResult(
        F_abs=F_abs,
        f0=f0,
        f1=f1,
        f2=f2,
        delta=delta,
        sigma=sigma,
        confidence=confidence,
        ci=ci,
        dof=dof,
        b_even_rms=b_even_rms,
        c_odd_slope=float(slope),
        c_odd_slope_ci=t95 * se(cov_s[1, 1]),
    )


def harmonic_to_force(first_harmonic_amplitude):
    """Force from the first-harmonic amplitude via the literal ``pi/4`` rule.

    The rule assumes a Heaviside-shaped signal. The lock-in amplitude
    convention behind it (peak, rms, or Fourier coefficient) is not fixed;
    composed with the step coefficient ``2F/pi`` it returns ``F/2``.
    """
    if not math.isfinite(first_harmonic_amplitude):
        raise ValueError("amplitude must be finite")
    return 0.25 * math.pi * first_harmonic_amplitude
