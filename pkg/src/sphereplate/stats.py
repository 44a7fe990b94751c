"""Robust estimation and error bookkeeping for force-versus-separation data.

The median method gives a point estimate and a distribution-free confidence
interval from order statistics. Systematic components are combined with the
``min(linear, k * quadrature)`` law, and theory is compared to experiment
either through crosses or through a band on the force differences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

T_095 = 1.96
K_095_3 = 1.11
DELTA_Z_DEFAULT = 1.5e-9
# relative theoretical error from the optical data, carried as an input
OPTICAL_DATA_REL_ERROR = 0.005


class StatsError(ValueError):
    """Inputs insufficient or inconsistent for the requested estimate."""


@dataclass(frozen=True)
class RunSeries:
    """Repeated force measurements at one separation."""

    z: float
    samples: np.ndarray

    def __post_init__(self):
        s = np.array(self.samples, dtype=float)
        if s.ndim != 1 or s.size < 4:
            raise StatsError("a run series needs at least 4 samples")
        if not np.all(np.isfinite(s)):
            raise StatsError("samples must be finite")
        s.flags.writeable = False
        object.__setattr__(self, "samples", s)

    @property
    def n(self) -> int:
        return self.samples.size


@dataclass(frozen=True)
class MedianEstimate:
    """Median estimate with its order-statistic confidence interval.

    ``indices`` are the 1-based ranks ``(i, j)`` of the interval ends in the
    ascending signed ordering.
    """

    value: float
    ci: tuple
    random_error: float
    indices: tuple
    z: float = float("nan")


@dataclass(frozen=True)
class NormalEstimate:
    """Sample mean with the normal-law interval ``mean +- t s / sqrt(n)``."""

    value: float
    ci: tuple
    random_error: float


@dataclass(frozen=True)
class ErrorBudget:
    """Systematic components. Force terms in N, separation terms in m."""

    calibration: float = 0.2e-15
    detection: float = 0.6e-15
    measurement: float = 0.5e-15
    sep_offsets: float = 0.6e-9
    sep_zmeas: float = 0.2e-9
    sep_flatness: float = 1.2e-9

    def __post_init__(self):
        for name, v in self.__dict__.items():
            if not v >= 0:
                raise StatsError(f"{name} must be non-negative")

    def force_systematic(self, k_beta: float = K_095_3) -> float:
        return combine_errors([self.calibration, self.detection, self.measurement], k_beta)

    def separation_systematic(self, k_beta: float = K_095_3) -> float:
        return combine_errors([self.sep_offsets, self.sep_zmeas, self.sep_flatness], k_beta)


@dataclass(frozen=True)
class ComparisonCross:
    """Experimental cross: vertical arm ends and horizontal half-width."""

    z: float
    center: float
    upper: float
    lower: float
    half_width: float


def order_indices(n: int, t_beta: float = T_095):
    """1-based ranks ``(i, j)`` bounding the median confidence interval."""
    if t_beta <= 0:
        raise StatsError("t_beta must be positive")
    r = t_beta * math.sqrt(n)
    i = int((n + 1 - r) / 2)
    j = 1 + int((n + 1 + r) / 2)
    if i < 1 or j > n:
        raise StatsError(f"n={n} is too small for the requested confidence")
    return i, j


def median_estimate(series: RunSeries, beta: float = 0.95, t_beta: float = T_095) -> MedianEstimate:
    """Median of the signed samples and its order-statistic interval.

    Parameters
    ----------
    series : RunSeries
    beta : float
        Confidence level; informational, the quantile enters via ``t_beta``.
    t_beta : float
        Tabulated coefficient for ``beta`` (1.96 at 0.95).
    """
    s = np.sort(series.samples)
    n = s.size
    i, j = order_indices(n, t_beta)
    if n % 2 == 0:
        value = 0.5 * (s[n // 2 - 1] + s[n // 2])
    else:
        value = float(s[n // 2])
    lo, hi = float(s[i - 1]), float(s[j - 1])
    return MedianEstimate(float(value), (lo, hi), 0.5 * (hi - lo), (i, j), series.z)


def normal_estimate(series: RunSeries, t_beta: float = T_095) -> NormalEstimate:
    """Estimate assuming normally distributed samples."""
    s = series.samples
    mean = float(np.mean(s))
    half = t_beta * float(np.std(s, ddof=1)) / math.sqrt(s.size)
    return NormalEstimate(mean, (mean - half, mean + half), half)


def combine_errors(components: Sequence[float], k_beta: float = K_095_3) -> float:
    """``min(sum, k_beta * sqrt(sum of squares))`` of non-negative components."""
    c = np.asarray(list(components), dtype=float)
    if c.size == 0:
        raise StatsError("no error components given")
    if np.any(c < 0) or k_beta <= 0:
        raise StatsError("components must be non-negative and k_beta positive")
    return float(min(c.sum(), k_beta * math.sqrt(float(c @ c))))


def total_error(random: float, systematic: float) -> float:
    """Total experimental error: random plus systematic."""
    if random < 0 or systematic < 0:
        raise StatsError("errors must be non-negative")
    return random + systematic


def build_cross(estimate: MedianEstimate, systematic: float, patch: float = 0.0,
                delta_z: float = DELTA_Z_DEFAULT) -> ComparisonCross:
    """Cross centred on the median estimate.

    The interval is widened by ``systematic`` on both sides. The patch force
    is attractive, so its magnitude extends only the upper arm: the
    patch-free force is less negative than the measured one.
    """
    if systematic < 0 or delta_z < 0:
        raise StatsError("systematic error and delta_z must be non-negative")
    lo, hi = estimate.ci
    return ComparisonCross(
        z=estimate.z,
        center=estimate.value,
        upper=hi + systematic + abs(patch),
        lower=lo - systematic,
        half_width=delta_z,
    )


BAND_COLUMNS = ("z", "F_th", "F_expt", "diff", "band_lo", "band_hi", "band_hi_no_patch", "outside")


@dataclass(frozen=True)
class BandRow:
    z: float
    F_th: float
    F_expt: float
    diff: float
    band_lo: float
    band_hi: float
    band_hi_no_patch: float
    outside: bool

    def as_tuple(self):
        return tuple(getattr(self, c) for c in BAND_COLUMNS)


def difference_band(theory, experiment, patch=None, rtol_z: float = 1e-9):
    """Confidence band on ``F_th - F_expt``.

    Parameters
    ----------
    theory : sequence of (z, F_th, dF_th)
    experiment : sequence of (z, F_expt, dF_expt)
        ``dF_expt`` is the total experimental error. A :class:`MedianEstimate`
        paired with a systematic error can be converted with
        :func:`experiment_row`.
    patch : sequence of float, optional
        Patch-force magnitudes; they raise only the upper border.

    Returns
    -------
    list of BandRow
    """
    theory = list(theory)
    experiment = list(experiment)
    if len(theory) != len(experiment):
        raise StatsError("theory and experiment grids differ in length")
    patch = [0.0] * len(theory) if patch is None else list(patch)
    if len(patch) != len(theory):
        raise StatsError("patch list does not match the separation grid")
    rows = []
    for (zt, fth, dth), (ze, fex, dex), p in zip(theory, experiment, patch):
        if abs(zt - ze) > rtol_z * max(abs(zt), abs(ze)):
            raise StatsError(f"misaligned separations {zt!r} and {ze!r}")
        if dth < 0 or dex < 0:
            raise StatsError("errors must be non-negative")
        half = dth + dex
        diff = fth - fex
        hi = half + abs(p)
        rows.append(BandRow(zt, fth, fex, diff, -half, hi, half, bool(diff < -half or diff > hi)))
    return rows


def experiment_row(estimate: MedianEstimate, systematic: float):
    """``(z, value, total error)`` for use in :func:`difference_band`."""
    return estimate.z, estimate.value, total_error(estimate.random_error, systematic)
