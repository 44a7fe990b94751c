"""Dielectric response on the imaginary frequency axis and the Matsubara grid.

All frequencies are angular frequencies in rad/s. Models are immutable and can
be shared freely between evaluators.
"""

from __future__ import annotations

import io
import math
import os
import re
from dataclasses import dataclass, field
from typing import BinaryIO, Union

import numpy as np
from scipy.constants import Boltzmann, hbar


class MaterialError(ValueError):
    """Invalid material parameters or a malformed material table."""


@dataclass(frozen=True)
class Drude:
    """Dissipative Drude metal, ``eps = 1 + wp^2 / (xi (xi + gamma))``."""

    omega_p: float
    gamma: float

    def __post_init__(self):
        if not self.omega_p > 0:
            raise MaterialError("omega_p must be positive")
        if not self.gamma >= 0:
            raise MaterialError("gamma must be non-negative")

    @classmethod
    def fit(cls, xi1, eps1, xi2, eps2) -> "Drude":
        """Drude parameters passing exactly through two points ``(xi, eps)``."""
        # (eps-1) xi (xi + gamma) = wp^2 at both points, linear in gamma
        c1, c2 = (eps1 - 1.0) * xi1, (eps2 - 1.0) * xi2
        if c1 == c2:
            raise MaterialError("points do not determine a Drude model")
        gamma = (c2 * xi2 - c1 * xi1) / (c1 - c2)
        if gamma < 0:
            raise MaterialError("fitted relaxation parameter is negative")
        return cls(math.sqrt(c1 * (xi1 + gamma)), gamma)


@dataclass(frozen=True)
class Plasma:
    """Dissipationless plasma model, ``eps = 1 + wp^2 / xi^2``."""

    omega_p: float

    def __post_init__(self):
        if not self.omega_p > 0:
            raise MaterialError("omega_p must be positive")

    @classmethod
    def fit(cls, xi, eps) -> "Plasma":
        return cls(xi * math.sqrt(eps - 1.0))


@dataclass(frozen=True)
class Vacuum:
    """No dielectric contrast (eps = 1); every reflection coefficient vanishes."""


@dataclass(frozen=True, eq=False)
class Tabulated:
    """Tabulated eps(i xi) with a Drude or plasma extrapolation to low frequency.

    Inside the table the interpolation is linear in ``(log xi, log(eps - 1))``.
    Below the first point the extrapolation model is used; above the last point
    ``eps - 1`` decays as ``xi^-2``.
    """

    xi: np.ndarray
    eps: np.ndarray
    extrapolation: Union[Drude, Plasma]
    _log_xi: np.ndarray = field(init=False, repr=False)
    _log_chi: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        xi = np.array(self.xi, dtype=float)
        eps = np.array(self.eps, dtype=float)
        if xi.ndim != 1 or xi.size == 0 or xi.shape != eps.shape:
            raise MaterialError("table must be a non-empty list of (xi, eps) pairs")
        if np.any(xi <= 0) or np.any(np.diff(xi) <= 0):
            raise MaterialError("table frequencies must be positive and strictly increasing")
        if np.any(eps <= 1):
            raise MaterialError("table permittivities must exceed 1")
        if not isinstance(self.extrapolation, (Drude, Plasma)):
            raise MaterialError("extrapolation must be a Drude or Plasma model")
        xi.flags.writeable = False
        eps.flags.writeable = False
        object.__setattr__(self, "xi", xi)
        object.__setattr__(self, "eps", eps)
        object.__setattr__(self, "_log_xi", np.log(xi))
        object.__setattr__(self, "_log_chi", np.log(eps - 1.0))

    def __len__(self):
        return self.xi.size


MaterialModel = Union[Drude, Plasma, Tabulated, Vacuum]


@dataclass(frozen=True)
class ThermalSpec:
    """Temperature and Matsubara-summation controls."""

    T: float
    rel_tol: float = 1e-8
    l_max_cap: int = 100_000

    def __post_init__(self):
        if not self.T > 0:
            raise MaterialError("temperature must be positive")
        if not 0 < self.rel_tol < 1:
            raise MaterialError("rel_tol must lie in (0, 1)")
        if self.l_max_cap < 1:
            raise MaterialError("l_max_cap must be a positive integer")


def matsubara_frequency(spec: ThermalSpec, l: int) -> float:
    """Return the ``l``-th Matsubara frequency ``2 pi kB T l / hbar`` in rad/s."""
    if l < 0:
        raise ValueError("Matsubara index must be non-negative")
    if l == 0:
        return 0.0
    return 2.0 * math.pi * Boltzmann * spec.T * l / hbar


def permittivity(model: MaterialModel, xi):
    """Permittivity eps(i xi) for ``xi > 0`` (scalar or array)."""
    xi_arr = np.asarray(xi, dtype=float)
    if np.any(xi_arr <= 0):
        raise ValueError("permittivity is only defined here for xi > 0")
    if isinstance(model, Drude):
        out = 1.0 + model.omega_p**2 / (xi_arr * (xi_arr + model.gamma))
    elif isinstance(model, Plasma):
        out = 1.0 + (model.omega_p / xi_arr) ** 2
    elif isinstance(model, Vacuum):
        out = np.ones_like(xi_arr)
    elif isinstance(model, Tabulated):
        out = _tabulated(model, xi_arr)
    else:
        raise TypeError(f"unknown material model {model!r}")
    return float(out) if np.ndim(out) == 0 else out


def _tabulated(model: Tabulated, xi):
    log_xi = np.log(xi)
    chi = np.exp(np.interp(log_xi, model._log_xi, model._log_chi))
    below = xi < model.xi[0]
    above = xi > model.xi[-1]
    if np.any(below):
        chi = np.where(below, permittivity(model.extrapolation, np.where(below, xi, 1.0)) - 1.0, chi)
    if np.any(above):
        top = (model.eps[-1] - 1.0) * (model.xi[-1] / xi) ** 2
        chi = np.where(above, top, chi)
    return 1.0 + chi


def static_model(model: MaterialModel):
    """The model governing the xi -> 0 limit (tables delegate to their extrapolation)."""
    if isinstance(model, Tabulated):
        return model.extrapolation
    return model


_HEADER = re.compile(r"^#\s*extrapolation\s*=\s*(\w+)(.*)$", re.IGNORECASE)
_PARAM = re.compile(r"(\w+)\s*=\s*([-+0-9.eE]+)")


def load_material_table(source) -> Tabulated:
    """Parse a two-column ``xi eps`` table.

    ``source`` is a binary stream, a path, or raw bytes. The first line must be
    an extrapolation header such as ``# extrapolation=drude omega_p=... gamma=...``.
    Errors are reported with the offending line number.
    """
    if isinstance(source, (bytes, bytearray)):
        stream: BinaryIO = io.BytesIO(source)
    elif isinstance(source, (str, os.PathLike)):
        with open(source, "rb") as fh:
            return load_material_table(fh.read())
    else:
        stream = source
    lines = stream.read().decode("utf-8").splitlines()
    if not lines:
        raise MaterialError("line 1: missing extrapolation header")
    m = _HEADER.match(lines[0].strip())
    if m is None:
        raise MaterialError("line 1: missing extrapolation header")
    kind = m.group(1).lower()
    params = {k.lower(): float(v) for k, v in _PARAM.findall(m.group(2))}
    try:
        if kind == "drude":
            extrapolation = Drude(params["omega_p"], params["gamma"])
        elif kind == "plasma":
            extrapolation = Plasma(params["omega_p"])
        else:
            raise MaterialError(f"line 1: unknown extrapolation '{kind}'")
    except KeyError as exc:
        raise MaterialError(f"line 1: missing parameter {exc.args[0]}") from None
    except MaterialError as exc:
        raise MaterialError(f"line 1: {exc}") from None

    xi, eps = [], []
    for lineno, raw in enumerate(lines[1:], start=2):
        text = raw.split("#", 1)[0].strip()
        if not text:
            continue
        parts = text.split()
        if len(parts) != 2:
            raise MaterialError(f"line {lineno}: expected two columns, got {len(parts)}")
        try:
            x, e = float(parts[0]), float(parts[1])
        except ValueError:
            raise MaterialError(f"line {lineno}: non-numeric entry {text!r}") from None
        if not (math.isfinite(x) and math.isfinite(e)) or x <= 0:
            raise MaterialError(f"line {lineno}: frequency must be positive and finite")
        if e <= 1:
            raise MaterialError(f"line {lineno}: permittivity {e} must exceed 1")
        if xi and x <= xi[-1]:
            raise MaterialError(f"line {lineno}: frequencies must be strictly increasing")
        xi.append(x)
        eps.append(e)
    if not xi:
        raise MaterialError("table contains no data lines")
    return Tabulated(np.array(xi), np.array(eps), extrapolation)
