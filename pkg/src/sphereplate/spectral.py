"""Discretized round-trip operator and its determinant and trace functionals.

The in-plane wave vectors are discretized in polar coordinates: a
Fourier-Chebyshev rule on ``[0, inf)`` for the radial component and the
trapezoidal rule for the angle. The kernel depends on the two angles only
through their difference, so the discretized operator is a circulant block
matrix which a discrete Fourier transform over the angle difference splits into
``M/2 + 1`` independent real blocks of size ``2N x 2N``.

Block layout: rows are outgoing waves, columns incoming waves, the first ``N``
indices carry TM and the last ``N`` carry TE polarization. The cross
polarization blocks are made real by the similarity ``diag(1, i)``, which
leaves determinants and traces unchanged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.fft
import scipy.linalg
from numba import njit

from .kernels import (
    _GAUSS_EFOLDS,
    _NEGLIGIBLE,
    ConvergenceError,
    KernelContext,
    _abcd,
    _amplitudes,
    _log_cosh_m1,
    _plasma_b_table,
    _te_series,
    fresnel,
    zero_frequency_fresnel,
)
from .materials import Drude, Plasma, Vacuum, static_model
from scipy.constants import c as SPEED_OF_LIGHT


class NonContractiveError(ArithmeticError):
    """``1 - M`` has a non-positive determinant in some block."""


@dataclass(frozen=True)
class QuadratureSpec:
    """Radial order ``N``, angular order ``M`` (even) and radial scale ``a`` (1/m)."""

    N: int
    M: int
    a: float

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be >= 1")
        if self.M < 2 or self.M % 2:
            raise ValueError("M must be even and >= 2")
        if not self.a > 0:
            raise ValueError("a must be positive")

    @classmethod
    def auto(cls, R: float, z: float, a: float | None = None) -> "QuadratureSpec":
        """Default orders ``N = ceil(8 sqrt(R/z)) + 20``, ``M = 2N`` and ``a = 1/z``."""
        N = math.ceil(8.0 * math.sqrt(R / z)) + 20
        return cls(N, 2 * N, 1.0 / z if a is None else a)


def build_quadrature(spec: QuadratureSpec):
    """Nodes and weights of the radial and angular rules.

    Returns
    -------
    k, w : ndarray
        Radial nodes ``a cot^2(t_i/2)``, ``t_i = pi i/(N+1)``, strictly
        decreasing, and the matching Fourier-Chebyshev weights.
    phi, v : ndarray
        Angular nodes ``2 pi j/M`` and weights ``2 pi/M``.
    """
    N, a = spec.N, spec.a
    t = np.pi * np.arange(1, N + 1) / (N + 1)
    k = a / np.tan(0.5 * t) ** 2
    j = np.arange(1, N + 1, 2)
    sums = (np.sin(np.outer(t, j)) / j).sum(axis=1)
    # 1 - cos t = 2 sin^2(t/2) avoids cancellation at small t
    w = 8.0 * a * np.sin(t) / (2.0 * np.sin(0.5 * t) ** 2) ** 2 / (N + 1) * sums
    phi = 2.0 * np.pi * np.arange(spec.M) / spec.M
    v = np.full(spec.M, 2.0 * np.pi / spec.M)
    return k, w, phi, v


@dataclass(frozen=True, eq=False)
class RoundTripSpectrum:
    """Real ``2N x 2N`` blocks of the discretized round-trip operator.

    ``blocks[m]`` is the block of angular index ``m = 0 .. M/2``. ``kappa``
    holds ``sqrt(K^2 + k_i^2)`` at the radial nodes, which fixes the analytic
    z-derivative of every entry.
    """

    blocks: np.ndarray
    N: int
    M: int
    a: float
    K: float
    z: float
    R: float
    kappa: np.ndarray

    def __post_init__(self):
        if self.blocks.shape != (self.M // 2 + 1, 2 * self.N, 2 * self.N):
            raise ValueError("block array has the wrong shape")
        if not np.all(np.isfinite(self.blocks)):
            raise ArithmeticError("non-finite entries in round-trip blocks")

    def derivative_factor(self) -> np.ndarray:
        """``-(kappa_out + kappa_in)`` arranged like one block."""
        kap = np.concatenate([self.kappa, self.kappa])
        return -(kap[:, None] + kap[None, :])

    def derivative(self) -> "RoundTripSpectrum":
        """Spectrum of ``d/dz M``: each entry times ``-(kappa + kappa')``."""
        return RoundTripSpectrum(
            self.blocks * self.derivative_factor()[None],
            self.N, self.M, self.a, self.K, self.z, self.R, self.kappa,
        )


def degeneracy(m: int, M: int) -> int:
    """Multiplicity of block ``m``: 1 for ``m = 0`` and ``m = M/2``, else 2."""
    return 1 if m == 0 or 2 * m == M else 2


# --------------------------------------------------------------------------
# assembly
# --------------------------------------------------------------------------


@njit(cache=True)
def _assemble_finite(k, sw, K, R, z, r_te, r_tm, logpref, ratio, alpha, beta, M, term_tol, lcap, efolds):
    """Weighted kernel samples over half the angle range.

    Returns ``g`` of shape ``(4, N, N, M/2+1)`` with channels TM<-TM, TE<-TE,
    TM<-TE, TE<-TM indexed ``[out, in, d]``, plus an error triple
    ``(status, i_out, i_in)``.
    """
    N = k.size
    H = M // 2
    g = np.zeros((4, N, N, H + 1))
    kappa = np.sqrt(K * K + k * k)
    norm = (2.0 * math.pi / M) / (2.0 * math.pi) ** 2
    for a in range(N):
        for b in range(a, N):
            ka, kb = k[a], k[b]
            kpa, kpb = kappa[a], kappa[b]
            shift = (kpa + kpb) * (z + R)
            q = (ka - kb) ** 2 / (kpa * kpb + ka * kb + K * K)
            for d in range(H + 1):
                dphi = 2.0 * math.pi * d / M
                c = math.cos(dphi)
                sn = math.sin(dphi)
                ch2 = math.cos(0.5 * dphi) ** 2
                expo = R * (math.sqrt(2.0 * (K * K + kpa * kpb + ka * kb * c)) - kpa - kpb) - (kpa + kpb) * z
                if expo < -_NEGLIGIBLE:
                    break  # decreasing in d
                um1 = q + 2.0 * ka * kb * ch2 / (K * K)
                S1, S2, last, status = _amplitudes(
                    um1, K * R, R * K, logpref, ratio, alpha, beta, shift, term_tol, lcap, efolds
                )
                if status != 0:
                    return g, (1, b, a)
                # out = b, in = a
                A, B, C, D = _abcd(ka, kb, c, sn, ch2, K, kpa, kpb, q, um1)
                w = sw[a] * sw[b] * norm * 2.0 * math.pi / (K * kpb)
                g[0, b, a, d] = w * r_tm[a] * (A * S2 + B * S1)
                g[1, b, a, d] = w * r_te[a] * (A * S1 + B * S2)
                g[2, b, a, d] = -w * r_te[a] * (C * S1 + D * S2)
                g[3, b, a, d] = w * r_tm[a] * (C * S2 + D * S1)
                if a != b:
                    # out = a, in = b
                    A, B, C, D = _abcd(kb, ka, c, sn, ch2, K, kpb, kpa, q, um1)
                    w = sw[a] * sw[b] * norm * 2.0 * math.pi / (K * kpa)
                    g[0, a, b, d] = w * r_tm[b] * (A * S2 + B * S1)
                    g[1, a, b, d] = w * r_te[b] * (A * S1 + B * S2)
                    g[2, a, b, d] = -w * r_te[b] * (C * S1 + D * S2)
                    g[3, a, b, d] = w * r_tm[b] * (C * S2 + D * S1)
    return g, (0, 0, 0)


@njit(cache=True)
def _assemble_static(k, sw, R, z, r_te, r_tm, btab, with_te, M, term_tol):
    """Zero-frequency analogue of ``_assemble_finite`` (cross channels vanish)."""
    N = k.size
    H = M // 2
    g = np.zeros((4, N, N, H + 1))
    norm = (2.0 * math.pi / M) / (2.0 * math.pi) ** 2
    for a in range(N):
        for b in range(a, N):
            ka, kb = k[a], k[b]
            shift = (ka + kb) * (z + R)
            root = 2.0 * R * math.sqrt(ka * kb)
            for d in range(H + 1):
                X = root * abs(math.cos(math.pi * d / M))
                if X - shift < -_NEGLIGIBLE:
                    break
                if X == 0.0:
                    continue
                tm = math.exp(_log_cosh_m1(X) - shift)
                te = 0.0
                if with_te:
                    te, status = _te_series(math.log(X), X, btab, shift, term_tol)
                    if status != 0:
                        return g, (1, b, a)
                w = sw[a] * sw[b] * norm * 2.0 * math.pi * R
                g[0, b, a, d] = w / kb * r_tm[a] * tm
                g[1, b, a, d] = w / kb * r_te[a] * te
                if a != b:
                    g[0, a, b, d] = w / ka * r_tm[b] * tm
                    g[1, a, b, d] = w / ka * r_te[b] * te
    return g, (0, 0, 0)


def _required_order(ctx: KernelContext, k: np.ndarray) -> int:
    """Largest multipole order any non-negligible entry can need."""
    K, R, z = ctx.K, ctx.R, ctx.z
    kappa = np.sqrt(K * K + k * k)
    # the diagonal entry decays as exp(-2 kappa z); beyond that everything is negligible
    live = kappa[2.0 * kappa * z < _NEGLIGIBLE + 10.0]
    kap = live.max() if live.size else kappa.min()
    lpeak = R * math.sqrt(max(kap * kap - K * K, 0.0))
    return int(lpeak + math.sqrt(_GAUSS_EFOLDS * math.hypot(lpeak, K * R)) + 200)


def assemble_spectrum(ctx: KernelContext, spec: QuadratureSpec) -> RoundTripSpectrum:
    """Assemble the block-diagonalized round-trip operator.

    Parameters
    ----------
    ctx : KernelContext
        Frequency, geometry and materials. ``K = 0`` selects the
        zero-frequency kernels.
    spec : QuadratureSpec

    Returns
    -------
    RoundTripSpectrum

    Raises
    ------
    ConvergenceError
        If a multipole sum fails to converge; the message carries the radial
        indices of the offending entry.
    """
    k, w, _, _ = build_quadrature(spec)
    sw = np.sqrt(k * w)
    N, M = spec.N, spec.M
    sphere = static_model(ctx.sphere_material) if ctx.K == 0 else ctx.sphere_material
    if isinstance(sphere, Vacuum) or isinstance(static_model(ctx.plate_material), Vacuum):
        g = np.zeros((4, N, N, M // 2 + 1))
    elif ctx.K == 0:
        r_te, r_tm = zero_frequency_fresnel(ctx.plate_material, k)
        r_te, r_tm = np.asarray(r_te, float), np.asarray(r_tm, float)
        with_te = isinstance(sphere, Plasma) and np.any(r_te != 0)
        if with_te:
            KpR = sphere.omega_p / SPEED_OF_LIGHT * ctx.R
            live = k[2.0 * k * ctx.z < _NEGLIGIBLE + 10.0]
            X = 2.0 * ctx.R * (live.max() if live.size else k.min())
            btab = _plasma_b_table(KpR, int(0.5 * X + 5.0 * math.sqrt(X) + 100))
        else:
            btab = np.zeros(2)
        g, err = _assemble_static(k, sw, ctx.R, ctx.z, r_te, r_tm, btab, with_te, M, ctx.term_tol)
        if err[0]:
            raise ConvergenceError(f"zero-frequency TE series failed at (i_out, i_in) = {err[1:]}")
    else:
        r_te, r_tm = fresnel(ctx.plate_material, ctx.K, k)
        r_te, r_tm = np.atleast_1d(r_te), np.atleast_1d(r_tm)
        need = _required_order(ctx, k)
        if ctx.auto_cap and need > ctx.l_cap:
            object.__setattr__(ctx, "l_cap", need)
        need = min(need, ctx.l_cap)
        tabs = ctx.mie_table(need)
        g, err = _assemble_finite(
            k, sw, ctx.K, ctx.R, ctx.z, r_te, r_tm, *tabs, M, ctx.term_tol, min(ctx.l_cap, tabs[0].size - 1),
            _GAUSS_EFOLDS,
        )
        if err[0]:
            raise ConvergenceError(
                f"scattering amplitudes not converged below l_cap={ctx.l_cap} at (i_out, i_in) = {err[1:]}"
            )
    blocks = _to_blocks(g, N, M)
    kappa = np.sqrt(ctx.K**2 + k * k)
    return RoundTripSpectrum(blocks, N, M, spec.a, ctx.K, ctx.z, ctx.R, kappa)


def _to_blocks(g, N, M):
    """Fourier transform the half-range samples into real blocks."""
    H = M // 2
    blocks = np.zeros((H + 1, 2 * N, 2 * N))
    like = scipy.fft.dct(g[:2], type=1, axis=-1) if H >= 1 else g[:2]
    blocks[:, :N, :N] = np.moveaxis(like[0], -1, 0)
    blocks[:, N:, N:] = np.moveaxis(like[1], -1, 0)
    if H >= 2:
        cross = scipy.fft.dst(g[2:, :, :, 1:H], type=1, axis=-1)
        blocks[1:H, :N, N:] = np.moveaxis(cross[0], -1, 0)
        blocks[1:H, N:, :N] = -np.moveaxis(cross[1], -1, 0)
    return blocks


def assemble_dense(ctx: KernelContext, spec: QuadratureSpec) -> np.ndarray:
    """Full ``(2 N M) x (2 N M)`` matrix without block diagonalization.

    Intended for validation only; indices are ``(pol, i, j)`` flattened with
    polarization slowest (TM first) and angle fastest.
    """
    from .kernels import PlaneWaveLabel, roundtrip_kernel, TE, TM

    k, w, phi, v = build_quadrature(spec)
    sw = np.sqrt(k * w)
    N, M = spec.N, spec.M
    pols = (TM, TE)
    out = np.zeros((2, N, M, 2, N, M))
    for po in range(2):
        for pi in range(2):
            for io in range(N):
                for ii in range(N):
                    for jo in range(M):
                        for ji in range(M):
                            lab_in = PlaneWaveLabel(k[ii], phi[ji], pols[pi])
                            lab_out = PlaneWaveLabel(k[io], phi[jo], pols[po])
                            f = roundtrip_kernel(ctx, lab_in, lab_out)
                            out[po, io, jo, pi, ii, ji] = sw[io] * sw[ii] * v[jo] / (2 * np.pi) ** 2 * f
    return out.reshape(2 * N * M, 2 * N * M)


# --------------------------------------------------------------------------
# determinant and trace
# --------------------------------------------------------------------------


def _factor(block):
    n = block.shape[0]
    lu, piv = scipy.linalg.lu_factor(np.eye(n) - block, check_finite=False)
    diag = np.diag(lu)
    swaps = np.count_nonzero(piv != np.arange(n))
    sign = (-1) ** swaps * np.prod(np.sign(diag))
    if sign <= 0 or np.any(diag == 0):
        raise NonContractiveError("det(1 - M) is not positive")
    return (lu, piv), float(np.sum(np.log(np.abs(diag))))


def logdet_one_minus(spectrum: RoundTripSpectrum, m_tol: float | None = None) -> float:
    """``sum_m c_m log det(1 - block_m)`` with ``c_m`` from :func:`degeneracy`.

    With ``m_tol`` set, the sum stops once three consecutive blocks contribute
    less than ``m_tol`` times the running total.
    """
    total = 0.0
    small = 0
    for m in range(spectrum.blocks.shape[0]):
        _, ld = _factor(spectrum.blocks[m])
        contrib = degeneracy(m, spectrum.M) * ld
        total += contrib
        if m_tol is not None:
            small = small + 1 if abs(contrib) < m_tol * abs(total) else 0
            if small >= 3:
                break
    return total


def trace_solve(spectrum: RoundTripSpectrum, derivative_spectrum: RoundTripSpectrum) -> float:
    """``sum_m c_m tr[(1 - block_m)^-1 dblock_m]`` by LU factorization and solve."""
    if (spectrum.N, spectrum.M) != (derivative_spectrum.N, derivative_spectrum.M):
        raise ValueError("spectra were built with different quadratures")
    total = 0.0
    for m in range(spectrum.blocks.shape[0]):
        lu, _ = _factor(spectrum.blocks[m])
        x = scipy.linalg.lu_solve(lu, derivative_spectrum.blocks[m], check_finite=False)
        total += degeneracy(m, spectrum.M) * float(np.trace(x))
    return total


def logdet_and_trace(spectrum: RoundTripSpectrum, m_tol: float | None = None):
    """Both functionals from a single factorization per block.

    The derivative blocks are formed on the fly from the analytic factor
    ``-(kappa + kappa')``. With ``m_tol`` the sum over ``m`` is truncated once
    three consecutive blocks contribute below ``m_tol`` of both running totals.

    Returns
    -------
    logdet, trace : float
    m_used : int
        Number of blocks included.
    """
    fac = spectrum.derivative_factor()
    ld_total = 0.0
    tr_total = 0.0
    small = 0
    m_used = 0
    for m in range(spectrum.blocks.shape[0]):
        blk = spectrum.blocks[m]
        lu, ld = _factor(blk)
        x = scipy.linalg.lu_solve(lu, blk * fac, check_finite=False)
        c = degeneracy(m, spectrum.M)
        ld_total += c * ld
        tr = c * float(np.trace(x))
        tr_total += tr
        m_used = m + 1
        if m_tol is not None:
            tiny = abs(c * ld) < m_tol * abs(ld_total) and abs(tr) < m_tol * abs(tr_total)
            small = small + 1 if tiny else 0
            if small >= 3:
                break
    return ld_total, tr_total, m_used
