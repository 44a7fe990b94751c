"""Plane-wave matrix elements of the sphere-plate round-trip operator.

The round-trip kernel couples an incoming plane wave ``(k, phi, pol)`` to an
outgoing one ``(k', phi', pol')`` through reflection at the plate (Fresnel
coefficient of the incoming wave), reflection at the sphere (Mie scattering
rotated into the TE/TM basis of the plate) and the translation factor
``exp(-(kappa + kappa') (z + R))``.

On the imaginary frequency axis the scattering angle satisfies
``u = -cos(Theta) >= 1`` and both the Mie coefficients and the Legendre
functions span hundreds of orders of magnitude. Every sum here is therefore
carried out with exponentially scaled quantities: the Mie prefactor
``(pi/2) I_{l+1/2}(x)/K_{l+1/2}(x)`` is kept as a logarithm, the Legendre
functions are scaled by ``exp(-l acosh u)`` and the translation factor is
folded into the same exponent, so only the final kernel value is ever formed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from numba import njit
from scipy.constants import c as SPEED_OF_LIGHT

from .materials import (
    Drude,
    MaterialModel,
    Plasma,
    Vacuum,
    permittivity,
    static_model,
)

TE = "TE"
TM = "TM"
POLARIZATIONS = (TE, TM)

# exp(-37) ~ 1e-16: terms below this relative size cannot change a double
_GAUSS_EFOLDS = 37.0
# entries whose largest term is below exp(-_NEGLIGIBLE) are set to zero
_NEGLIGIBLE = 60.0


class ConvergenceError(ArithmeticError):
    """A series or recurrence did not converge within its cap."""


@dataclass(frozen=True)
class PlaneWaveLabel:
    """Plane wave with transverse wave number ``k`` (1/m), angle ``phi`` and polarization."""

    k: float
    phi: float
    polarization: str

    def __post_init__(self):
        if not self.k >= 0:
            raise ValueError("k must be non-negative")
        if self.polarization not in POLARIZATIONS:
            raise ValueError("polarization must be 'TE' or 'TM'")
        object.__setattr__(self, "phi", self.phi % (2.0 * math.pi))


def default_l_cap(x: float) -> int:
    return max(10_000, 20 * math.ceil(x))


@dataclass(frozen=True)
class KernelContext:
    """Frequency, geometry and materials shared by all kernel evaluations.

    Parameters
    ----------
    K : float
        Imaginary vacuum wave number ``xi/c`` in 1/m.
    R, z : float
        Sphere radius and surface separation in m.
    sphere_material, plate_material : MaterialModel
    l_cap : int, optional
        Largest multipole order the amplitude sums may reach. When left at 0
        it defaults to ``max(10^4, 20 ceil(K R))`` and may be raised by the
        assembler to the order the quadrature nodes require; an explicit
        value is a hard limit.
    term_tol : float
        Relative size of the last retained multipole term.
    """

    K: float
    R: float
    z: float
    sphere_material: MaterialModel
    plate_material: MaterialModel
    l_cap: int = 0
    term_tol: float = 1e-12
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)
    auto_cap: bool = field(default=True, init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.K >= 0:
            raise ValueError("K must be non-negative")
        if not (self.R > 0 and self.z > 0):
            raise ValueError("R and z must be positive")
        object.__setattr__(self, "auto_cap", self.l_cap == 0)
        if self.l_cap == 0:
            object.__setattr__(self, "l_cap", default_l_cap(self.K * self.R))
        if self.l_cap < 1:
            raise ValueError("l_cap must be positive")

    @property
    def x(self) -> float:
        """Size parameter ``K R``."""
        return self.K * self.R

    @cached_property
    def eps_sphere(self) -> float:
        return permittivity(self.sphere_material, SPEED_OF_LIGHT * self.K)

    @cached_property
    def eps_plate(self) -> float:
        return permittivity(self.plate_material, SPEED_OF_LIGHT * self.K)

    def mie_table(self, lmax: int):
        """Scaled Mie tables ``(logpref, ratio, alpha, beta)`` for orders ``0..lmax``.

        Tables are cached per context and grown on demand.
        """
        if self.K == 0:
            raise ValueError("Mie tables are not defined at zero frequency")
        lmax = int(min(lmax, self.l_cap))
        tab = self._cache.get("mie")
        if tab is None or tab[0].size <= lmax:
            n = math.sqrt(self.eps_sphere)
            tab = _mie_tables(self.x, n, max(lmax, 16))
            self._cache["mie"] = tab
        return tab


# --------------------------------------------------------------------------
# Fresnel coefficients
# --------------------------------------------------------------------------


def fresnel(material: MaterialModel, K: float, k):
    """Fresnel coefficients ``(r_TE, r_TM)`` of a half-space at ``xi = c K``.

    ``k`` may be a scalar or an array; the result has the same shape.
    """
    if not K > 0:
        raise ValueError("fresnel requires K > 0; use zero_frequency_fresnel")
    k = np.asarray(k, dtype=float)
    if isinstance(material, Vacuum):
        zero = np.zeros_like(k)
        return _unwrap(zero), _unwrap(zero)
    eps = permittivity(material, SPEED_OF_LIGHT * K)
    kappa = np.sqrt(K * K + k * k)
    root = np.sqrt((eps - 1.0) * K * K + kappa * kappa)
    # numerators rationalized: no cancellation when (eps - 1) K^2 << kappa^2
    r_te = -(eps - 1.0) * K * K / (kappa + root) ** 2
    r_tm = (eps - 1.0) * ((eps + 1.0) * kappa * kappa - K * K) / (eps * kappa + root) ** 2
    return _unwrap(r_te), _unwrap(r_tm)


def zero_frequency_fresnel(material: MaterialModel, k):
    """Fresnel coefficients ``(r_TE, r_TM)`` in the limit ``xi -> 0``."""
    k = np.asarray(k, dtype=float)
    model = static_model(material)
    if isinstance(model, Vacuum):
        return _unwrap(np.zeros_like(k)), _unwrap(np.zeros_like(k))
    one = np.ones_like(k)
    if isinstance(model, Drude):
        return _unwrap(np.zeros_like(k)), _unwrap(one)
    if isinstance(model, Plasma):
        kp = model.omega_p / SPEED_OF_LIGHT
        root = np.sqrt(kp * kp + k * k)
        # (k - root)/(k + root) written without cancellation
        r_te = -(kp * kp) / (k + root) ** 2
        return _unwrap(r_te), _unwrap(one)
    raise TypeError(f"unknown material model {material!r}")


def _unwrap(a):
    return float(a) if np.ndim(a) == 0 else a


# --------------------------------------------------------------------------
# Modified Bessel function ratios and Mie coefficients
# --------------------------------------------------------------------------


@njit(cache=True)
def _log_sinh(y):
    if y > 20.0:
        return y - math.log(2.0) + math.log1p(-math.exp(-2.0 * y))
    return math.log(math.sinh(y))


@njit(cache=True)
def _i_ratio_cf(nu, y):
    """``I_{nu+1}(y) / I_nu(y)`` by the modified Lentz continued fraction."""
    tiny = 1e-300
    f = tiny
    C = f
    D = 0.0
    j = 1
    while True:
        b = 2.0 * (nu + j) / y
        D = b + D
        if D == 0.0:
            D = tiny
        C = b + 1.0 / C
        if C == 0.0:
            C = tiny
        D = 1.0 / D
        delta = C * D
        f *= delta
        if abs(delta - 1.0) < 1e-16:
            break
        j += 1
        if j > 100_000_000:
            return -1.0
    return f


@njit(cache=True)
def _i_ratios(y, L):
    """``h[l] = I_{l+3/2}(y) / I_{l+1/2}(y)`` for ``l = 0..L`` (backward recurrence)."""
    h = np.empty(L + 1)
    h[L] = _i_ratio_cf(L + 0.5, y)
    for l in range(L, 0, -1):
        h[l - 1] = y / (2.0 * l + 1.0 + y * h[l])
    return h


@njit(cache=True)
def _mie_tables(x, n, L):
    """Scaled Mie coefficients for orders ``l = 0..L`` (entry 0 unused).

    Returns ``logpref``, ``ratio``, ``alpha`` and ``beta`` such that
    ``(-1)^l a_l = exp(logpref[l]) alpha[l]`` and
    ``(-1)^l b_l = exp(logpref[l]) beta[l]``, where
    ``logpref[l] = log(pi/2) + log I_{l+1/2}(x) - log K_{l+1/2}(x)`` and
    ``ratio[l] = exp(logpref[l] - logpref[l-1])``.
    """
    hx = _i_ratios(x, L)
    hnx = _i_ratios(n * x, L)
    n2 = n * n
    logpref = np.empty(L + 1)
    ratio = np.empty(L + 1)
    alpha = np.zeros(L + 1)
    beta = np.zeros(L + 1)
    # order 1/2: I = sqrt(2/(pi x)) sinh x, K = sqrt(pi/(2x)) exp(-x)
    log_i = 0.5 * math.log(2.0 / (math.pi * x)) + _log_sinh(x)
    log_k = 0.5 * math.log(math.pi / (2.0 * x)) - x
    logpref[0] = math.log(0.5 * math.pi) + log_i - log_k
    ratio[0] = 1.0
    rho = 1.0  # K_{l+1/2} / K_{l-1/2}
    # Kahan-compensated running logs: L can reach 10^5
    ci = 0.0
    ck = 0.0
    for l in range(1, L + 1):
        rho = 1.0 + 1.0 / x if l == 1 else 1.0 / rho + (2.0 * l - 1.0) / x
        yv = math.log(hx[l - 1]) - ci
        t = log_i + yv
        ci = (t - log_i) - yv
        log_i = t
        yv = math.log(rho) - ck
        t = log_k + yv
        ck = (t - log_k) - yv
        log_k = t
        logpref[l] = math.log(0.5 * math.pi) + log_i - log_k
        ratio[l] = math.exp(logpref[l] - logpref[l - 1])
        tx = x * hx[l]
        tnx = n * x * hnx[l]
        a_num = (n2 - 1.0) * (l + 1.0) + n2 * tx - tnx
        a_den = n2 * (x / rho + l) + l + 1.0 + tnx
        b_num = tnx - tx
        b_den = x / rho + 2.0 * l + 1.0 + tnx
        alpha[l] = a_num / a_den
        beta[l] = -b_num / b_den
    return logpref, ratio, alpha, beta


def mie_coefficients(n: float, x: float, l: int):
    """Mie coefficients ``(a_l, b_l)`` of a sphere at imaginary frequency.

    Parameters
    ----------
    n : float
        Refractive index ``sqrt(eps(i xi))`` of the sphere, ``n > 1``.
    x : float
        Size parameter ``K R``.
    l : int
        Multipole order, ``l >= 1``.

    Returns
    -------
    a_l, b_l : float
        Electric and magnetic coefficients including the ``(-1)^l`` sign.
        Values below the smallest double underflow to zero.
    """
    if not (x > 0 and n > 1 and l >= 1):
        raise ValueError("requires x > 0, n > 1 and l >= 1")
    logpref, _, alpha, beta = _mie_tables(float(x), float(n), int(l) + 1)
    sign = -1.0 if l % 2 else 1.0
    scale = math.exp(logpref[l]) if logpref[l] < 709.0 else math.inf
    if not math.isfinite(scale):
        raise ConvergenceError("Mie coefficient overflows double precision")
    return sign * scale * alpha[l], sign * scale * beta[l]


# --------------------------------------------------------------------------
# Scattering amplitudes
# --------------------------------------------------------------------------


@njit(cache=True)
def _amplitudes(um1, x, R_K, logpref, ratio, alpha, beta, shift, term_tol, lcap, efolds):
    """Scaled amplitudes ``exp(-shift) (S1, S2)`` at ``u = -cos(Theta) = 1 + um1``.

    ``R_K`` is ``R K``, used only for the estimate of the dominant order.
    Orders more than ``sqrt(efolds sqrt(l*^2 + x^2))`` below the dominant
    order ``l*`` are skipped; their terms are smaller by ``exp(-efolds)``.
    Returns ``(S1, S2, l_last, status)``; status 0 on convergence, 1 if the
    tables or ``lcap`` were exhausted first.
    """
    u = 1.0 + um1
    sq = math.sqrt(um1 * (2.0 + um1))
    chi = math.log1p(um1 + sq)
    s = 1.0 / (u + sq)
    us = u * s
    s2 = s * s
    echi = u + sq

    lpeak = R_K * math.sqrt(0.5 * um1)
    width = math.sqrt(efolds * math.sqrt(lpeak * lpeak + x * x)) + 10.0
    lstart = max(1, int(lpeak - width))
    L = min(logpref.size - 1, lcap)

    S1 = 0.0
    S2 = 0.0
    p_prev = 1.0  # scaled P_{l-1}
    p = us  # scaled P_l
    d_prev = 0.0
    d = s
    e = 0.0
    exact = True
    small = 0
    for l in range(1, L + 1):
        if l >= lstart:
            if exact:
                expo = logpref[l] + l * chi - shift
                if expo > -600.0:
                    e = math.exp(expo)
                    exact = False
                else:
                    e = 0.0
            else:
                e *= ratio[l] * echi
                if l % 64 == 0:
                    e = math.exp(logpref[l] + l * chi - shift)
            cl = (2.0 * l + 1.0) / (l * (l + 1.0))
            tau = l * (l + 1.0) * p - u * d
            t1 = cl * e * (-alpha[l] * d + beta[l] * tau)
            t2 = cl * e * (alpha[l] * tau - beta[l] * d)
            S1 += t1
            S2 += t2
            if l > lpeak and not exact:
                ref = max(abs(S1), abs(S2))
                if abs(t1) <= term_tol * ref and abs(t2) <= term_tol * ref:
                    small += 1
                    if small >= 3:
                        return S1, S2, l, 0
                else:
                    small = 0
            elif l > lpeak and exact and l > lpeak + width:
                # everything still below exp(-600): numerically zero
                return S1, S2, l, 0
        # advance scaled Legendre functions to order l + 1
        p_next = ((2.0 * l + 1.0) * us * p - l * s2 * p_prev) / (l + 1.0)
        d_next = s2 * d_prev + (2.0 * l + 1.0) * s * p
        p_prev = p
        p = p_next
        d_prev = d
        d = d_next
    return S1, S2, L, 1


def scattering_amplitudes(ctx: KernelContext, cos_theta: float):
    """Plane-wave scattering amplitudes ``(S1, S2)`` of the sphere.

    Parameters
    ----------
    ctx : KernelContext
        Must have ``K > 0``.
    cos_theta : float
        Cosine of the scattering angle, ``cos_theta <= -1`` on the imaginary axis.

    Returns
    -------
    S1, S2 : float

    Raises
    ------
    ConvergenceError
        If the sum has not converged when ``ctx.l_cap`` is reached.
    """
    if not ctx.K > 0:
        raise ValueError("scattering amplitudes require K > 0")
    if cos_theta > -1.0:
        raise ValueError("cos(Theta) must be <= -1 on the imaginary axis")
    return _amplitudes_um1(ctx, -cos_theta - 1.0, 0.0)


def _amplitudes_um1(ctx, um1, shift):
    x = ctx.x
    lpeak = ctx.R * ctx.K * math.sqrt(0.5 * um1)
    need = int(lpeak + math.sqrt(_GAUSS_EFOLDS * math.hypot(lpeak, x)) + 200)
    need = min(max(need, 64), ctx.l_cap)
    while True:
        logpref, ratio, alpha, beta = ctx.mie_table(need)
        s1, s2, last, status = _amplitudes(
            um1, x, ctx.R * ctx.K, logpref, ratio, alpha, beta, shift, ctx.term_tol, ctx.l_cap, _GAUSS_EFOLDS
        )
        if status == 0:
            return s1, s2
        if need >= ctx.l_cap:
            raise ConvergenceError(f"scattering amplitudes not converged at l_cap={ctx.l_cap}")
        need = min(2 * need, ctx.l_cap)


# --------------------------------------------------------------------------
# Polarization rotation and full kernel
# --------------------------------------------------------------------------


@njit(cache=True)
def _abcd(k, kp, c, sn, ch2, K, kappa, kappap, q, um1):
    """Rotation coefficients from the scattering-plane basis to TE/TM.

    ``q = (k - k')^2 / (kappa kappa' + k k' + K^2)`` and ``um1 = u - 1`` with
    ``u = -cos(Theta)``; the common denominator
    ``K^4 - (k k' cos + kappa kappa')^2`` equals ``-K^4 um1 (2 + um1)``, and
    every numerator is written so that no cancellation occurs near the
    forward (``k = k'``, ``dphi = 0``) or backward (``u = 1``) directions.
    """
    if um1 == 0.0:
        # u = 1: S1 = -S2, only A - B = -1 and C - D = 0 matter
        return 0.0, 1.0, 0.0, 0.0
    u = 1.0 + um1
    den = um1 * (2.0 + um1)
    A = 1.0 + (c - 1.0) * (um1 + u * q) / den
    B = (1.0 - c) * (um1 - q) / den
    K3 = K * K * K
    kk = K * K * (k - kp) * (k + kp) / (k * kappap + kp * kappa)
    nc = k * (2.0 * kp * kappa * ch2 + kk)
    nd = kp * (2.0 * k * kappap * ch2 - kk)
    C = -sn * nc / (K3 * den)
    D = sn * nd / (K3 * den)
    return A, B, C, D


def polarization_rotation(k: float, kp: float, dphi: float, K: float):
    """Coefficients ``(A, B, C, D)`` rotating the scattering-plane basis into TE/TM.

    ``k`` is the incoming and ``kp`` the outgoing transverse wave number and
    ``dphi = phi' - phi``. The coefficients are built from the same
    ``kappa kappa' + k k' cos(dphi)`` combination that fixes the scattering
    angle, so they are continuous through the forward direction, where they
    reduce to ``(1, 0, 0, 0)``. ``K = 0`` returns the same limit. At the
    single point ``u = 1`` (``k = k'``, ``dphi = pi``) the scattering plane is
    undefined; the limit ``(0, 1, 0, 0)`` along ``dphi -> pi`` is returned,
    which fixes the only combinations entering the kernel there.
    """
    if K == 0:
        return 1.0, 0.0, 0.0, 0.0
    kappa = math.sqrt(K * K + k * k)
    kappap = math.sqrt(K * K + kp * kp)
    ch2 = math.cos(0.5 * dphi) ** 2
    q = (k - kp) ** 2 / (kappa * kappap + k * kp + K * K)
    um1 = q + 2.0 * k * kp * ch2 / (K * K)
    return _abcd(k, kp, math.cos(dphi), math.sin(dphi), ch2, K, kappa, kappap, q, um1)


def roundtrip_kernel(ctx: KernelContext, incoming: PlaneWaveLabel, outgoing: PlaneWaveLabel) -> float:
    """Kernel ``f_M(outgoing; incoming)`` of the round-trip operator in m^2.

    Combines the plate Fresnel coefficient of the incoming wave, the
    translation factor and the sphere reflection kernel.
    """
    if not ctx.K > 0:
        raise ValueError("roundtrip_kernel requires K > 0; use zero_frequency_kernel")
    k, kp, K = incoming.k, outgoing.k, ctx.K
    dphi = outgoing.phi - incoming.phi
    kappa = math.sqrt(K * K + k * k)
    kappap = math.sqrt(K * K + kp * kp)
    r_te, r_tm = fresnel(ctx.plate_material, K, k)
    r_in = r_te if incoming.polarization == TE else r_tm
    if r_in == 0.0 or isinstance(ctx.sphere_material, Vacuum):
        return 0.0
    ch2 = math.cos(0.5 * dphi) ** 2
    q = (k - kp) ** 2 / (kappa * kappap + k * kp + K * K)
    um1 = q + 2.0 * k * kp * ch2 / (K * K)
    shift = (kappa + kappap) * (ctx.z + ctx.R)
    S1, S2 = _amplitudes_um1(ctx, um1, shift)
    A, B, C, D = _abcd(k, kp, math.cos(dphi), math.sin(dphi), ch2, K, kappa, kappap, q, um1)
    pref = 2.0 * math.pi / (K * kappap) * r_in
    pair = (outgoing.polarization, incoming.polarization)
    if pair == (TM, TM):
        return pref * (A * S2 + B * S1)
    if pair == (TE, TE):
        return pref * (A * S1 + B * S2)
    if pair == (TM, TE):
        return -pref * (C * S1 + D * S2)
    return pref * (C * S2 + D * S1)


# --------------------------------------------------------------------------
# Zero frequency
# --------------------------------------------------------------------------


@njit(cache=True)
def _log_cosh_m1(X):
    """``log(cosh X - 1)`` for ``X > 0``."""
    return math.log(2.0) + 2.0 * _log_sinh(0.5 * X)


@njit(cache=True)
def _plasma_b_table(KpR, L):
    """Coefficients ``B_l`` of the plasma sphere for ``l = 0..L`` (entry 0 unused)."""
    h = _i_ratios(KpR, L)
    out = np.zeros(L + 1)
    for l in range(1, L + 1):
        out[l] = -(l / (l + 1.0)) * (1.0 - (2.0 * l + 1.0) / KpR * h[l - 1])
    return out


@njit(cache=True)
def _te_series(logX, X, btab, shift, term_tol):
    """``exp(-shift) sum_l B_l X^(2l) / (2l)!``; returns ``(value, status)``."""
    if X == 0.0:
        return 0.0, 0
    lpeak = 0.5 * X
    width = 5.0 * math.sqrt(X) + 10.0
    lstart = max(1, int(lpeak - width))
    L = btab.size - 1
    logt = 2.0 * lstart * logX - math.lgamma(2.0 * lstart + 1.0) - shift
    total = 0.0
    small = 0
    for l in range(lstart, L + 1):
        t = btab[l] * math.exp(logt) if logt > -745.0 else 0.0
        total += t
        if l > lpeak:
            if abs(t) <= term_tol * abs(total):
                small += 1
                if small >= 3:
                    return total, 0
            else:
                small = 0
        logt += 2.0 * logX - math.log((2.0 * l + 1.0) * (2.0 * l + 2.0))
    return total, 1


def zero_frequency_kernel(
    model: MaterialModel,
    k: float,
    kp: float,
    dphi: float,
    R: float,
    polarization_pair=(TM, TM),
    term_tol: float = 1e-12,
) -> float:
    """Sphere reflection kernel at ``xi = 0`` without translation or plate factors.

    Parameters
    ----------
    model : MaterialModel
        Sphere material; tables delegate to their extrapolation.
    k, kp : float
        Incoming and outgoing transverse wave numbers (1/m).
    dphi : float
        Angle between the two wave vectors.
    R : float
        Sphere radius (m).
    polarization_pair : tuple
        ``(outgoing, incoming)`` polarizations.

    Returns
    -------
    float
        Kernel in m^2. The caller multiplies by ``exp(-(k + k')(z + R))`` and
        by the plate coefficient.
    """
    out_pol, in_pol = polarization_pair
    if out_pol != in_pol:
        return 0.0
    m = static_model(model)
    if isinstance(m, Vacuum):
        return 0.0
    X = 2.0 * R * math.sqrt(k * kp) * abs(math.cos(0.5 * dphi))
    if X == 0.0:
        return 0.0
    pref = 2.0 * math.pi * R / kp
    if out_pol == TM:
        return pref * math.exp(_log_cosh_m1(X))
    if isinstance(m, Drude):
        return 0.0
    KpR = m.omega_p / SPEED_OF_LIGHT * R
    L = int(0.5 * X + 5.0 * math.sqrt(X) + 100)
    btab = _plasma_b_table(KpR, L)
    # factor exp(X) pulled out keeps terms finite for large X
    val, status = _te_series(math.log(X), X, btab, X, term_tol)
    if status:
        raise ConvergenceError("zero-frequency TE series did not converge")
    return pref * val * math.exp(X)


def zero_frequency_tm_series(k: float, kp: float, dphi: float, R: float, term_tol: float = 1e-16) -> float:
    """TM kernel at ``xi = 0`` summed multipole by multipole.

    Every TM multipole of a metallic sphere reflects fully at zero frequency,
    so the sum is ``(2 pi R/k') sum_l X^(2l)/(2l)!``. It must reproduce the
    closed form ``(2 pi R/k') (cosh X - 1)`` used by
    :func:`zero_frequency_kernel`.
    """
    X = 2.0 * R * math.sqrt(k * kp) * abs(math.cos(0.5 * dphi))
    if X == 0.0:
        return 0.0
    L = int(0.5 * X + 5.0 * math.sqrt(X) + 100)
    ones = np.ones(L + 1)
    val, status = _te_series(math.log(X), X, ones, X, term_tol)
    if status:
        raise ConvergenceError("zero-frequency TM series did not converge")
    return 2.0 * math.pi * R / kp * val * math.exp(X)
