"""Acceptance criteria, one test each.

Every test prints a single ``ACCEPTANCE <n> PASS|FAIL ...`` line with the
measured quantities before asserting, so ``pytest -s`` gives a compact report.
Tolerances are fixed here and are not tuned to the results.
"""

import math

import mpmath
import numpy as np
import pytest
from scipy.constants import c as SPEED_OF_LIGHT
from scipy.constants import epsilon_0

from sphereplate.edgefit import fit_harmonics, model_coefficients, synthesize_harmonics
from sphereplate.engine import (
    DESpec,
    Geometry,
    Materials,
    casimir_force,
    casimir_free_energy,
    de_force,
    matsubara_term,
    pfa_force,
    radial_scale,
    theta_from_forces,
)
from sphereplate.experiment import OscillatorParams, electrostatic_force, min_detectable_force
from sphereplate.kernels import TM, zero_frequency_kernel, zero_frequency_tm_series
from sphereplate.materials import Drude, Plasma, ThermalSpec, matsubara_frequency
from sphereplate.spectral import QuadratureSpec
from sphereplate.stats import (
    ErrorBudget,
    RunSeries,
    combine_errors,
    median_estimate,
    normal_estimate,
    order_indices,
)

from conftest import ACCEPTANCE_LINES
from test_stats import SAMPLE_Z5, SAMPLE_Z21

R = 149.7e-6
T = 295.25
OMEGA_P, GAMMA = 1.37e16, 5.3e13
MODELS = {"drude": Drude(OMEGA_P, GAMMA), "plasma": Plasma(OMEGA_P)}
Z_DE = (0.5e-6, 1e-6, 2e-6, 4e-6)
fN = 1e-15


def report(n, ok, text):
    line = f"ACCEPTANCE {n} {'PASS' if ok else 'FAIL'} {text}"
    ACCEPTANCE_LINES.append(line)
    print("\n" + line)
    return ok


# --------------------------------------------------------------------------
# shared engine results at the experimental radius
# --------------------------------------------------------------------------


class _Point:
    """Exact, PFA and derivative-expansion results at one (z, model)."""

    def __init__(self, z, kind):
        mats, geom, th = Materials.same(MODELS[kind]), Geometry(R, z), ThermalSpec(T)
        res = casimir_force(geom, mats, th)
        self.z = z
        self.exact = res.force
        self.classical = res.per_l[0][2]
        self.pfa = pfa_force(geom, mats, th)
        self.pfa_nonzero = pfa_force(geom, mats, th, "l>0")
        # theta derived at 2R predicts the force at R
        self.de = de_force(geom, mats, th, DESpec(derive=True, derive_radius_factor=2.0), classical=self.classical)
        self.theta_R = theta_from_forces(self.exact - self.classical, self.pfa_nonzero, R, z)
        self.theta_2R = theta_from_forces(self.de - self.classical, self.pfa_nonzero, R, z)


@pytest.fixture(scope="module")
def de_points():
    return {(z, kind): _Point(z, kind) for z in Z_DE for kind in MODELS}


# --------------------------------------------------------------------------
# 1. derivative expansion vs scattering formula
# --------------------------------------------------------------------------


@pytest.mark.slow
def test_acceptance_1_derivative_expansion(de_points):
    eta = {key: abs(p.exact - p.de) / abs(p.exact) for key, p in de_points.items()}
    worst = max(eta.values())
    ok = report(
        1, worst < 1e-5,
        "eta<1e-5: " + " ".join(f"{k}@{z * 1e6:g}um={e:.2e}" for (z, k), e in sorted(eta.items())),
    )
    assert ok


# --------------------------------------------------------------------------
# 2. energy-force consistency
# --------------------------------------------------------------------------


@pytest.mark.slow
def test_acceptance_2_energy_force_consistency():
    R2 = 20e-6
    mats = Materials.same(MODELS["drude"])
    th = ThermalSpec(T, rel_tol=1e-13)
    errs = []
    for z0 in (1e-6, 2e-6, 4e-6):
        N = QuadratureSpec.auto(R2, z0).N

        # quadrature frozen at z0 so the discretized energy is one smooth function of z
        def quad(K, geom, z0=z0, N=N):
            return QuadratureSpec(N, 2 * N, radial_scale(z0, K))

        def energy(z):
            return casimir_free_energy(Geometry(R2, z), mats, th, quad, m_tol=None, term_tol=1e-15)

        force = casimir_force(Geometry(R2, z0), mats, th, quad, m_tol=None, term_tol=1e-15).force
        # stencil error ~ (h/z)^4 E^(5) z^4 / 30; h = z/200 keeps it near 1e-8
        h = z0 / 200
        fd = -(energy(z0 - 2 * h) - 8 * energy(z0 - h) + 8 * energy(z0 + h) - energy(z0 + 2 * h)) / (12 * h)
        errs.append((z0, abs(fd / force - 1)))
    ok = report(2, max(e for _, e in errs) < 1e-6,
                "rel<1e-6: " + " ".join(f"z={z * 1e6:g}um:{e:.1e}" for z, e in errs))
    assert ok


# --------------------------------------------------------------------------
# 3. zero-frequency TM identity
# --------------------------------------------------------------------------


def test_acceptance_3_zero_frequency_identity():
    rng = np.random.default_rng(2024)
    Rs = 10e-6
    worst, worst_mp = 0.0, 0.0
    for _ in range(100):
        k, kp = 10 ** rng.uniform(-3, 2, 2) / Rs
        d = rng.uniform(0, 2 * math.pi)
        closed = zero_frequency_kernel(MODELS["drude"], k, kp, d, Rs, (TM, TM))
        series = zero_frequency_tm_series(k, kp, d, Rs)
        worst = max(worst, abs(closed / series - 1))
        # independent multipole sum in 30-digit arithmetic
        with mpmath.workdps(30):
            X = 2 * mpmath.mpf(Rs) * mpmath.sqrt(mpmath.mpf(k) * kp) * abs(mpmath.cos(mpmath.mpf(d) / 2))
            s = mpmath.nsum(lambda l: X ** (2 * l) / mpmath.factorial(2 * l), [1, mpmath.inf])
            ref = float(2 * mpmath.pi * Rs / kp * s)
        worst_mp = max(worst_mp, abs(series / ref - 1))
    ok = report(3, worst < 1e-12 and worst_mp < 1e-12,
                f"100 samples, closed vs series {worst:.1e}, series vs 30-digit sum {worst_mp:.1e} (tol 1e-12)")
    assert ok


# --------------------------------------------------------------------------
# 4. quadrature convergence and scaling
# --------------------------------------------------------------------------


def _doubled(K, geom):
    auto = QuadratureSpec.auto(geom.R, geom.z)
    return QuadratureSpec(2 * auto.N, 4 * auto.N, radial_scale(geom.z, K))


def _min_order(geom, mats, K, target):
    """Smallest N (M = 2N) whose trace is within ``target`` of a converged reference."""
    a = radial_scale(geom.z, K)

    def trace(N):
        return matsubara_term(geom, mats, K, QuadratureSpec(N, 2 * N, a), m_tol=None, term_tol=1e-15)[1]

    ref = trace(QuadratureSpec.auto(geom.R, geom.z).N + 60)

    def good(N):
        # the next rung must also pass, which rules out accidental zero crossings
        return all(abs(trace(n) / ref - 1) < target for n in (N, N + 4))

    lo, hi = 8, QuadratureSpec.auto(geom.R, geom.z).N
    if not good(hi):
        return None
    while hi - lo > 2:
        mid = (lo + hi) // 2
        if good(mid):
            hi = mid
        else:
            lo = mid
    return hi


@pytest.mark.slow
def test_acceptance_4_quadrature(de_points):
    mats, geom, th = Materials.same(MODELS["drude"]), Geometry(R, 1e-6), ThermalSpec(T)
    base = de_points[1e-6, "drude"].exact
    doubled = casimir_force(geom, mats, th, _doubled).force
    change = abs(doubled / base - 1)

    ratios = (30.0, 75.0, 187.5, 375.0, 750.0)
    grid = [Geometry(R, R / x) for x in ratios]
    # dimensionless frequency K z held at its value for l = 1 and z = 1 um, so
    # that only R/z changes along the grid
    Kz = matsubara_frequency(th, 1) / SPEED_OF_LIGHT * 1e-6
    orders = [_min_order(g, mats, Kz / g.z, 1e-6) for g in grid]
    scaled = [n / math.sqrt(x) for n, x in zip(orders, ratios)] if None not in orders else []
    # growth no faster than sqrt(R/z): N_min / sqrt(R/z) may not increase along the grid
    scaling_ok = bool(scaled) and max(scaled[1:]) <= scaled[0] * 1.05
    slope = np.polyfit(np.log(ratios), np.log(orders), 1)[0] if scaled else float("nan")
    # informational: fixed Matsubara index, where K z also changes along the grid
    K1 = matsubara_frequency(th, 1) / SPEED_OF_LIGHT
    fixed_l = [_min_order(g, mats, K1, 1e-6) for g in grid]
    ok = report(
        4, change < 1e-8 and scaling_ok,
        f"doubling change {change:.1e} (tol 1e-8); N_min(1e-6) at R/z={list(ratios)}, Kz={Kz:.3f}: {orders}, "
        f"N/sqrt(R/z)={[round(s, 2) for s in scaled]} (no rise >5%), log-log slope {slope:.2f}; "
        f"at fixed l=1 (K z from {K1 * grid[0].z:.2f} to {K1 * grid[-1].z:.2f}): {fixed_l}",
    )
    assert ok


# --------------------------------------------------------------------------
# 5. PFA limit
# --------------------------------------------------------------------------

# 1 % accuracy suffices at 0.2 um; half the default order keeps the cost down
def _pfa_check_quad(K, geom):
    N = math.ceil(4.0 * math.sqrt(geom.R / geom.z)) + 20
    return QuadratureSpec(N, 2 * N, radial_scale(geom.z, K))


@pytest.mark.slow
def test_acceptance_5_pfa_limit(de_points):
    th = ThermalSpec(T)
    lines, ok = [], True
    for kind, model in MODELS.items():
        mats = Materials.same(model)
        g = Geometry(R, 0.2e-6)
        dev = {0.2e-6: abs(casimir_force(g, mats, th, _pfa_check_quad).force / pfa_force(g, mats, th) - 1)}
        for z in (0.5e-6, 1e-6, 2e-6):
            p = de_points[z, kind]
            dev[z] = abs(p.exact / p.pfa - 1)
        zs = sorted(dev)
        monotone = all(dev[a] < dev[b] for a, b in zip(zs, zs[1:]))
        thetas = [(de_points[z, kind].theta_R, de_points[z, kind].theta_2R) for z in Z_DE]
        positive = all(a > 0 and b > 0 for a, b in thetas)
        spread = max(abs(b / a - 1) for a, b in thetas)
        ok &= dev[0.2e-6] < 0.01 and monotone and positive and spread < 0.02
        lines.append(
            f"{kind}: |F/F_PFA-1|=" + ",".join(f"{dev[z]:.2e}" for z in zs)
            + f" monotone={monotone} theta(R)=" + ",".join(f"{a:.4f}" for a, _ in thetas)
            + f" theta(2R)/theta(R)-1 max {spread:.1e}"
        )
    report(5, ok, "z=0.2,0.5,1,2um; " + "; ".join(lines) + " (tol 1%, 2%)")
    assert ok


# --------------------------------------------------------------------------
# 6. model discrimination
# --------------------------------------------------------------------------


@pytest.mark.slow
def test_acceptance_6_model_discrimination(de_points):
    th = ThermalSpec(T)
    force = {(z, k): p.exact for (z, k), p in de_points.items()}
    for z in (3e-6, 6e-6, 8e-6):
        for kind, model in MODELS.items():
            force[z, kind] = casimir_force(Geometry(R, z), Materials.same(model), th).force
    zs = sorted({z for z, _ in force})
    ratio = {z: force[z, "plasma"] / force[z, "drude"] for z in zs}
    stronger = all(ratio[z] > 1 for z in zs)
    window = max(ratio[z] for z in zs if 3e-6 <= z <= 8e-6)
    ok = report(6, stronger and window > 1.1,
                "F_plasma/F_drude " + " ".join(f"{z * 1e6:g}um:{ratio[z]:.3f}" for z in zs)
                + f"; max in [3,8]um {window:.3f} (need >1.1)")
    assert ok


# --------------------------------------------------------------------------
# 7-11. experimental auxiliaries and statistics
# --------------------------------------------------------------------------


def test_acceptance_7_min_detectable_force():
    F = min_detectable_force(OscillatorParams(kappa=1.07e-9, Q=4850, f_r=306.45, b=239e-6, T=T))
    ok = report(7, 5.7e-15 <= F <= 5.9e-15, f"F_min={F / fN:.3f} fN/sqrt(Hz) (band 5.7-5.9)")
    assert ok


def test_acceptance_8_electrostatic():
    z, V = 1e-3 * R, 0.1
    F = electrostatic_force(z, R, V, 0.0)
    ref = -math.pi * epsilon_0 * R * V**2 / z
    dev = abs(F / ref - 1)
    ok = report(8, dev < 0.01, f"z/R=1e-3 series/asymptote-1 = {dev:.2e} (tol 1e-2)")
    assert ok


def test_acceptance_9_median_method():
    ij = order_indices(30, 1.96)
    rng = np.random.default_rng(99)
    trials = 10_000
    x = rng.normal(0.0, 1.0, (trials, 30))
    x.sort(axis=1)
    covered = np.mean((x[:, ij[0] - 1] <= 0.0) & (x[:, ij[1] - 1] >= 0.0))

    m5 = median_estimate(RunSeries(0.6e-6, np.array(SAMPLE_Z5) * fN))
    n5 = normal_estimate(RunSeries(0.6e-6, np.array(SAMPLE_Z5) * fN))
    m21 = median_estimate(RunSeries(2.2e-6, np.array(SAMPLE_Z21) * fN))
    n21 = normal_estimate(RunSeries(2.2e-6, np.array(SAMPLE_Z21) * fN))
    worked = (
        math.isclose(m5.value / fN, -1666.5, abs_tol=1e-9)
        and math.isclose(m5.random_error / fN, 3.8, abs_tol=0.05)
        and math.isclose(n5.value / fN, -1662.86, abs_tol=0.01)
        and math.isclose(n5.random_error / fN, 2.1, abs_tol=0.05)
        and math.isclose(m21.value / fN, -51.67, abs_tol=1e-9)
        and math.isclose(m21.random_error / fN, 0.92, abs_tol=0.01)
        and math.isclose(n21.value / fN, -51.69, abs_tol=0.01)
        and math.isclose(n21.random_error / fN, 0.85, abs_tol=0.01)
    )
    ok = report(
        9, ij == (10, 21) and 0.93 <= covered <= 0.97 and worked,
        f"(i,j)={ij}; coverage {covered:.4f} over {trials} trials (band 0.93-0.97); "
        f"z=0.6um median {m5.value / fN:.2f}+-{m5.random_error / fN:.2f} vs mean {n5.value / fN:.2f}+-{n5.random_error / fN:.2f} fN; "
        f"z=2.2um median {m21.value / fN:.2f}+-{m21.random_error / fN:.3f} vs mean {n21.value / fN:.2f}+-{n21.random_error / fN:.2f} fN",
    )
    assert ok


EDGE_TRUE = dict(F_abs=3.5675e-11, f0=6.013e-13, f1=6.01e-15, f2=1.03e-16, delta=-2e-4)


def test_acceptance_10_edge_fit():
    trials = 500
    hits = dict.fromkeys(EDGE_TRUE, 0)
    for seed in range(trials):
        r = fit_harmonics(synthesize_harmonics(**EDGE_TRUE, m_max=21, sigma=0.6 * fN, seed=seed))
        for name, true in EDGE_TRUE.items():
            hits[name] += abs(getattr(r, name) - true) <= r.ci[name]
    frac = {k: v / trials for k, v in hits.items()}

    b, c = model_coefficients(**EDGE_TRUE, m_max=21)
    odd = np.arange(1, 22) % 2 == 1
    rms = lambda v: float(np.sqrt(np.mean(v**2)))  # noqa: E731
    b_odd, c_even, b_even, c_odd = rms(b[odd]), rms(c[~odd]), rms(b[~odd]), rms(c[odd])
    hierarchy = b_odd > 10 * c_even and c_even > 10 * max(b_even, c_odd) and 0.1 < b_even / c_odd < 10
    ok = report(
        10, min(frac.values()) >= 0.95 and hierarchy,
        "within 99% CI: " + " ".join(f"{k}={v:.3f}" for k, v in frac.items())
        + f" (need >=0.95); rms b_odd={b_odd:.2e} c_even={c_even:.2e} b_even={b_even:.2e} c_odd={c_odd:.2e} N",
    )
    assert ok


def test_acceptance_11_error_combination():
    short = combine_errors([0.2, 0.6, 85.0])
    long_ = ErrorBudget(calibration=0.2 * fN, detection=0.6 * fN, measurement=0.5 * fN).force_systematic() / fN
    dz = ErrorBudget().separation_systematic() * 1e9
    ok = report(
        11, math.isclose(short, 85.8, abs_tol=1e-9) and abs(long_ - 0.9) < 0.01 and abs(dz - 1.5) < 0.05,
        f"short-z {short:.3f} fN (85.8), long-z {long_:.3f} fN (~0.9), dz {dz:.3f} nm (~1.5)",
    )
    assert ok
