import math

import numpy as np
import pytest
from scipy.constants import Boltzmann, c, hbar
from scipy.integrate import quad
from scipy.special import zeta

from sphereplate.engine import (
    DESpec,
    Geometry,
    Materials,
    SummationError,
    ThetaError,
    ThetaTable,
    _plane_plane_energy_term,
    casimir_force,
    casimir_free_energy,
    classical_force_term,
    de_force,
    derive_theta,
    ideal_classical_pfa_force,
    ideal_pfa_force_T0,
    pfa_force,
    radial_scale,
    theta_from_forces,
)
from sphereplate.kernels import fresnel
from sphereplate.materials import Drude, Plasma, ThermalSpec, Vacuum


def test_geometry_validation():
    with pytest.raises(ValueError):
        Geometry(0.0, 1e-6)
    with pytest.raises(ValueError):
        Geometry(1e-6, -1e-6)


def test_radial_scale():
    assert radial_scale(1e-6, 0.0) == 1e6
    assert radial_scale(1e-6, 1e8) == pytest.approx(1e7)


@pytest.mark.parametrize("K, z", [(8e5, 1e-6), (8e6, 0.5e-6), (1e8, 0.2e-6), (8e5, 4e-6)])
def test_plane_plane_term_against_adaptive_quadrature(gold_drude, K, z):
    mats = Materials.same(gold_drude)

    def f(k):
        rte, rtm = fresnel(gold_drude, K, k)
        d = math.exp(-2 * math.hypot(K, k) * z)
        return k * (math.log1p(-rte**2 * d) + math.log1p(-rtm**2 * d)) / (2 * math.pi)

    s = math.sqrt(K / z) + 1 / z
    ref = sum(quad(f, a, b, epsabs=0, epsrel=1e-13, limit=500)[0] for a, b in [(0, s), (s, 5 * s), (5 * s, 100 * s)])
    assert _plane_plane_energy_term(mats, K, z, 400) == pytest.approx(ref, rel=1e-10)


def test_classical_pfa_limits():
    R, z, T = 149.7e-6, 0.5e-6, 295.25
    g = Geometry(R, z)
    # Drude: only TM survives at zero frequency
    drude = pfa_force(g, Materials.same(Drude(1e20, 1e10)), ThermalSpec(T), "l=0")
    assert drude == pytest.approx(-Boltzmann * T * zeta(3) * R / (8 * z * z), rel=1e-8)
    assert drude == pytest.approx(ideal_classical_pfa_force(R, z, T), rel=1e-8)
    # plasma with omega_p -> inf: both polarizations
    plasma = pfa_force(g, Materials.same(Plasma(1e22)), ThermalSpec(T), "l=0")
    assert plasma == pytest.approx(-Boltzmann * T * zeta(3) * R / (4 * z * z), rel=1e-5)


def test_pfa_filters_add_up(gold_drude):
    g, th, m = Geometry(149.7e-6, 1e-6), ThermalSpec(295.25), Materials.same(gold_drude)
    total = pfa_force(g, m, th)
    assert total == pytest.approx(pfa_force(g, m, th, "l=0") + pfa_force(g, m, th, "l>0"), rel=1e-12)
    assert total < 0
    with pytest.raises(ValueError):
        pfa_force(g, m, th, "odd")


def test_pfa_zero_temperature_perfect_reflectors():
    R, z = 100e-6, 1e-6
    F = pfa_force(Geometry(R, z), Materials.same(Plasma(1e21)), ThermalSpec(1.0))
    assert F == pytest.approx(ideal_pfa_force_T0(R, z), rel=2e-4)
    assert ideal_pfa_force_T0(R, z) == pytest.approx(-math.pi**3 * hbar * c * R / (360 * z**3))


def test_small_sphere_force_and_energy(gold_drude):
    g, th, m = Geometry(10e-6, 1e-6), ThermalSpec(295.25, rel_tol=1e-6), Materials.same(gold_drude)
    res = casimir_force(g, m, th)
    assert res.converged and res.force < 0 and res.free_energy < 0
    assert res.per_l[0][0] == 0 and res.per_l[0][1] == 0.0
    assert sum(r[2] for r in res.per_l) == pytest.approx(res.force, rel=1e-14)
    assert res.l_used == res.per_l[-1][0]
    pfa = pfa_force(g, m, th)
    # the curvature correction is of order z/R
    assert 0.0 < 1 - res.force / pfa < 0.1
    assert casimir_free_energy(g, m, th) == pytest.approx(res.free_energy, rel=1e-12)


def test_vacuum_sphere_feels_nothing(gold_drude):
    res = casimir_force(Geometry(5e-6, 1e-6), Materials(Vacuum(), gold_drude), ThermalSpec(300.0))
    assert res.force == 0.0 and res.free_energy == 0.0


def test_classical_term_model_kinds(gold_drude):
    g = Geometry(10e-6, 1e-6)
    m = Materials.same(gold_drude)
    fd = classical_force_term(g, m, "drude", 295.25)
    fp = classical_force_term(g, m, "plasma", 295.25)
    assert fd < 0 and fp < fd
    with pytest.raises(ValueError):
        classical_force_term(g, m, "lorentz", 295.25)


def test_summation_cap(gold_drude):
    with pytest.raises(SummationError):
        casimir_force(Geometry(5e-6, 1e-6), Materials.same(gold_drude), ThermalSpec(300.0, l_max_cap=2))


def test_theta_from_forces_roundtrip():
    R, z, th = 100e-6, 1e-6, 0.4
    assert theta_from_forces(-1.0 * (1 - th * z / R), -1.0, R, z) == pytest.approx(th, rel=1e-12)


def test_theta_table(tmp_path):
    p = tmp_path / "theta.txt"
    p.write_text("# z theta_d theta_p\n1e-6 0.4 0.5\n2e-6 0.6 0.7\n")
    t = ThetaTable.load(p)
    assert t.theta(1.5e-6, "drude") == pytest.approx(0.5)
    assert t.theta(2e-6, "plasma") == pytest.approx(0.7)
    with pytest.raises(ThetaError):
        t.theta(3e-6, "drude")
    with pytest.raises(ValueError):
        ThetaTable((2e-6, 1e-6), (0.1, 0.2), (0.1, 0.2))


def test_de_force_with_table(gold_drude):
    g, th, m = Geometry(149.7e-6, 2e-6), ThermalSpec(295.25), Materials.same(gold_drude)
    table = ThetaTable((1e-6, 3e-6), (0.5, 0.5), (0.9, 0.9))
    F0 = de_force(g, m, th, DESpec(table), classical=0.0)
    assert F0 == pytest.approx(pfa_force(g, m, th, "l>0") * (1 - 0.5 * 2e-6 / 149.7e-6), rel=1e-12)
    with pytest.raises(ThetaError):
        de_force(g, m, th, DESpec())
    with pytest.raises(ThetaError):
        de_force(Geometry(149.7e-6, 5e-6), m, th, DESpec(table))


def test_derive_theta_rejects_large_gap(gold_drude):
    with pytest.raises(ThetaError):
        derive_theta(10e-6, [0.5e-6], Materials.same(gold_drude), ThermalSpec(300.0))
