import math

import numpy as np
import pytest

from sphereplate.kernels import KernelContext
from sphereplate.materials import Drude, Plasma, Vacuum
from sphereplate.spectral import (
    NonContractiveError,
    QuadratureSpec,
    RoundTripSpectrum,
    assemble_dense,
    assemble_spectrum,
    build_quadrature,
    degeneracy,
    logdet_and_trace,
    logdet_one_minus,
    trace_solve,
)


def test_quadrature_spec_validation():
    with pytest.raises(ValueError):
        QuadratureSpec(0, 4, 1.0)
    with pytest.raises(ValueError):
        QuadratureSpec(4, 5, 1.0)
    with pytest.raises(ValueError):
        QuadratureSpec(4, 4, 0.0)
    q = QuadratureSpec.auto(149.7e-6, 1e-6)
    assert q.N == math.ceil(8 * math.sqrt(149.7)) + 20 and q.M == 2 * q.N and q.a == pytest.approx(1e6)


def test_radial_rule_integrates_plane_kernel():
    z = 1e-6
    k, w, phi, v = build_quadrature(QuadratureSpec(80, 4, 1 / z))
    assert np.all(k > 0) and np.all(np.diff(k) < 0) and np.all(w > 0)
    # int_0^inf k exp(-2 k z) dk = 1/(4 z^2)
    assert np.sum(w * k * np.exp(-2 * k * z)) == pytest.approx(1 / (4 * z * z), rel=1e-12)
    # a rational integrand with algebraic decay
    assert np.sum(w / (1 + (k * z) ** 2)) * z == pytest.approx(math.pi / 2, rel=1e-6)
    np.testing.assert_allclose(v.sum(), 2 * math.pi)
    assert phi[0] == 0.0


def test_degeneracy():
    assert [degeneracy(m, 8) for m in range(5)] == [1, 2, 2, 2, 1]


@pytest.mark.parametrize("K", [3e5, 2e6])
def test_blocks_reproduce_dense_operator(K):
    R, z = 5e-6, 1e-6
    ctx = KernelContext(K, R, z, Drude(1.37e16, 5.3e13), Plasma(1.37e16))
    spec = QuadratureSpec(4, 8, 1 / z)
    sp = assemble_spectrum(ctx, spec)
    dense = assemble_dense(ctx, spec)
    ev = np.sort_complex(np.linalg.eigvals(dense))
    evb = np.sort_complex(np.concatenate(
        [np.linalg.eigvals(sp.blocks[m]) for m in range(5) for _ in range(degeneracy(m, 8))]))
    np.testing.assert_allclose(ev, evb, atol=1e-13 * max(1.0, np.abs(ev).max()))
    sign, ref = np.linalg.slogdet(np.eye(dense.shape[0]) - dense)
    assert sign > 0
    assert logdet_one_minus(sp) == pytest.approx(ref, rel=1e-12, abs=1e-15)


def test_trace_is_derivative_of_logdet():
    R, K = 5e-6, 1e6
    m = Drude(1.37e16, 5.3e13)
    spec = QuadratureSpec(24, 48, 1e6)

    def ld(z):
        return logdet_one_minus(assemble_spectrum(KernelContext(K, R, z, m, m), spec))

    z, h = 1e-6, 2e-9
    sp = assemble_spectrum(KernelContext(K, R, z, m, m), spec)
    fd = (8 * (ld(z + h) - ld(z - h)) - (ld(z + 2 * h) - ld(z - 2 * h))) / (12 * h)
    # d log det(1 - M) = -tr[(1 - M)^-1 dM]
    assert trace_solve(sp, sp.derivative()) == pytest.approx(-fd, rel=1e-7)
    l2, t2, _ = logdet_and_trace(sp)
    assert l2 == pytest.approx(logdet_one_minus(sp), rel=1e-14)
    assert t2 == pytest.approx(trace_solve(sp, sp.derivative()), rel=1e-13)


def test_block_truncation():
    ctx = KernelContext(1e6, 5e-6, 1e-6, Drude(1.37e16, 5.3e13), Drude(1.37e16, 5.3e13))
    sp = assemble_spectrum(ctx, QuadratureSpec(30, 60, 1e6))
    full = logdet_one_minus(sp)
    ld, tr, used = logdet_and_trace(sp, m_tol=1e-12)
    assert used <= sp.blocks.shape[0]
    assert ld == pytest.approx(full, rel=1e-10)
    assert full < 0 and tr < 0


def test_vacuum_gives_zero_operator():
    ctx = KernelContext(1e6, 5e-6, 1e-6, Vacuum(), Drude(1.37e16, 5.3e13))
    sp = assemble_spectrum(ctx, QuadratureSpec(6, 12, 1e6))
    assert np.all(sp.blocks == 0)
    assert logdet_one_minus(sp) == 0.0


def test_non_contractive_block_is_reported():
    N, M = 2, 4
    blocks = np.zeros((M // 2 + 1, 2 * N, 2 * N))
    blocks[1] = 2.0 * np.eye(2 * N)
    blocks[1, 0, 0] = 0.5
    sp = RoundTripSpectrum(blocks, N, M, 1.0, 1.0, 1.0, 1.0, np.ones(N))
    with pytest.raises(NonContractiveError):
        logdet_one_minus(sp)


def test_non_finite_blocks_rejected():
    blocks = np.full((2, 2, 2), np.nan)
    with pytest.raises(ArithmeticError):
        RoundTripSpectrum(blocks, 1, 2, 1.0, 1.0, 1.0, 1.0, np.ones(1))
