"""Fiber assembly: indexing, structure, spectral facts, contour machinery."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from nonloc_homog import fiber, model


def test_truncation_indexing_roundtrip():
    for dim in (1, 2):
        t = fiber.Truncation(3, dim)
        flat, valid = t.offsets(t.indices)
        assert valid.all()
        assert_allclose(flat, np.arange(t.size))
        assert t.offset(np.zeros(dim, dtype=int)) == t.zero_offset


def test_truncation_rejects_outside_mode():
    t = fiber.Truncation(2, 1)
    with pytest.raises(ValueError):
        t.offset([3])


def test_truncation_below_bandwidth_raises(std_kernel):
    mu = model.Modulation.cosine_product(1, 0.5)
    coeffs = {((0,), (0,)): 1.0}
    for s in (-1, 1):
        coeffs[((2 * s,), (2 * s,))] = 0.1
        coeffs[((2 * s,), (-2 * s,))] = 0.1
    wide = model.Modulation(1, coeffs)
    assert wide.bandwidth == 2
    with pytest.raises(fiber.TruncationTooSmall):
        fiber.FiberFamily(std_kernel, wide, fiber.Truncation(1, 1))
    # bandwidth 1 at N=1 is fine
    fiber.FiberFamily(std_kernel, mu, fiber.Truncation(1, 1))


def test_constant_mode_is_exact_kernel(std_family):
    A0 = std_family.operator(np.zeros(1)).matrix
    e0 = np.zeros(std_family.trunc.size)
    e0[std_family.trunc.zero_offset] = 1.0
    assert_allclose(A0 @ e0, np.zeros_like(e0), atol=1e-12 * fiber.hermitian_norm(A0))


def test_fiber_hermitian_and_nonnegative(std_family, rng):
    for _ in range(4):
        xi = rng.uniform(-np.pi, np.pi, size=1)
        A = std_family.operator(xi).matrix
        assert_allclose(A, A.conj().T, atol=1e-12 * fiber.hermitian_norm(A))
        w = np.linalg.eigvalsh(A)
        assert w.min() >= -1e-10 * max(w.max(), 1.0)


def test_schur_bound_on_offdiagonal_part(std_family, std_kernel, std_mu, rng):
    # the non-multiplication block is bounded by 2^d mu_plus ||a||_1
    bound = 2 * std_mu.mu_plus * std_kernel.l1
    for _ in range(4):
        xi = rng.uniform(-np.pi, np.pi, size=1)
        op = std_family.operator(xi)
        assert fiber.hermitian_norm(op.matrix_B) <= bound * (1 + 1e-12)


def test_multiplication_part_is_diagonal_range(std_family):
    # P is a convolution in mode space: same Toeplitz entry on each diagonal
    op = std_family.operator(np.array([0.7]))
    P = op.p_toeplitz
    lo, hi = std_family.p_range()
    w = np.linalg.eigvalsh(P)
    assert w.min() >= lo - 1e-9 * abs(hi)
    assert w.max() <= hi + 1e-9 * abs(hi)


def test_spectral_data_matches_eigh(std_family):
    s = std_family.spectral0()
    A0 = std_family.operator(np.zeros(1)).matrix
    w = np.linalg.eigvalsh(A0)
    assert_allclose(s.eigenvalues[:4], w[:4], atol=1e-10 * max(abs(w)))
    assert_allclose(s.eigenvalues[0], 0.0, atol=1e-10 * max(abs(w)))
    assert_allclose(std_family.gap0(), w[1], rtol=1e-10)
    assert s.residual <= 1e-10 * max(abs(w))


def test_lipschitz_in_xi(std_family, std_kernel, std_mu, rng):
    L = std_mu.mu_plus * 2 * std_kernel.moment(1)
    for _ in range(50):
        xi, eta = rng.uniform(-np.pi, np.pi, size=(2, 1))
        gap = fiber.hermitian_norm(
            std_family.operator(xi).matrix - std_family.operator(eta).matrix
        )
        assert gap <= L * np.linalg.norm(xi - eta) * (1 + 1e-12)


def test_hadamard_remainder_cubic(std_family, std_kernel, std_mu, rng):
    C = std_mu.mu_plus * std_kernel.moment(3) / 6.0
    for _ in range(20):
        xi = rng.uniform(-0.5, 0.5, size=1)
        rem = fiber.hadamard_remainder(std_family, xi)
        assert rem <= C * np.linalg.norm(xi) ** 3 * (1 + 1e-9) + 1e-13


def test_riesz_projector_matches_ground_eigenvector(std_family):
    op = std_family.operator(np.array([0.05]))
    w, V = np.linalg.eigh(op.matrix)
    F_eig = np.outer(V[:, 0], V[:, 0].conj())
    F = fiber.spectral_projector_riesz(op, d0=std_family.gap0())
    assert fiber.hermitian_norm(F - F_eig) <= 1e-8


def test_riesz_projector_idempotent(std_family):
    op = std_family.operator(np.array([-0.11]))
    F = fiber.spectral_projector_riesz(op, d0=std_family.gap0())
    assert fiber.hermitian_norm(F @ F - F) <= 1e-8
    assert_allclose(np.trace(F).real, 1.0, atol=1e-8)


def test_stadium_contour_encloses_origin_only():
    d0 = 0.4
    nodes, weights = fiber.stadium_contour(d0, 256)
    # winding number about 0 is 1, about a point beyond the gap it is 0
    wind0 = np.sum(weights / nodes) / (2j * np.pi)
    wind1 = np.sum(weights / (nodes - 2 * d0)) / (2j * np.pi)
    assert_allclose(wind0, 1.0, atol=1e-8)
    assert_allclose(wind1, 0.0, atol=1e-8)


def test_fiber_resolvent_residual(std_family):
    op = std_family.operator(np.array([0.3]))
    R = fiber.fiber_resolvent(op, 0.01)
    I = np.eye(op.matrix.shape[0])
    assert fiber.hermitian_norm((op.matrix + 0.01 * I) @ R - I) <= 1e-10


def test_derivatives_match_finite_differences(std_family):
    dA, d2A = std_family.derivatives()
    h = 1e-5
    Ap = std_family.operator(np.array([h])).matrix
    Am = std_family.operator(np.array([-h])).matrix
    A0 = std_family.operator(np.zeros(1)).matrix
    fd1 = (Ap - Am) / (2 * h)
    fd2 = (Ap - 2 * A0 + Am) / h**2
    scale = fiber.hermitian_norm(A0)
    assert fiber.hermitian_norm(dA[0] - fd1) <= 1e-8 * scale
    assert fiber.hermitian_norm(d2A[0][0] - fd2) <= 1e-4 * scale


def test_gap_against_certified_threshold(std_family, std_chain):
    assert std_family.gap0() >= std_chain.d0 - 1e-12
