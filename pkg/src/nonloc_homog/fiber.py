"""Galerkin fibers of the periodic nonlocal operator on the unit cell.

For a dual-cell quasimomentum ``xi`` in ``[-pi, pi)^d`` the fiber acts on
periodic functions.  In the cell basis ``e_n(x) = exp(2 pi i <n,x>)`` the
matrix entries are (derivation in docs/conventions.md)

    B(xi)[m,n]      = sum_p c_{p, m-p-n} a_hat(xi + 2 pi (m - p))
    p_toeplitz[m,n] = sum_{p+q = m-n} c_{p,q} a_hat(2 pi q)
    A(xi)           = p_toeplitz - B(xi)

where ``c_{p,q}`` are the modulation coefficients.  Derivative matrices in
``xi`` replace ``a_hat`` by ``-(d^alpha a_hat)`` inside ``B`` (the
multiplication part does not depend on ``xi``).  The constant mode is an
exact null vector of ``A(0)``; the implementation preserves that identity
to the last bit by evaluating the two competing terms from identical
floating-point inputs.
"""

import itertools
import math

import numpy as np
from scipy import linalg, special

__all__ = [
    "Truncation",
    "FiberOperator",
    "FiberFamily",
    "SpectralData",
    "assemble",
    "assemble_derivatives",
    "spectral_data",
    "spectral_projector_riesz",
    "fiber_resolvent",
    "hadamard_remainder",
    "stadium_contour",
    "hermitian_norm",
    "TruncationTooSmall",
    "GapTooSmall",
    "ContourNonConvergence",
]


class TruncationTooSmall(ValueError):
    """Mode cutoff cannot represent the modulation couplings."""


class GapTooSmall(RuntimeError):
    """Spectral layout does not isolate the lowest eigenvalue as required."""


class ContourNonConvergence(RuntimeError):
    """Contour quadrature failed to meet its residual gate."""


def hermitian_norm(M):
    """Spectral norm of a Hermitian matrix."""
    return float(np.max(np.abs(linalg.eigvalsh(M))))


class Truncation:
    """Cube of cell modes |n|_inf <= N with a total index bijection.

    Modes are ordered lexicographically; ``offset`` maps a mode to its row
    through the mixed-radix formula sum_i (n_i + N) * (2N+1)^(d-1-i).
    """

    def __init__(self, N, dim):
        if N < 1:
            raise ValueError("truncation N must be at least 1")
        if dim not in (1, 2):
            raise ValueError("only dimensions 1 and 2 are supported")
        self.N = int(N)
        self.dim = int(dim)
        self.side = 2 * self.N + 1
        self.size = self.side**self.dim
        self.indices = np.array(
            list(itertools.product(range(-self.N, self.N + 1), repeat=self.dim)), dtype=int
        )
        self._radix = self.side ** np.arange(self.dim - 1, -1, -1)
        self.zero_offset = self.offsets(np.zeros((1, self.dim), dtype=int))[0][0]

    def offsets(self, n):
        """Flat offsets of integer modes (..., dim); also returns a validity mask."""
        n = np.asarray(n, dtype=int)
        comp = n + self.N
        valid = np.all((comp >= 0) & (comp < self.side), axis=-1)
        flat = np.tensordot(comp, self._radix, axes=([-1], [0]))
        return np.where(valid, flat, 0), valid

    def offset(self, n):
        flat, valid = self.offsets(np.asarray(n, dtype=int).reshape(1, self.dim))
        if not valid[0]:
            raise ValueError("mode %s outside truncation N=%d" % (n, self.N))
        return int(flat[0])


class SpectralData:
    """Ascending eigenpairs of a fiber matrix with residual bookkeeping."""

    def __init__(self, eigenvalues, eigenvectors, gap, residual):
        self.eigenvalues = eigenvalues
        self.eigenvectors = eigenvectors
        self.gap = gap
        self.residual = residual


class FiberOperator:
    """Assembled fiber at one quasimomentum."""

    def __init__(self, xi, matrix, p_toeplitz, matrix_B, trunc, family):
        self.xi = xi
        self.matrix = matrix
        self.p_toeplitz = p_toeplitz
        self.matrix_B = matrix_B
        self.trunc = trunc
        self.family = family
        self._norm = None

    @property
    def norm(self):
        if self._norm is None:
            self._norm = hermitian_norm(self.matrix)
        return self._norm


class FiberFamily:
    """Shared assembly state for all fibers of one (kernel, modulation) pair.

    Precomputes the multiplication (Toeplitz) part and, per modulation
    coefficient, the row/column scatter pattern and the integer points at
    which the kernel transform is evaluated.
    """

    def __init__(self, kernel, mu, trunc):
        if kernel.dim != mu.dim or kernel.dim != trunc.dim:
            raise ValueError("kernel, modulation and truncation dimensions differ")
        if trunc.N < mu.bandwidth:
            raise TruncationTooSmall(
                "truncation N=%d below modulation bandwidth %d" % (trunc.N, mu.bandwidth)
            )
        self.kernel = kernel
        self.mu = mu
        self.trunc = trunc
        m = trunc.size
        rows_all = np.arange(m)
        terms = []
        P = np.zeros((m, m), dtype=complex)
        for p, q, c in mu.pair_items():
            col_n = trunc.indices - (p + q)
            cols, valid = trunc.offsets(col_n)
            rows = rows_all[valid]
            cols = cols[valid]
            pts = (trunc.indices[valid] - p).astype(float)
            terms.append((c, rows, cols, pts))
            P[rows, cols] += c * float(kernel.fourier(2.0 * np.pi * q.astype(float)))
        self._terms = terms
        self.p_toeplitz = P
        self._derivs = None
        self._spectral0 = None

    def operator(self, xi):
        xi = np.asarray(xi, dtype=float).reshape(self.trunc.dim)
        m = self.trunc.size
        B = np.zeros((m, m), dtype=complex)
        for c, rows, cols, pts in self._terms:
            B[rows, cols] += c * self.kernel.fourier(xi + 2.0 * np.pi * pts)
        return FiberOperator(xi, self.p_toeplitz - B, self.p_toeplitz, B, self.trunc, self)

    def derivatives(self):
        """First and second xi-derivative matrices of the fiber at xi = 0."""
        if self._derivs is None:
            d = self.trunc.dim
            m = self.trunc.size
            dA = [np.zeros((m, m), dtype=complex) for _ in range(d)]
            d2A = [[np.zeros((m, m), dtype=complex) for _ in range(d)] for _ in range(d)]
            for c, rows, cols, pts in self._terms:
                grad = self.kernel.fourier_grad(2.0 * np.pi * pts)
                hess = self.kernel.fourier_hess(2.0 * np.pi * pts)
                for i in range(d):
                    dA[i][rows, cols] -= c * grad[:, i]
                    for j in range(d):
                        d2A[i][j][rows, cols] -= c * hess[:, i, j]
            self._derivs = (dA, d2A)
        return self._derivs

    def spectral0(self):
        if self._spectral0 is None:
            self._spectral0 = spectral_data(self.operator(np.zeros(self.trunc.dim)))
        return self._spectral0

    def gap0(self):
        """Measured distance from the zero eigenvalue to the rest at xi = 0."""
        return float(self.spectral0().eigenvalues[1])

    def p_range(self, grid=4096):
        """Range of the multiplier p(x) = sum over the Toeplitz diagonal symbols."""
        d = self.trunc.dim
        G = grid if d == 1 else 128
        arr = np.zeros((G,) * d, dtype=complex)
        for p, q, c in self.mu.pair_items():
            k = p + q
            idx = tuple(int(i) % G for i in k)
            arr[idx] += c * float(self.kernel.fourier(2.0 * np.pi * q.astype(float)))
        vals = (np.fft.ifftn(arr) * G**d).real
        return float(np.min(vals)), float(np.max(vals))


def assemble(kernel, mu, xi, trunc):
    """Build the fiber matrix A(xi) together with its two constituents."""
    return FiberFamily(kernel, mu, trunc).operator(xi)


def assemble_derivatives(kernel, mu, trunc):
    """First and second xi-derivatives of the fiber at xi = 0."""
    return FiberFamily(kernel, mu, trunc).derivatives()


def spectral_data(fiber, res_tol=1e-10):
    """Full Hermitian eigendecomposition with residual and positivity gates."""
    A = fiber.matrix
    w, V = linalg.eigh(A)
    scale = max(float(np.max(np.abs(w))), 1e-300)
    resid = float(np.max(np.abs(A @ V - V * w)) )
    if resid > res_tol * scale:
        raise RuntimeError("eigen residual %g exceeds %g" % (resid, res_tol * scale))
    if w[0] < -res_tol * scale:
        raise RuntimeError("fiber matrix has a significantly negative eigenvalue %g" % w[0])
    w = w.copy()
    w[0] = max(w[0], 0.0)
    return SpectralData(w, V, float(w[1] - w[0]), resid)


def stadium_contour(d0, n, grading=8):
    """Nodes and weights for a positively oriented stadium around [0, d0/3].

    The stadium keeps distance d0/6 from the segment.  Each of the four
    pieces (two caps, two straights) is reparametrized with the regularized
    incomplete beta function so the velocity vanishes to high order at the
    junctions; the plain trapezoid rule then converges superalgebraically
    even though the contour is only C^1.  Returns (zeta, w) such that a
    contour integral of f is approximated by sum(f(zeta) * w).
    """
    per = int(math.ceil(n / 4.0))
    n = 4 * per
    s = np.arange(per) / per
    u = special.betainc(grading + 1, grading + 1, s)
    du = (s * (1.0 - s)) ** grading / special.beta(grading + 1, grading + 1)
    r = d0 / 6.0
    c1 = d0 / 3.0
    zeta = []
    weight = []
    # right cap, top straight, left cap, bottom straight (counterclockwise)
    phi = -0.5 * np.pi + np.pi * u
    zeta.append(c1 + r * np.exp(1j * phi))
    weight.append(1j * np.pi * r * np.exp(1j * phi) * du)
    zeta.append(1j * r + (1.0 - u) * c1)
    weight.append(-c1 * du)
    phi = 0.5 * np.pi + np.pi * u
    zeta.append(r * np.exp(1j * phi))
    weight.append(1j * np.pi * r * np.exp(1j * phi) * du)
    zeta.append(-1j * r + u * c1)
    weight.append(c1 * du)
    zeta = np.concatenate(zeta)
    weight = np.concatenate(weight) * (4.0 / n)
    return zeta, weight


def _riesz_sum(A, zeta, weight):
    m = A.shape[0]
    eye = np.eye(m, dtype=complex)
    F = np.zeros((m, m), dtype=complex)
    for z, w in zip(zeta, weight):
        if w == 0.0:
            continue
        F += w * np.linalg.solve(A - z * eye, eye)
    return F / (-2j * np.pi)


def spectral_projector_riesz(fiber, contour_nodes=64, d0=None, max_nodes=4096):
    """Riesz projector onto the lowest eigenvalue by contour quadrature.

    The contour is a stadium around [0, d0/3] at distance d0/6, where d0 is
    the measured spectral gap of the family at xi = 0 unless given.  The
    node count doubles until the idempotency residual ||F^2 - F|| drops
    below 1e-8.  Raises GapTooSmall when the spectrum of this fiber does
    not have exactly one eigenvalue in [0, d0/3] and none in
    (d0/3, 2 d0/3).
    """
    A = fiber.matrix
    if d0 is None:
        d0 = fiber.family.gap0()
    w = linalg.eigvalsh(A)
    scale = float(np.max(np.abs(w)))
    low = np.sum(w <= d0 / 3.0 + 1e-12 * scale)
    mid = np.sum((w > d0 / 3.0 + 1e-12 * scale) & (w < 2.0 * d0 / 3.0 - 1e-12 * scale))
    if low != 1 or mid != 0:
        raise GapTooSmall(
            "eigenvalue layout ([0,d0/3]: %d, (d0/3,2d0/3): %d) violates the contour premise"
            % (low, mid)
        )
    n = int(contour_nodes)
    while True:
        zeta, wq = stadium_contour(d0, n)
        F = _riesz_sum(A, zeta, wq)
        herm = hermitian_norm((F - F.conj().T) / 2.0)
        F = (F + F.conj().T) / 2.0
        idem = hermitian_norm(F @ F - F)
        # the unit-trace test rejects the degenerate all-zero quadrature
        # (F = 0 is idempotent) that very low node counts produce
        trace_gap = abs(np.trace(F) - 1.0)
        if idem <= 1e-8 and herm <= 1e-8 and trace_gap <= 1e-8:
            return F
        if n >= max_nodes:
            raise ContourNonConvergence(
                "projector quadrature stuck at idempotency %g with %d nodes" % (idem, n)
            )
        n *= 2


def fiber_resolvent(fiber, shift, res_tol=1e-10):
    """Inverse of (A(xi) + shift I) for shift > 0, via Cholesky."""
    if shift <= 0.0:
        raise ValueError("shift must be positive")
    A = fiber.matrix + shift * np.eye(fiber.matrix.shape[0])
    c, lower = linalg.cho_factor(A)
    R = linalg.cho_solve((c, lower), np.eye(A.shape[0], dtype=complex))
    resid = float(np.max(np.abs(A @ R - np.eye(A.shape[0]))))
    if resid > res_tol:
        raise RuntimeError("resolvent residual %g exceeds %g" % (resid, res_tol))
    return R


def hadamard_remainder(family, xi):
    """Norm of the third-order Taylor remainder of the fiber at xi.

    Returns ||A(xi) - A(0) - sum xi_i dA_i - 1/2 sum xi_i xi_j d2A_ij||.
    """
    xi = np.asarray(xi, dtype=float).reshape(family.trunc.dim)
    dA, d2A = family.derivatives()
    K = family.operator(xi).matrix - family.operator(np.zeros_like(xi)).matrix
    for i in range(family.trunc.dim):
        K -= xi[i] * dA[i]
        for j in range(family.trunc.dim):
            K -= 0.5 * xi[i] * xi[j] * d2A[i][j]
    return hermitian_norm(K)
