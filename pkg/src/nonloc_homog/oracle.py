"""Real-space quadrature oracle for the fiber operators.

Independent check of the Galerkin assembly: the fiber action

    (A(xi) v)(x) = p(x) v(x) - integral over the cell of
                   a_tilde(xi, x - z) mu(x, z) v(z) dz

is evaluated by direct Riemann summation on a uniform cell grid, with

    a_tilde(xi, w) = sum over lattice n of a(w + n) exp(-i <xi, w + n>)
    p(x)           = integral of a_tilde(0, x - z) mu(x, z) dz.

Only pointwise kernel samples enter; no Fourier transforms of the kernel
are used anywhere, so agreement with the assembled matrices is a genuine
two-route check.  The quadratic form has a second, manifestly nonnegative
evaluation through the symmetrized double integral; both are exposed.
"""

import numpy as np

__all__ = ["CellGrid", "apply_fiber_realspace", "quadratic_form_check"]


class CellGrid:
    """Uniform grid on the unit cell plus a lattice cutoff for kernel sums.

    Parameters
    ----------
    dim : int
    points_per_dim : int
        At least 16.
    lattice_radius : int
        Lattice sum cutoff L; kernel translates with |n|_inf <= L enter the
        periodized kernel.  Pick it so the neglected tail is below
        1e-10 * l1 (kernels provide ``lattice_radius``).
    """

    def __init__(self, dim, points_per_dim, lattice_radius):
        if points_per_dim < 16:
            raise ValueError("need at least 16 points per dimension")
        if lattice_radius < 1:
            raise ValueError("lattice radius must be at least 1")
        self.dim = dim
        self.G = int(points_per_dim)
        self.L = int(lattice_radius)
        axes = [np.arange(self.G) / self.G for _ in range(dim)]
        mesh = np.meshgrid(*axes, indexing="ij")
        self.points = np.stack([m.ravel() for m in mesh], axis=-1)

    @classmethod
    def for_kernel(cls, kernel, points_per_dim, tail_tol=1e-10):
        return cls(kernel.dim, points_per_dim, kernel.lattice_radius(tail_tol))

    def lattice_offsets(self):
        rng = np.arange(-self.L, self.L + 1)
        mesh = np.meshgrid(*([rng] * self.dim), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1).astype(float)


def _periodized_profiles(kernel, xi, grid):
    """a_tilde(xi, w) and a_tilde(0, w) on the difference grid w = m/G.

    Both are 1-periodic in w (the lattice sum runs over all translates), so
    values at m/G cover every pairwise grid difference.
    """
    w = grid.points
    prof_xi = np.zeros(w.shape[0], dtype=complex)
    prof_0 = np.zeros(w.shape[0])
    for n in grid.lattice_offsets():
        shifted = w + n
        vals = kernel.sample(shifted)
        prof_0 += vals
        prof_xi += vals * np.exp(-1j * (shifted @ xi))
    return prof_xi, prof_0


def _synthesize(coeffs, trunc, grid):
    """Grid values of the trig polynomial with the given mode coefficients."""
    G = grid.G
    if 2 * trunc.N >= G:
        raise ValueError("grid too coarse for the mode cutoff")
    arr = np.zeros((G,) * grid.dim, dtype=complex)
    for n, c in zip(trunc.indices, coeffs):
        arr[tuple(int(i) % G for i in n)] += c
    return (np.fft.ifftn(arr) * G**grid.dim).ravel()


def apply_fiber_realspace(kernel, mu, xi, coeffs, trunc, grid, return_input=False):
    """Fiber action on a trig polynomial, by direct quadrature.

    Parameters
    ----------
    coeffs : array, length trunc.size
        Mode coefficients of the periodic input v.
    grid : CellGrid

    Returns
    -------
    out : ndarray, shape (G,)*dim, complex
        Grid values of (A(xi) v).  With ``return_input`` also the grid
        values of v.
    """
    xi = np.asarray(xi, dtype=float).reshape(grid.dim)
    prof_xi, prof_0 = _periodized_profiles(kernel, xi, grid)
    v = _synthesize(coeffs, trunc, grid)
    G = grid.G
    npts = G**grid.dim
    h = 1.0 / npts  # product quadrature weight on the periodic cell
    x = grid.points
    out = np.empty(npts, dtype=complex)
    if grid.dim == 1:
        diff = (np.arange(G)[:, None] - np.arange(G)[None, :]) % G
        chunk = 512
    else:
        ij = np.arange(G)
        d1 = (ij[:, None] - ij[None, :]) % G
        chunk = 64
    for start in range(0, npts, chunk):
        stop = min(start + chunk, npts)
        if grid.dim == 1:
            didx = diff[start:stop]
        else:
            rows = np.arange(start, stop)
            r1, r2 = rows // G, rows % G
            didx = (d1[r1][:, :, None] * G + d1[r2][:, None, :]).reshape(stop - start, npts)
        muvals = mu.eval(x[start:stop, None, :], x[None, :, :])
        pvals = h * np.sum(prof_0[didx] * muvals, axis=1)
        bvals = h * np.sum(prof_xi[didx] * muvals * v[None, :], axis=1)
        out[start:stop] = pvals * v[start:stop] - bvals
    out = out.reshape((G,) * grid.dim)
    if return_input:
        return out, v.reshape((G,) * grid.dim)
    return out


def quadratic_form_check(kernel, mu, xi, coeffs, trunc, grid):
    """Two oracle evaluations of the fiber quadratic form <A(xi) v, v>.

    ``direct`` pairs the fiber action with the input; ``symmetrized`` uses
    the manifestly nonnegative double integral

        1/2 iint mu(x,z) [ a_tilde(0,x-z) (|v(x)|^2 + |v(z)|^2)
                           - 2 Re( a_tilde(xi,x-z) v(z) conj(v(x)) ) ]

    Returns a dict with both values and the grid values used.
    """
    G = grid.G
    npts = G**grid.dim
    h = 1.0 / npts
    out, v = apply_fiber_realspace(kernel, mu, xi, coeffs, trunc, grid, return_input=True)
    direct = h * np.vdot(v.ravel(), out.ravel())

    xi = np.asarray(xi, dtype=float).reshape(grid.dim)
    prof_xi, prof_0 = _periodized_profiles(kernel, xi, grid)
    x = grid.points
    vflat = v.ravel()
    total = 0.0
    if grid.dim == 1:
        diff = (np.arange(G)[:, None] - np.arange(G)[None, :]) % G
        chunk = 512
    else:
        ij = np.arange(G)
        d1 = (ij[:, None] - ij[None, :]) % G
        chunk = 64
    av2 = np.abs(vflat) ** 2
    for start in range(0, npts, chunk):
        stop = min(start + chunk, npts)
        if grid.dim == 1:
            didx = diff[start:stop]
        else:
            rows = np.arange(start, stop)
            r1, r2 = rows // G, rows % G
            didx = (d1[r1][:, :, None] * G + d1[r2][:, None, :]).reshape(stop - start, npts)
        muvals = mu.eval(x[start:stop, None, :], x[None, :, :])
        cross = np.real(prof_xi[didx] * vflat[None, :] * np.conj(vflat[start:stop])[:, None])
        pair = 0.5 * prof_0[didx] * (av2[start:stop][:, None] + av2[None, :])
        total += float(np.sum(muvals * (pair - cross)))
    symmetrized = total * h * h
    return {
        "direct": complex(direct),
        "symmetrized": symmetrized,
        "grid_values": v,
    }
