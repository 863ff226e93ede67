"""Kernels and modulations for periodic nonlocal convolution operators.

The operators studied by this package act as

    (A u)(x) = integral over R^d of  a(x - y) mu(x, y) (u(x) - u(y)) dy

with ``a`` an even, nonnegative, integrable jump kernel and ``mu`` a
symmetric, 1-periodic modulation bounded between positive constants.

Fourier conventions (see docs/conventions.md for the full sheet):

* kernels on R^d use angular frequency, ``a_hat(k) = int a(x) exp(-i<k,x>) dx``;
* periodic functions on the unit cell use the basis ``exp(2*pi*i*<n,x>)``.

A kernel object knows its transform and its derivatives up to second
order, radial moments up to third order, a monotone envelope bounding
``|a_hat|`` away from the origin, and pointwise sample values for the
real-space quadrature oracle.
"""

import math

import numpy as np
from scipy import integrate, special

__all__ = [
    "GaussianKernel",
    "BallKernel",
    "SampledKernel",
    "Modulation",
    "ModulationBounds",
    "NonPositiveLowerBound",
    "kernel_fourier",
    "symbol_A_hat",
    "moments",
    "modulation_eval",
    "certify_bounds",
]


class NonPositiveLowerBound(ValueError):
    """Certified lower bound of a modulation is not strictly positive."""


def _points(k, dim):
    """Coerce wavevector input to a float array whose last axis is ``dim``."""
    k = np.asarray(k, dtype=float)
    if dim == 1 and (k.ndim == 0 or k.shape[-1] != 1):
        k = k[..., np.newaxis]
    if k.shape[-1] != dim:
        raise ValueError("expected points with last axis %d, got shape %s" % (dim, k.shape))
    return k


class GaussianKernel:
    """Centered Gaussian jump kernel with prescribed total mass.

    Parameters
    ----------
    sigma : float or sequence of float
        Standard deviation per axis.  A scalar with ``dim`` given makes an
        isotropic kernel.
    mass : float
        Total integral of the kernel (its L1 norm).
    dim : int, optional
        Space dimension, needed only when ``sigma`` is scalar.
    """

    family = "gaussian"

    def __init__(self, sigma, mass=1.0, dim=None):
        sig = np.atleast_1d(np.asarray(sigma, dtype=float))
        if dim is not None and sig.size == 1 and dim > 1:
            sig = np.full(dim, sig[0])
        self.sigma = sig
        self.dim = sig.size
        if self.dim not in (1, 2):
            raise ValueError("only dimensions 1 and 2 are supported")
        if np.any(sig <= 0.0) or mass <= 0.0:
            raise ValueError("sigma and mass must be positive")
        self.mass = float(mass)

    def __repr__(self):
        return "GaussianKernel(sigma=%s, mass=%g)" % (self.sigma.tolist(), self.mass)

    @property
    def l1(self):
        return self.mass

    @property
    def l2(self):
        return self.mass / math.sqrt(float(np.prod(2.0 * math.sqrt(math.pi) * self.sigma)))

    def sample(self, x):
        """Pointwise kernel values a(x)."""
        x = _points(x, self.dim)
        z = x / self.sigma
        norm = self.mass / float(np.prod(np.sqrt(2.0 * np.pi) * self.sigma))
        return norm * np.exp(-0.5 * np.sum(z * z, axis=-1))

    def fourier(self, k):
        """a_hat(k) = mass * exp(-sum(sigma_i^2 k_i^2) / 2)."""
        k = _points(k, self.dim)
        return self.mass * np.exp(-0.5 * np.sum((self.sigma * k) ** 2, axis=-1))

    def fourier_grad(self, k):
        k = _points(k, self.dim)
        return -(self.sigma**2) * k * self.fourier(k)[..., np.newaxis]

    def fourier_hess(self, k):
        k = _points(k, self.dim)
        sk = self.sigma**2 * k
        outer = sk[..., :, np.newaxis] * sk[..., np.newaxis, :]
        return (outer - np.diag(self.sigma**2)) * self.fourier(k)[..., np.newaxis, np.newaxis]

    def moment(self, order):
        """Radial moment: integral of |z|^order a(z) dz."""
        d = self.dim
        if np.all(self.sigma == self.sigma[0]):
            s = float(self.sigma[0])
            return (
                self.mass
                * s**order
                * 2.0 ** (order / 2.0)
                * special.gamma((d + order) / 2.0)
                / special.gamma(d / 2.0)
            )
        # Anisotropic plane case: |Z|^k factors into a chi(2) radial moment
        # times the angular average of (s1^2 cos^2 + s2^2 sin^2)^(k/2).
        radial = 2.0 ** (order / 2.0) * special.gamma(1.0 + order / 2.0)
        s1, s2 = self.sigma**2

        def ang(phi):
            return (s1 * np.cos(phi) ** 2 + s2 * np.sin(phi) ** 2) ** (order / 2.0)

        val, _ = integrate.quad(ang, 0.0, 2.0 * np.pi, limit=200)
        return self.mass * radial * val / (2.0 * np.pi)

    def second_moment(self):
        """Matrix of integrals z_i z_j a(z) dz."""
        return self.mass * np.diag(self.sigma**2)

    def tail_mass(self, rho):
        """Upper bound for the kernel mass outside the ball of radius rho."""
        t = rho / float(np.max(self.sigma))
        if self.dim == 1:
            return self.mass * float(special.erfc(t / math.sqrt(2.0)))
        return self.mass * math.exp(-0.5 * t * t)

    def fourier_envelope(self, s):
        """Monotone bound: |a_hat(y)| <= envelope(s) whenever |y| >= s."""
        s = np.asarray(s, dtype=float)
        return self.mass * np.exp(-0.5 * float(np.min(self.sigma)) ** 2 * s**2)

    def lattice_radius(self, tol=1e-10):
        """Smallest integer L with tail_mass(L) below tol * l1."""
        for L in range(1, 1000):
            if self.tail_mass(float(L)) <= tol * self.l1:
                return L
        raise RuntimeError("kernel tail does not decay below %g within L=1000" % tol)


class BallKernel:
    """Indicator kernel a = height on [-radius, radius], one dimension only."""

    family = "ball"

    def __init__(self, radius=1.0, height=0.5):
        if radius <= 0.0 or height <= 0.0:
            raise ValueError("radius and height must be positive")
        self.radius = float(radius)
        self.height = float(height)
        self.dim = 1

    def __repr__(self):
        return "BallKernel(radius=%g, height=%g)" % (self.radius, self.height)

    @property
    def l1(self):
        return 2.0 * self.height * self.radius

    @property
    def l2(self):
        return self.height * math.sqrt(2.0 * self.radius)

    def sample(self, x):
        x = _points(x, 1)
        r = np.abs(x[..., 0])
        edge = 1e-12 * max(self.radius, 1.0)
        vals = np.where(r <= self.radius - edge, self.height, 0.0)
        # trapezoid-friendly half value exactly on the jump
        vals = np.where(np.abs(r - self.radius) <= edge, 0.5 * self.height, vals)
        return vals

    def _u(self, k):
        k = _points(k, 1)[..., 0]
        return k, self.radius * k

    def fourier(self, k):
        k, u = self._u(k)
        small = np.abs(u) <= 0.1
        u2 = u * u
        series = self.radius * (1.0 - u2 / 6.0 + u2 * u2 / 120.0 - u2 * u2 * u2 / 5040.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            exact = np.where(small, 1.0, np.sin(np.where(small, 1.0, u)) / np.where(small, 1.0, k))
        return 2.0 * self.height * np.where(small, series, exact)

    def fourier_grad(self, k):
        k, u = self._u(k)
        small = np.abs(u) <= 0.1
        u2 = u * u
        series = self.radius**2 * (-u / 3.0 + u * u2 / 30.0 - u * u2 * u2 / 840.0)
        ksafe = np.where(small, 1.0, k)
        usafe = np.where(small, 1.0, u)
        with np.errstate(divide="ignore", invalid="ignore"):
            exact = (self.radius * ksafe * np.cos(usafe) - np.sin(usafe)) / ksafe**2
        return (2.0 * self.height * np.where(small, series, exact))[..., np.newaxis]

    def fourier_hess(self, k):
        k, u = self._u(k)
        small = np.abs(u) <= 0.1
        u2 = u * u
        series = self.radius**3 * (-1.0 / 3.0 + u2 / 10.0 - u2 * u2 / 168.0)
        ksafe = np.where(small, 1.0, k)
        usafe = np.where(small, 1.0, u)
        with np.errstate(divide="ignore", invalid="ignore"):
            exact = ((2.0 - usafe**2) * np.sin(usafe) - 2.0 * usafe * np.cos(usafe)) / ksafe**3
        return (2.0 * self.height * np.where(small, series, exact))[..., np.newaxis, np.newaxis]

    def moment(self, order):
        return 2.0 * self.height * self.radius ** (order + 1) / (order + 1.0)

    def second_moment(self):
        return np.array([[self.moment(2)]])

    def tail_mass(self, rho):
        return 2.0 * self.height * max(self.radius - rho, 0.0)

    def fourier_envelope(self, s):
        s = np.asarray(s, dtype=float)
        with np.errstate(divide="ignore"):
            cap = np.where(s > 0.0, 2.0 * self.height / np.maximum(s, 1e-300), np.inf)
        return np.minimum(self.l1, cap)

    def lattice_radius(self, tol=1e-10):
        return max(1, int(math.ceil(self.radius)))


class SampledKernel:
    """Even one-dimensional kernel given by a piecewise linear radial profile.

    The profile is sampled at increasing abscissae starting at 0 and must
    reach 0 at its last node (compact support).  All transforms,
    derivatives and moments are those of the piecewise linear interpolant,
    computed in closed form per segment with a Taylor branch near k = 0 to
    avoid cancellation.
    """

    family = "sampled"

    def __init__(self, x, values):
        x = np.asarray(x, dtype=float)
        f = np.asarray(values, dtype=float)
        if x.ndim != 1 or x.shape != f.shape or x.size < 2:
            raise ValueError("x and values must be 1-d arrays of equal length >= 2")
        if x[0] != 0.0 or np.any(np.diff(x) <= 0.0):
            raise ValueError("x must start at 0 and be strictly increasing")
        if np.any(f < 0.0):
            raise ValueError("profile values must be nonnegative")
        if f[-1] != 0.0:
            raise ValueError("profile must end at 0 (compact support)")
        if not np.any(f > 0.0):
            raise ValueError("profile is identically zero")
        self.x = x
        self.values = f
        self.dim = 1
        # segment representation f(t) = c0 + c1 t on [x_i, x_{i+1}]
        self._c1 = np.diff(f) / np.diff(x)
        self._c0 = f[:-1] - self._c1 * x[:-1]
        self.support = float(x[-1])
        self._tv = float(np.sum(np.abs(np.diff(f))))
        # half-line power moments int_0^X t^j f(t) dt for j = 0..6
        self._hm = np.array([self._half_moment(j) for j in range(7)])

    def __repr__(self):
        return "SampledKernel(%d nodes, support=%g)" % (self.x.size, self.support)

    def _half_moment(self, j):
        x0, x1 = self.x[:-1], self.x[1:]
        t0 = (x1 ** (j + 1) - x0 ** (j + 1)) / (j + 1.0)
        t1 = (x1 ** (j + 2) - x0 ** (j + 2)) / (j + 2.0)
        return float(np.sum(self._c0 * t0 + self._c1 * t1))

    @property
    def l1(self):
        return 2.0 * self._hm[0]

    @property
    def l2(self):
        dx = np.diff(self.x)
        f0, f1 = self.values[:-1], self.values[1:]
        return math.sqrt(2.0 * float(np.sum(dx * (f0 * f0 + f0 * f1 + f1 * f1) / 3.0)))

    def sample(self, x):
        x = _points(x, 1)
        return np.interp(np.abs(x[..., 0]), self.x, self.values)

    def moment(self, order):
        return 2.0 * self._hm[order]

    def second_moment(self):
        return np.array([[self.moment(2)]])

    # closed-form antiderivatives of t^m cos(kt) and t^m sin(kt), m <= 3
    @staticmethod
    def _cos_anti(m, t, k):
        s, c = np.sin(k * t), np.cos(k * t)
        if m == 0:
            return s / k
        if m == 1:
            return c / k**2 + t * s / k
        if m == 2:
            return 2.0 * t * c / k**2 + (t**2 / k - 2.0 / k**3) * s
        return (3.0 * t**2 / k**2 - 6.0 / k**4) * c + (t**3 / k - 6.0 * t / k**3) * s

    @staticmethod
    def _sin_anti(m, t, k):
        s, c = np.sin(k * t), np.cos(k * t)
        if m == 0:
            return -c / k
        if m == 1:
            return s / k**2 - t * c / k
        if m == 2:
            return 2.0 * t * s / k**2 - (t**2 / k - 2.0 / k**3) * c
        return (3.0 * t**2 / k**2 - 6.0 / k**4) * s - (t**3 / k - 6.0 * t / k**3) * c

    def _osc_moment(self, k, j, trig):
        """integral of t^j f(t) trig(kt) over the support, k away from 0."""
        anti = self._cos_anti if trig == "cos" else self._sin_anti
        kk = k[..., np.newaxis]
        x0, x1 = self.x[:-1], self.x[1:]
        total = self._c0 * (anti(j, x1, kk) - anti(j, x0, kk))
        total = total + self._c1 * (anti(j + 1, x1, kk) - anti(j + 1, x0, kk))
        return np.sum(total, axis=-1)

    def _split(self, k):
        k = _points(k, 1)[..., 0]
        small = np.abs(k) * self.support <= 0.1
        return k, small, np.where(small, 1.0, k)

    def fourier(self, k):
        k, small, ksafe = self._split(k)
        h = self._hm
        k2 = k * k
        series = 2.0 * (h[0] - k2 * h[2] / 2.0 + k2 * k2 * h[4] / 24.0 - k2 * k2 * k2 * h[6] / 720.0)
        exact = 2.0 * self._osc_moment(ksafe, 0, "cos")
        return np.where(small, series, exact)

    def fourier_grad(self, k):
        k, small, ksafe = self._split(k)
        h = self._hm
        k2 = k * k
        series = 2.0 * (-k * h[2] + k * k2 * h[4] / 6.0 - k * k2 * k2 * h[6] / 120.0)
        exact = -2.0 * self._osc_moment(ksafe, 1, "sin")
        return np.where(small, series, exact)[..., np.newaxis]

    def fourier_hess(self, k):
        k, small, ksafe = self._split(k)
        h = self._hm
        k2 = k * k
        series = 2.0 * (-h[2] + k2 * h[4] / 2.0 - k2 * k2 * h[6] / 24.0)
        exact = -2.0 * self._osc_moment(ksafe, 2, "cos")
        return np.where(small, series, exact)[..., np.newaxis, np.newaxis]

    def tail_mass(self, rho):
        if rho >= self.support:
            return 0.0
        lo = np.maximum(self.x[:-1], rho)
        hi = self.x[1:]
        width = np.clip(hi - lo, 0.0, None)
        mid = 0.5 * (np.maximum(lo, self.x[:-1]) + hi)
        vals = self._c0 + self._c1 * mid
        return 2.0 * float(np.sum(width * vals))

    def fourier_envelope(self, s):
        # integration by parts: |a_hat(k)| <= 2 TV(profile) / |k|
        s = np.asarray(s, dtype=float)
        with np.errstate(divide="ignore"):
            cap = np.where(s > 0.0, 2.0 * self._tv / np.maximum(s, 1e-300), np.inf)
        return np.minimum(self.l1, cap)

    def lattice_radius(self, tol=1e-10):
        return max(1, int(math.ceil(self.support)))


def kernel_fourier(kernel, k):
    """Kernel transform a_hat(k) with the angular-frequency convention."""
    return kernel.fourier(k)


def symbol_A_hat(kernel, y):
    """Nonnegative symbol A_hat(y) = a_hat(0) - a_hat(y)."""
    return kernel.l1 - kernel.fourier(y)


def moments(kernel):
    """First three radial moments and the second-moment matrix."""
    return (
        kernel.moment(1),
        kernel.moment(2),
        kernel.moment(3),
        kernel.second_moment(),
    )


class ModulationBounds:
    """Certified and sampled extremes of a modulation on the double cell."""

    def __init__(self, lower, upper, sampled_min, sampled_max, margin, grid_per_dim):
        self.lower = lower
        self.upper = upper
        self.sampled_min = sampled_min
        self.sampled_max = sampled_max
        self.margin = margin
        self.grid_per_dim = grid_per_dim

    def as_dict(self):
        return {
            "lower": self.lower,
            "upper": self.upper,
            "sampled_min": self.sampled_min,
            "sampled_max": self.sampled_max,
            "margin": self.margin,
            "grid_per_dim": self.grid_per_dim,
        }


_DEFAULT_CERTIFY_GRID = {1: 512, 2: 32}


class Modulation:
    """Symmetric 1-periodic modulation given by a finite Fourier sum.

    Coefficients map index pairs ``(p, q)`` (tuples of ints of length
    ``dim``) to complex amplitudes of ``exp(2*pi*i*(<p,x> + <q,y>))``.
    Construction validates realness (``c[-p,-q] == conj(c[p,q])``),
    symmetry in the two arguments (``c[q,p] == c[p,q]``), and certifies
    positive lower and finite upper bounds on a grid with a Lipschitz
    margin.
    """

    def __init__(self, dim, coefficients, certify_grid=None):
        if dim not in (1, 2):
            raise ValueError("only dimensions 1 and 2 are supported")
        self.dim = dim
        coeffs = {}
        for (p, q), c in coefficients.items():
            p = self._index(p)
            q = self._index(q)
            c = complex(c)
            if c != 0.0:
                coeffs[(p, q)] = coeffs.get((p, q), 0.0) + c
        if not coeffs:
            raise ValueError("modulation has no nonzero coefficients")
        for (p, q), c in coeffs.items():
            neg = (tuple(-i for i in p), tuple(-i for i in q))
            if neg not in coeffs or abs(coeffs[neg] - c.conjugate()) > 1e-12:
                raise ValueError("coefficients do not describe a real modulation")
            mirror = (q, p)
            if mirror not in coeffs or abs(coeffs[mirror] - c) > 1e-12:
                raise ValueError("coefficients are not symmetric in (x, y)")
        self.coeffs = dict(sorted(coeffs.items()))
        self.bandwidth = max(max(max(abs(i) for i in p), max(abs(i) for i in q)) for p, q in self.coeffs)
        self.is_constant = self.bandwidth == 0
        if self.is_constant:
            v = float(self.coeffs[((0,) * dim, (0,) * dim)].real)
            self.bounds = ModulationBounds(v, v, v, v, 0.0, None)
        else:
            grid = certify_grid or _DEFAULT_CERTIFY_GRID[dim]
            self.bounds = certify_bounds(self, grid)
        if self.bounds.lower <= 0.0:
            raise NonPositiveLowerBound(
                "certified modulation lower bound %g is not positive" % self.bounds.lower
            )

    def _index(self, idx):
        if np.isscalar(idx):
            idx = (idx,)
        idx = tuple(int(i) for i in idx)
        if len(idx) != self.dim:
            raise ValueError("index %s does not match dimension %d" % (idx, self.dim))
        return idx

    @classmethod
    def constant(cls, dim, value=1.0):
        zero = (0,) * dim
        return cls(dim, {(zero, zero): value})

    @classmethod
    def cosine_product(cls, dim, amplitude, axis=0, certify_grid=None):
        """1 + amplitude * cos(2 pi x_axis) cos(2 pi y_axis)."""
        zero = (0,) * dim
        coeffs = {(zero, zero): 1.0}
        for sp in (-1, 1):
            for sq in (-1, 1):
                p = tuple(sp if i == axis else 0 for i in range(dim))
                q = tuple(sq if i == axis else 0 for i in range(dim))
                coeffs[(p, q)] = amplitude / 4.0
        return cls(dim, coeffs, certify_grid=certify_grid)

    @property
    def mu_minus(self):
        return self.bounds.lower

    @property
    def mu_plus(self):
        return self.bounds.upper

    def pair_items(self):
        """Deterministically ordered (p, q, coefficient) triples."""
        return [(np.array(p), np.array(q), c) for (p, q), c in self.coeffs.items()]

    def eval(self, x, y):
        x = _points(x, self.dim)
        y = _points(y, self.dim)
        out = np.zeros(np.broadcast_shapes(x.shape[:-1], y.shape[:-1]), dtype=complex)
        for p, q, c in self.pair_items():
            phase = np.tensordot(x, p, axes=([-1], [0])) + np.tensordot(y, q, axes=([-1], [0]))
            out = out + c * np.exp(2j * np.pi * phase)
        return out.real

    def __repr__(self):
        return "Modulation(dim=%d, %d coefficients, bounds=[%g, %g])" % (
            self.dim,
            len(self.coeffs),
            self.bounds.lower,
            self.bounds.upper,
        )


def modulation_eval(mu, x, y):
    """Pointwise modulation values mu(x, y)."""
    return mu.eval(x, y)


def certify_bounds(mu, grid_per_dim):
    """Certified modulation bounds: grid extremes widened by a Lipschitz margin.

    The modulation is evaluated on a uniform grid of the 2d-torus through a
    zero-padded inverse FFT of its coefficient array.  Any point of the
    torus lies within half a cell diagonal of a grid node, so the sampled
    extremes widened by ``L * sqrt(2 dim) / (2 G)`` (with ``L`` the gradient
    bound ``2 pi sum |c| (|p|_1 + |q|_1)``) enclose the true range.
    """
    G = int(grid_per_dim)
    if G < 4:
        raise ValueError("grid_per_dim must be at least 4")
    d = mu.dim
    if 2 * mu.bandwidth >= G:
        raise ValueError("grid_per_dim must exceed twice the modulation bandwidth")
    arr = np.zeros((G,) * (2 * d), dtype=complex)
    lip = 0.0
    for p, q, c in mu.pair_items():
        idx = tuple(int(i) % G for i in p) + tuple(int(i) % G for i in q)
        arr[idx] += c
        lip += abs(c) * (np.sum(np.abs(p)) + np.sum(np.abs(q)))
    vals = np.fft.ifftn(arr) * G ** (2 * d)
    if float(np.max(np.abs(vals.imag))) > 1e-9 * max(1.0, float(np.max(np.abs(vals.real)))):
        raise ValueError("modulation evaluates to complex values")
    vals = vals.real
    margin = 2.0 * np.pi * float(lip) * math.sqrt(2.0 * d) / (2.0 * G)
    lo, hi = float(np.min(vals)), float(np.max(vals))
    return ModulationBounds(lo - margin, hi + margin, lo, hi, margin, G)
