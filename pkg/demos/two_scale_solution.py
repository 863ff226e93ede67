"""Solve the scaled problem and its effective limit side by side.

The same right side is fed to the scaled nonlocal resolvent and to the
constant-coefficient effective resolvent.  The two solutions are sampled
on a grid and their mean-square distance, relative to the right side, is
compared against the certified linear bound.  Halving eps should halve
the error.

    python3 demos/two_scale_solution.py
    python3 demos/two_scale_solution.py --rhs bump --width 0.4
"""

import argparse

import numpy as np

from nonloc_homog import constants, corrector, fiber, homogenize, model


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sigma", type=float, default=0.3, help="Gaussian kernel width")
    parser.add_argument("--mass", type=float, default=64.0, help="kernel L1 norm")
    parser.add_argument("--amplitude", type=float, default=0.5, help="cosine modulation amplitude")
    parser.add_argument("--modes", type=int, default=32, help="mode cube half-width")
    parser.add_argument("--rhs", choices=["plane", "bump"], default="plane")
    parser.add_argument("--wavenumber", type=float, default=3.0, help="plane-wave frequency")
    parser.add_argument("--width", type=float, default=0.5, help="bump width")
    parser.add_argument("--eps", type=float, default=[2.0**-4, 2.0**-5, 2.0**-6], nargs="+")
    args = parser.parse_args()

    kernel = model.GaussianKernel(args.sigma, mass=args.mass, dim=1)
    mu = model.Modulation.cosine_product(1, args.amplitude)
    trunc = fiber.Truncation(args.modes, 1)

    g0 = corrector.effective_matrix_corrector(kernel, mu, trunc)
    chain = constants.threshold_chain(kernel, mu)
    print("effective coefficient: %.12g" % g0.matrix[0, 0])
    print("certified resolvent constant: %.6g" % chain.C_resolvent)

    if args.rhs == "plane":
        rhs = homogenize.PlaneWaveRhs([((args.wavenumber,), 1.0)])
    else:
        rhs = homogenize.GaussianBumpRhs(args.width, center=0.5)

    grid = np.linspace(0.0, 1.0, 201)
    print("\n%12s %14s %14s %12s" % ("eps", "rel error", "bound", "error/eps"))
    prev = None
    for eps in sorted(args.eps, reverse=True):
        u_eps, u_0, err = homogenize.solve_pair(kernel, mu, g0, rhs, eps, trunc, domain_grid=grid)
        print("%12.6g %14.6e %14.6e %12.6f" % (eps, err, chain.C_resolvent * eps, err / eps))
        prev = (eps, err, u_eps, u_0)

    eps, err, u_eps, u_0 = prev
    gap = np.max(np.abs(u_eps - u_0)) / max(np.max(np.abs(u_0)), 1e-300)
    print("\nat eps = %g the sampled solutions differ by %.3e (relative sup norm)" % (eps, gap))
    print("   grid point      scaled real      effective real")
    for idx in range(0, len(grid), 40):
        print("%12.3f %16.8e %16.8e" % (grid[idx], u_eps[idx].real, u_0[idx].real))


if __name__ == "__main__":
    main()
