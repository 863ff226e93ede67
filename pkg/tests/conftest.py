"""Shared fixtures: the two reference configurations used across the suite.

The one-dimensional reference pairs a sigma=0.3 Gaussian kernel of mass 64
with the modulation 1 + (1/2) cos(2 pi x) cos(2 pi y) at truncation N=32.
The mass puts the sweep window into the linear-rate regime while every
scale-invariant quantity (spectral thresholds, projector constants, slopes)
matches the unit-mass kernel exactly.  The two-dimensional reference uses
an isotropic sigma=0.3 Gaussian of mass 4096 with amplitude 1/4 on the
first axis at N=8.
"""

import numpy as np
import pytest

from nonloc_homog import constants, corrector, fiber, model


@pytest.fixture(scope="session")
def std_kernel():
    return model.GaussianKernel(0.3, mass=64.0, dim=1)


@pytest.fixture(scope="session")
def unit_kernel():
    return model.GaussianKernel(0.3, mass=1.0, dim=1)


@pytest.fixture(scope="session")
def wide_kernel():
    return model.GaussianKernel(1.0, mass=1.0, dim=1)


@pytest.fixture(scope="session")
def ball_kernel():
    return model.BallKernel(1.0, 0.5)


@pytest.fixture(scope="session")
def std_mu():
    return model.Modulation.cosine_product(1, 0.5)


@pytest.fixture(scope="session")
def flat_mu():
    return model.Modulation.constant(1, 1.0)


@pytest.fixture(scope="session")
def std_trunc():
    return fiber.Truncation(32, 1)


@pytest.fixture(scope="session")
def std_family(std_kernel, std_mu, std_trunc):
    return fiber.FiberFamily(std_kernel, std_mu, std_trunc)


@pytest.fixture(scope="session")
def unit_family(unit_kernel, std_mu, std_trunc):
    return fiber.FiberFamily(unit_kernel, std_mu, std_trunc)


@pytest.fixture(scope="session")
def std_chain(std_kernel, std_mu):
    return constants.threshold_chain(std_kernel, std_mu)


@pytest.fixture(scope="session")
def std_g0(std_family):
    return corrector._corrector_from_family(std_family)


@pytest.fixture(scope="session")
def d2_kernel():
    return model.GaussianKernel(0.3, mass=4096.0, dim=2)


@pytest.fixture(scope="session")
def d2_mu():
    return model.Modulation.cosine_product(2, 0.25, axis=0)


@pytest.fixture(scope="session")
def d2_trunc():
    return fiber.Truncation(8, 2)


@pytest.fixture()
def rng():
    return np.random.RandomState(20260816)
