import numpy as np
import pytest

from chiralspin import CascadeSpec, DensityMatrix, SpinSite
from chiralspin.core import HilbertSpace, spin_factor


@pytest.fixture
def rng():
    # every "random" matrix in the suite descends from this fixed seed
    return np.random.default_rng(1234567)


@pytest.fixture
def two_spins():
    return (SpinSite(0.5, 0.0, "A"), SpinSite(0.5, 2.5e-7, "B"))


@pytest.fixture
def pair_spec(two_spins):
    def make(gamma=1.0, gamma_prime=0.0, kd=0.7):
        d = two_spins[1].position_z - two_spins[0].position_z
        return CascadeSpec(gamma, gamma_prime, kd / d, two_spins)

    return make


def random_density(rng, dim):
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    rho = g @ g.conj().T
    return rho / np.trace(rho)


@pytest.fixture
def random_density_factory(rng):
    def make(dim):
        return random_density(rng, dim)

    return make


@pytest.fixture
def two_spin_space():
    return HilbertSpace((spin_factor(0.5), spin_factor(0.5)))


@pytest.fixture
def random_state_factory(rng):
    def make(space):
        return DensityMatrix(space, random_density(rng, space.dim))

    return make
