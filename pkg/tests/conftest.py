import numpy as np
import pytest

from vqemd import chem
from vqemd.pipeline import HamiltonianPipeline
from vqemd.qsim import load_athens_model
from vqemd.vqe import QuantumBackend


@pytest.fixture(scope="session")
def h2():
    return chem.h2_molecule(0.735)

@pytest.fixture(scope="session")
def h3plus():
    return chem.h3plus_molecule(0.985, 0.985, 60.0)


@pytest.fixture(scope="session")
def h2_ao(h2):
    return chem.compute_ao_integrals(h2)


@pytest.fixture(scope="session")
def h2_mo(h2_ao):
    return chem.run_rhf(h2_ao, 2)


@pytest.fixture(scope="session")
def h2_parity(h2):
    """H2 parity-reduced mapping result at 0.735 angstrom."""
    return HamiltonianPipeline("parity2").build(h2)


@pytest.fixture(scope="session")
def athens():
    return load_athens_model()


@pytest.fixture()
def exact_backend():
    return QuantumBackend(mode="exact-matrix", seed=7)


@pytest.fixture()
def shot_backend():
    return QuantumBackend(mode="noiseless-shots", shots=8192, seed=7)


@pytest.fixture()
def noisy_backend(athens):
    return QuantumBackend(mode="noisy-shots", shots=8192, noise_model=athens, seed=7)


def rng(seed=0):
    return np.random.default_rng(seed)
