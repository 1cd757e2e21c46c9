import math

import numpy as np
import pytest

from entcert import canonical_chsh_strategy, chsh_game

QVAL_CHSH = (2.0 + math.sqrt(2.0)) / 4.0


@pytest.fixture(scope="session")
def chsh():
    return chsh_game()


@pytest.fixture(scope="session")
def canonical():
    return canonical_chsh_strategy()


def random_density(dim: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_pure(dim: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)


def random_distribution(size: int, rng: np.random.Generator) -> np.ndarray:
    p = rng.random(size) + 1e-3
    return p / p.sum()
