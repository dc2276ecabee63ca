"""Random builders shared by the test modules."""

from pathlib import Path

import numpy as np
import pytest

from qsgen.generators import StochGen, StructureData, random_representation
from qsgen.matrix_space import SuperOperator

FIXTURES = Path(__file__).parent / "fixtures"


def random_matrix(rng, rows, cols=None, scale=1.0):
    cols = rows if cols is None else cols
    return scale * (rng.normal(size=(rows, cols)) + 1j * rng.normal(size=(rows, cols)))


def random_hermitian(rng, n, scale=1.0):
    z = random_matrix(rng, n, scale=scale)
    return (z + z.conj().T) / 2


def random_unitary(rng, n):
    q, r = np.linalg.qr(random_matrix(rng, n))
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_superop(rng, n_in, n_out=None, scale=1.0):
    n_out = n_in if n_out is None else n_out
    return SuperOperator(n_in, n_out, random_matrix(rng, n_out * n_out, n_in * n_in, scale))


def random_hermitian_preserving(rng, n, scale=1.0):
    s = random_superop(rng, n, scale=scale)
    return 0.5 * (s + s.dagger())


def random_kraus(rng, n, k=2, scale=1.0):
    return SuperOperator.kraus([random_matrix(rng, n, scale=scale) for _ in range(k)])


def random_lindblad(rng, n, k=2, scale=0.5):
    """GKSL generator a -> i[h, a] + sum v* a v - (v* v a + a v* v) / 2."""
    h = random_hermitian(rng, n, scale)
    vs = [random_matrix(rng, n, scale=scale) for _ in range(k)]

    def f(a):
        out = 1j * (h @ a - a @ h)
        for v in vs:
            vv = v.conj().T @ v
            out = out + v.conj().T @ a @ v - 0.5 * (vv @ a + a @ vv)
        return out

    return SuperOperator.from_function(f, n)


def random_stochgen(rng, n, d, scale=1.0):
    return StochGen(n, d, random_matrix(rng, (d + 1) ** 2 * n * n, n * n, scale).reshape(d + 1, d + 1, n * n, n * n))


def random_structure_data(rng, n, d, unital=True, scale=0.5):
    pi = random_representation(n, d, d if unital else max(d - 1, 0), rng)
    return StructureData(pi, random_matrix(rng, n * d, n, scale), random_hermitian(rng, n, scale))


def random_gamma(rng, m, d, scale=1.0):
    return random_matrix(rng, m, d, scale)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def fixtures_dir():
    return FIXTURES
