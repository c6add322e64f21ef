import itertools

import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


def random_complex(rng, *shape):
    return rng.normal(size=shape) + 1j * rng.normal(size=shape)


def random_hermitian(rng, n):
    a = random_complex(rng, n, n)
    return a + a.conj().T


def random_skew(rng, n):
    a = random_complex(rng, n, n)
    return a - a.T


def random_factor(rng, r, n):
    """r x N with orthonormal rows, via numpy's QR (independent of the package)."""
    q, _ = np.linalg.qr(random_complex(rng, n, r))
    return q.T.conj()


def pfaffian_expansion(a):
    """Reference Pfaffian by expansion along the first row."""
    n = a.shape[0]
    if n == 0:
        return 1.0
    if n % 2:
        return 0.0
    total = 0.0
    for j in range(1, n):
        rest = [k for k in range(1, n) if k != j]
        total += (-1) ** (j - 1) * a[0, j] * pfaffian_expansion(a[np.ix_(rest, rest)])
    return total


def det_pmf(k):
    """P(Y = S) = |det(K - I_{complement})| for every subset, bitmask-indexed."""
    n = k.shape[0]
    out = np.zeros(2**n)
    for code in range(2**n):
        d = np.diag([0.0 if (code >> i) & 1 else 1.0 for i in range(n)])
        out[code] = abs(np.linalg.det(k - d))
    return out


def subsets(n):
    for size in range(n + 1):
        yield from itertools.combinations(range(1, n + 1), size)


def bitmask(subset):
    return sum(1 << (k - 1) for k in subset)
