"""Shared randomized-input builders for the test suite.

All randomness is seeded; tests are deterministic.
"""

import numpy as np
import pytest

from msglass.model import MixtureModel, check_convexity
from msglass.orderparam import DiscretePair


def random_pair(rng, k, n, qbar=0.9):
    """Random admissible pair: strictly increasing weights, monotone columns."""
    m = np.sort(rng.uniform(0.05, 1.0, size=k))
    m[-1] = 1.0
    # enforce strict increase
    for i in range(1, k):
        m[i] = max(m[i], m[i - 1] + 1e-4)
    m = np.minimum(m, 1.0)
    m[-1] = 1.0
    q = np.sort(rng.uniform(0.0, qbar, size=(k, n)), axis=0)
    return DiscretePair(m, q)


def random_model(rng, n, max_p=3, with_field=False):
    """Random mixture with symmetric nonnegative tensors (not nec. convex)."""
    lam = rng.uniform(0.2, 1.0, size=n)
    lam = lam / lam.sum()
    h = rng.uniform(0.0, 1.0, size=n) if with_field else np.zeros(n)
    terms = []
    for p in range(1, max_p + 1):
        coeffs = {}
        for _ in range(n):
            tup = tuple(sorted(rng.integers(0, n, size=p)))
            c = float(rng.uniform(0.1, 1.0))
            import itertools

            for perm in set(itertools.permutations(tup)):
                coeffs[perm] = c
        terms.append((p, coeffs))
    return MixtureModel([f"s{i}" for i in range(n)], lam, h, terms)


def random_h3strict_two_species(rng, c_min=0.1):
    """Two-species quadratic model with cross-coupling >= c_min, H3strict.

    The quadratic coefficient matrix is made diagonally dominant so strict
    convexity holds by construction; the grid check is still run and the
    model resampled on the (unexpected) failure.
    """
    for _ in range(50):
        c = float(rng.uniform(c_min, 0.8))
        a = float(rng.uniform(c + 0.1, c + 1.5))
        b = float(rng.uniform(c + 0.1, c + 1.5))
        lam = rng.uniform(0.25, 0.75)
        lam = np.array([lam, 1.0 - lam])
        terms = [(2, {(0, 0): a, (1, 1): b, (0, 1): c, (1, 0): c})]
        model = MixtureModel(("a", "b"), lam, np.zeros(2), terms)
        ok, _ = check_convexity(model, mode="H3strict", grid_resolution=6)
        if ok:
            return model
    raise RuntimeError("could not draw an H3strict model")


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)
