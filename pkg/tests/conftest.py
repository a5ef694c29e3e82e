"""Independent oracles and random instance generators shared by the tests.

The oracles here deliberately avoid the package's own solvers: LCP solutions
come from enumerating every active set, the 1-d Skorohod map from its explicit
running-minimum formula, and 2x2 inverses from the adjugate.
"""
from itertools import chain, combinations

import numpy as np
import pytest


def brute_force_lcp(w, r):
    """Solve z = w + r y, z >= 0, y >= 0, z . y = 0 by trying every active set.

    Returns the solution with the smallest residual among feasible candidates.
    """
    d = len(w)
    best = None
    for active in chain.from_iterable(combinations(range(d), k) for k in range(d + 1)):
        y = np.zeros(d)
        if active:
            idx = list(active)
            y[idx] = np.linalg.solve(r[np.ix_(idx, idx)], -w[idx])
        z = w + r @ y
        z[list(active)] = 0.0
        violation = max(0.0, -y.min(), -z.min())
        if best is None or violation < best[0]:
            best = (violation, z, y)
    return best[1], best[2]


def reflect_1d(x):
    """Explicit one-dimensional Skorohod map of a sampled driver x with x[0] >= 0."""
    x = np.asarray(x, dtype=float)
    low = np.minimum.accumulate(np.minimum(x, 0.0))
    return x - low, -low


def adjugate_inverse(m):
    (a, b), (c, d) = m
    det = a * d - b * c
    return np.array([[d, -b], [-c, a]]) / det


def random_q(rng, d, rho):
    """Nonnegative zero-diagonal matrix with spectral radius ``rho``."""
    q = rng.uniform(0.0, 1.0, (d, d)) * (rng.uniform(size=(d, d)) < 0.7)
    np.fill_diagonal(q, 0.0)
    radius = max(abs(np.linalg.eigvals(q)))
    if radius < 1e-9:
        q = np.ones((d, d)) - np.eye(d)
        radius = d - 1.0
    return q * (rho / radius)


def random_m_matrix(rng, d, rho_max=0.9):
    """Random reflection nonsingular M-matrix, R = I - Q with rho(Q) <= rho_max."""
    return np.eye(d) - random_q(rng, d, rng.uniform(0.05, rho_max))


def random_spd(rng, d):
    b = rng.standard_normal((d, d))
    return b @ b.T + 0.2 * np.eye(d)


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)
