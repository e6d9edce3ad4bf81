import numpy as np
import pytest

from fastproj.model import quadratic_constraint, quadratic_problem


def fd_gradient(f, x, step=1e-6):
    """Central finite differences, the standard derivative oracle for tests."""
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = step
        g[i] = (f(x + e) - f(x - e)) / (2.0 * step)
    return g


def unit_ball_problem(x0, R=None):
    """Projection onto the unit l2 ball as a quadratic-constraint instance."""
    x0 = np.asarray(x0, dtype=float)
    if R is None:
        R = max(1.0, 2.0 * float(np.linalg.norm(x0)))
    quad = quadratic_constraint(np.eye(x0.size), np.zeros(x0.size), 1.0)
    return quadratic_problem(x0, [quad], R)


def ball_dual_value(x0, lam):
    """Closed-form dual of unit-ball projection: lam ||x0||^2/(1+lam) - lam."""
    sq = float(np.asarray(x0) @ np.asarray(x0))
    return lam * sq / (1.0 + lam) - lam


def ball_dual_gradient(x0, lam):
    sq = float(np.asarray(x0) @ np.asarray(x0))
    return sq / (1.0 + lam) ** 2 - 1.0


def ball_primal_minimizer(x0, lam):
    return np.asarray(x0, dtype=float) / (1.0 + lam)


def random_psd(rng, n, spectrum=None):
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    if spectrum is None:
        spectrum = rng.uniform(0.1, 1.0, n)
        spectrum[int(rng.integers(n))] = 1.0
    A = (q * spectrum) @ q.T
    return 0.5 * (A + A.T)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
