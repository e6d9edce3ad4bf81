"""Independent reference solutions used to verify the main solver.

Includes the classical analytic norm-ball projectors, the closed form for
projecting onto a Euclidean ball, and a brute-force grid search over the
dual box.  The grid search rests on strong duality: the primal minimizer of
the Lagrangian at the dual maximizer is the projection, and for one or two
constraints the dual box is small enough to sweep exhaustively.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dual_oracle import approx_dual_oracle
from .model import Array, ContractViolation, ProjectionProblem


def project_l2_ball(x0: Array) -> Array:
    """Euclidean projection onto the unit l2 ball: radial rescaling."""
    x0 = np.asarray(x0, dtype=float)
    norm = float(np.linalg.norm(x0))
    return x0.copy() if norm <= 1.0 else x0 / norm


def project_linf_box(x0: Array) -> Array:
    """Euclidean projection onto the unit linf ball: componentwise clip."""
    return np.clip(np.asarray(x0, dtype=float), -1.0, 1.0)


def project_l1_ball(x0: Array) -> Array:
    """Euclidean projection onto the unit l1 ball by sort and soft threshold."""
    x0 = np.asarray(x0, dtype=float)
    if np.sum(np.abs(x0)) <= 1.0:
        return x0.copy()
    mags = np.sort(np.abs(x0))[::-1]
    cumulative = np.cumsum(mags) - 1.0
    counts = np.arange(1, x0.size + 1)
    rho = int(np.nonzero(mags * counts > cumulative)[0][-1])
    theta = cumulative[rho] / (rho + 1.0)
    return np.sign(x0) * np.maximum(np.abs(x0) - theta, 0.0)


def ball_projection_closed_form(
    x0: Array, center: Array, radius: float
) -> tuple[Array, float]:
    """Projection onto ``{x : ||x - center||^2 <= radius^2}`` and the exact
    multiplier of that squared-norm constraint.

    For an exterior point, stationarity ``2(x* - x0) + 2 lam (x* - center) = 0``
    gives ``lam* = (||x0 - center|| - radius) / radius``.
    """
    x0 = np.asarray(x0, dtype=float)
    center = np.asarray(center, dtype=float)
    dist = float(np.linalg.norm(x0 - center))
    if dist <= radius:
        return x0.copy(), 0.0
    x_star = center + radius * (x0 - center) / dist
    return x_star, (dist - radius) / radius


@dataclass(frozen=True)
class GridSpec:
    """Dual-grid density and the inner accuracy of each grid solve."""

    resolution: int = 200
    eps_ref: float = 1e-10

    def __post_init__(self):
        if self.resolution < 2:
            raise ContractViolation("resolution must be at least 2")
        if not self.eps_ref > 0:
            raise ContractViolation("eps_ref must be positive")


def _quadratic_data(problem: ProjectionProblem):
    mats, centers, levels = [], [], []
    for c in problem.constraints:
        meta = c.meta or {}
        if meta.get("type") == "quadratic":
            A = meta["A"]
        elif meta.get("type") == "quadratic-factored":
            A = meta["materialize"]()
        else:
            return None
        mats.append(np.asarray(A, dtype=float))
        centers.append(np.asarray(meta["center"], dtype=float))
        levels.append(float(meta["c"]))
    return mats, centers, levels


def _dual_values_quadratic(problem, quad, lams: Array) -> tuple[Array, Array]:
    # For quadratics the inner minimizer solves the stationarity system
    # (I + sum_i lam_i A_i) x = x0 + sum_i lam_i A_i c_i exactly, which is
    # both faster and independent of the iterative inner solver.
    mats, centers, levels = quad
    x0 = problem.x0
    n, m = problem.n, problem.m
    K = lams.shape[0]
    vals = np.empty(K)
    xs = np.empty((K, n))
    mat_center = [A @ c for A, c in zip(mats, centers)]
    eye = np.eye(n)
    chunk = max(1, (1 << 22) // (n * n))  # ~32 MB of stacked systems at a time
    for start in range(0, K, chunk):
        sl = slice(start, min(K, start + chunk))
        lam_c = lams[sl]
        systems = np.broadcast_to(eye, (lam_c.shape[0], n, n)).copy()
        rhs = np.broadcast_to(x0, (lam_c.shape[0], n)).copy()
        for i in range(m):
            systems += lam_c[:, i, None, None] * mats[i]
            rhs += lam_c[:, i, None] * mat_center[i]
        X = np.linalg.solve(systems, rhs[..., None])[..., 0]
        v = np.sum((X - x0) ** 2, axis=1)
        for i in range(m):
            d = X - centers[i]
            v += lam_c[:, i] * (np.einsum("ki,ij,kj->k", d, mats[i], d) - levels[i])
        vals[sl] = v
        xs[sl] = X
    return vals, xs


def _dual_values_generic(problem, lams: Array, eps_ref: float) -> tuple[Array, Array]:
    vals = np.empty(lams.shape[0])
    xs = np.empty((lams.shape[0], problem.n))
    warm = None  # neighboring grid points have neighboring minimizers
    for i, lam in enumerate(lams):
        triple = approx_dual_oracle(problem, lam, eps_ref, warm_start=warm)
        warm = triple.x_lambda
        vals[i] = triple.v
        xs[i] = triple.x_lambda
    return vals, xs


def brute_force_dual_grid(
    problem: ProjectionProblem,
    spec: GridSpec = GridSpec(),
    pass_values: list | None = None,
) -> tuple[Array, Array, float]:
    """Exhaustive dual-box search returning ``(x_ref, lambda_ref, dual_value)``.

    Sweeps a full ``resolution**m`` grid over ``[0, R]^m``, then refines twice
    around the best point with grids one coarse pitch wide.  Quadratic
    constraint systems are solved in closed form; other oracles fall back to
    high-accuracy iterative solves.  ``pass_values``, when given, collects the
    best dual value after each pass (nondecreasing by construction).
    """
    if problem.m > 2:
        raise ContractViolation("the dual grid search supports m <= 2")
    quad = _quadratic_data(problem)
    R = problem.R

    def evaluate(lams):
        if quad is not None:
            return _dual_values_quadratic(problem, quad, lams)
        return _dual_values_generic(problem, lams, spec.eps_ref)

    lo = np.zeros(problem.m)
    hi = np.full(problem.m, R)
    best_v, best_lam, best_x = -np.inf, None, None
    for _ in range(3):  # full sweep plus two refinements
        axes = [np.linspace(lo[i], hi[i], spec.resolution) for i in range(problem.m)]
        if problem.m == 1:
            lams = axes[0][:, None]
        else:
            grid = np.meshgrid(*axes, indexing="ij")
            lams = np.stack([g.ravel() for g in grid], axis=-1)
        vals, xs = evaluate(lams)
        idx = int(np.argmax(vals))  # first maximum keeps ties deterministic
        if vals[idx] > best_v:
            best_v, best_lam, best_x = float(vals[idx]), lams[idx].copy(), xs[idx].copy()
        if pass_values is not None:
            pass_values.append(best_v)
        pitch = (hi - lo) / (spec.resolution - 1)
        lo = np.maximum(0.0, best_lam - pitch)
        hi = np.minimum(R, best_lam + pitch)
    return best_x, best_lam, best_v
