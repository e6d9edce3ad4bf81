"""Problem data: constraint oracles, projection instances, Lagrangian helpers.

A projection instance asks for the Euclidean projection of a query point
``x0`` onto the set ``{x : h_i(x) <= 0, i = 1..m}`` described by smooth
convex constraint oracles.  Everything here is immutable after construction
and safe to share across threads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

Array = np.ndarray


class ContractViolation(ValueError):
    """An argument broke a documented precondition."""


class NumericalFailure(RuntimeError):
    """A computation lost numerical validity (non-finite values, PD loss)."""

    def __init__(self, message: str, payload=None):
        super().__init__(message)
        self.payload = payload


def _readonly(a) -> Array:
    out = np.array(a, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class ConstraintOracle:
    """One smooth convex constraint ``h(x) <= 0``.

    ``eval`` maps a point of shape ``(n,)`` to the constraint value and
    ``grad`` to its gradient.  Both must also broadcast over a leading batch
    axis (``(K, n) -> (K,)`` values, ``(K, n) -> (K, n)`` gradients); the
    grid-search reference solver relies on that.  ``lipschitz_G`` bounds
    ``|h(x) - h(y)| / ||x - y||`` on the declared working region and
    ``smoothness_L`` bounds the gradient's Lipschitz constant everywhere.

    ``meta``, when present, carries the defining data of structured
    constraints (used for serialization and closed-form reference solves);
    it never influences ``eval``/``grad``.
    """

    eval: Callable[[Array], Array]
    grad: Callable[[Array], Array]
    lipschitz_G: float
    smoothness_L: float
    meta: dict | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.lipschitz_G < 0 or self.smoothness_L < 0:
            raise ContractViolation("Lipschitz and smoothness bounds must be nonnegative")


@dataclass(frozen=True)
class ProjectionProblem:
    """Query point, constraint system and the dual multiplier box radius R."""

    x0: Array
    constraints: tuple[ConstraintOracle, ...]
    R: float

    def __post_init__(self):
        object.__setattr__(self, "x0", _readonly(self.x0))
        object.__setattr__(self, "constraints", tuple(self.constraints))
        if self.x0.ndim != 1 or self.x0.size < 1:
            raise ContractViolation("x0 must be a nonempty 1-D vector")
        if len(self.constraints) < 1:
            raise ContractViolation("at least one constraint is required")
        if not self.R >= 1.0:
            raise ContractViolation("R must satisfy R >= 1")

    @property
    def n(self) -> int:
        return self.x0.size

    @property
    def m(self) -> int:
        return len(self.constraints)

    def max_lipschitz(self) -> float:
        return max(c.lipschitz_G for c in self.constraints)

    def max_smoothness(self) -> float:
        return max(c.smoothness_L for c in self.constraints)


@dataclass(frozen=True)
class SolverConfig:
    """Knobs for the projection solver.

    ``epsilon`` is the target accuracy.  When ``epsilon_tilde_override`` is
    absent the inner accuracy follows the guaranteed schedule
    ``eps**4 / (256 (m R G)**6)``; the override exposes the practical regime
    (e.g. ``500 * eps**2``).  ``engine`` picks the dual maximizer;
    ``"bisection"`` is valid only for a single constraint.
    """

    epsilon: float
    epsilon_tilde_override: float | None = None
    engine: str = "ellipsoid"
    max_outer_iterations: int = 600
    max_doubling_rounds: int = 16
    warm_start: bool = False
    boundary_fraction: float = 0.9
    rng_seed: int = 0

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ContractViolation("epsilon must be positive")
        if self.epsilon_tilde_override is not None:
            if not 0 < self.epsilon_tilde_override <= self.epsilon:
                raise ContractViolation("epsilon_tilde_override must lie in (0, epsilon]")
        if self.engine not in ("ellipsoid", "bisection"):
            raise ContractViolation(f"unknown engine {self.engine!r}")
        if self.max_outer_iterations < 1:
            raise ContractViolation("max_outer_iterations must be positive")
        if self.max_doubling_rounds < 0:
            raise ContractViolation("max_doubling_rounds must be nonnegative")
        if not 0.0 < self.boundary_fraction < 1.0:
            raise ContractViolation("boundary_fraction must lie in (0, 1)")


def eval_constraints(problem: ProjectionProblem, x: Array) -> Array:
    """Stack the m constraint values at ``x`` into one vector."""
    x = np.asarray(x, dtype=float)
    if x.shape != (problem.n,):
        raise ContractViolation(f"point has shape {x.shape}, expected ({problem.n},)")
    return np.array([float(c.eval(x)) for c in problem.constraints])


def lagrangian_value(problem: ProjectionProblem, x: Array, lam: Array) -> float:
    """``||x - x0||^2 + lam . h(x)`` for elementwise-nonnegative ``lam``."""
    lam = _check_multipliers(problem, lam)
    d = np.asarray(x, dtype=float) - problem.x0
    return float(d @ d + lam @ eval_constraints(problem, x))


def lagrangian_gradient(problem: ProjectionProblem, x: Array, lam: Array) -> Array:
    """Gradient in x of the Lagrangian: ``2(x - x0) + sum_i lam_i grad h_i(x)``."""
    lam = _check_multipliers(problem, lam)
    x = np.asarray(x, dtype=float)
    if x.shape != (problem.n,):
        raise ContractViolation(f"point has shape {x.shape}, expected ({problem.n},)")
    g = 2.0 * (x - problem.x0)
    for li, c in zip(lam, problem.constraints):
        if li != 0.0:
            g = g + li * c.grad(x)
    return g


def _check_multipliers(problem: ProjectionProblem, lam) -> Array:
    lam = np.asarray(lam, dtype=float)
    if lam.shape != (problem.m,):
        raise ContractViolation(f"lambda has shape {lam.shape}, expected ({problem.m},)")
    if np.any(lam < 0):
        raise ContractViolation("lambda must be elementwise nonnegative")
    return lam


def quadratic_constraint(
    A: Array,
    center: Array,
    c: float,
    working_radius: float | None = None,
) -> ConstraintOracle:
    """Oracle for ``(x - center)^T A (x - center) - c <= 0`` with A symmetric PSD.

    The Lipschitz bound is region dependent for quadratics; it is attached
    for ``working_radius`` (a bound on the norm of any point the solver may
    visit).  When omitted, a radius covering the constraint's own sublevel
    set is used; instance loaders pass the instance-wide radius instead.
    """
    A = np.array(A, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n):
        raise ContractViolation("A must be square")
    if not np.allclose(A, A.T, rtol=1e-10, atol=1e-12):
        raise ContractViolation("A must be symmetric")
    A = _readonly(0.5 * (A + A.T))
    center = _readonly(center)
    if center.shape != (n,):
        raise ContractViolation("center must have the same dimension as A")
    if not c > 0:
        raise ContractViolation("level c must be positive")
    # Failed factorization detects indefiniteness; the jitter admits PSD
    # matrices with zero eigenvalues.
    scale = max(1.0, float(np.max(np.abs(np.diag(A)))))
    try:
        np.linalg.cholesky(A + (1e-12 * scale) * np.eye(n))
    except np.linalg.LinAlgError as err:
        raise ContractViolation("A must be positive semidefinite") from err

    spectral = float(np.linalg.norm(A, 2))
    eigs = np.linalg.eigvalsh(A)
    sigma_min = max(float(eigs[0]), 1e-12)
    if working_radius is None:
        working_radius = float(np.linalg.norm(center) + np.sqrt(c / sigma_min) + 1.0)

    def _eval(x, A=A, center=center, c=c):
        d = np.asarray(x, dtype=float) - center
        return np.einsum("...i,ij,...j->...", d, A, d) - c

    def _grad(x, A=A, center=center):
        return 2.0 * ((np.asarray(x, dtype=float) - center) @ A)

    return ConstraintOracle(
        eval=_eval,
        grad=_grad,
        lipschitz_G=2.0 * spectral * working_radius,
        smoothness_L=2.0 * spectral,
        meta={
            "type": "quadratic",
            "A": A,
            "center": center,
            "c": float(c),
            "sigma_min": sigma_min,
            "spectral_norm": spectral,
        },
    )


def factored_quadratic_constraint(
    eigenvalues: Array,
    reflectors: Array,
    center: Array,
    c: float,
    working_radius: float | None = None,
) -> ConstraintOracle:
    """Quadratic constraint with ``A = Q diag(eigenvalues) Q^T`` kept factored.

    ``Q`` is the product of the Householder reflections ``I - 2 v v^T`` built
    from the (normalized) columns of ``reflectors``, stored in compact WY form
    ``Q = I - Y T Y^T`` so that evaluating the constraint costs O(n * J)
    instead of O(n^2).  Mathematically identical to ``quadratic_constraint``
    on the materialized matrix.
    """
    eigenvalues = np.asarray(eigenvalues, dtype=float)
    center = _readonly(center)
    n = center.size
    if eigenvalues.shape != (n,) or np.any(eigenvalues < 0):
        raise ContractViolation("eigenvalues must be a nonnegative vector of length n")
    if not c > 0:
        raise ContractViolation("level c must be positive")
    V = np.asarray(reflectors, dtype=float)
    if V.ndim != 2 or V.shape[0] != n:
        raise ContractViolation("reflectors must have shape (n, J)")
    norms = np.linalg.norm(V, axis=0)
    if np.any(norms == 0.0) or not np.all(np.isfinite(norms)):
        raise ContractViolation("reflector columns must be nonzero and finite")
    V = V / norms
    J = V.shape[1]

    # Compact WY accumulation of H_1 ... H_J, H_j = I - 2 v_j v_j^T.
    T = np.zeros((J, J))
    for k in range(J):
        T[k, k] = 2.0
        if k:
            T[:k, k] = -2.0 * (T[:k, :k] @ (V[:, :k].T @ V[:, k]))
    Y = _readonly(V)
    T = _readonly(T)
    D = _readonly(eigenvalues)

    def _apply_q_rows(z, Y=Y, T=T):
        # rows of z left-multiplied by Q^T, i.e. columns by Q
        return z - ((z @ Y) @ T) @ Y.T

    def _apply_qt_rows(z, Y=Y, T=T):
        return z - ((z @ Y) @ T.T) @ Y.T

    def _eval(x, center=center, D=D, c=c):
        u = _apply_q_rows(np.asarray(x, dtype=float) - center)
        return np.einsum("...i,...i->...", u, u * D) - c

    def _grad(x, center=center, D=D):
        u = _apply_q_rows(np.asarray(x, dtype=float) - center)
        return 2.0 * _apply_qt_rows(u * D)

    spectral = float(np.max(eigenvalues))
    sigma_min = max(float(np.min(eigenvalues)), 1e-12)
    if working_radius is None:
        working_radius = float(np.linalg.norm(center) + np.sqrt(c / sigma_min) + 1.0)

    def _materialize(Y=Y, T=T, D=D):
        Q = np.eye(n) - Y @ T @ Y.T
        return Q @ np.diag(D) @ Q.T

    return ConstraintOracle(
        eval=_eval,
        grad=_grad,
        lipschitz_G=2.0 * spectral * working_radius,
        smoothness_L=2.0 * spectral,
        meta={
            "type": "quadratic-factored",
            "materialize": _materialize,
            "center": center,
            "c": float(c),
            "sigma_min": sigma_min,
            "spectral_norm": spectral,
        },
    )


def quadratic_working_radius(
    x0: Array, quadratics: Sequence[ConstraintOracle]
) -> float:
    """Instance-wide working radius: ``||x0|| + max ||center|| + max radius + 1``."""
    x0 = np.asarray(x0, dtype=float)
    centers = [np.linalg.norm(q.meta["center"]) for q in quadratics]
    radii = [np.sqrt(q.meta["c"] / q.meta["sigma_min"]) for q in quadratics]
    return float(np.linalg.norm(x0) + max(centers) + max(radii) + 1.0)


def _rebuild_with_radius(oracle: ConstraintOracle, rho: float) -> ConstraintOracle:
    meta = oracle.meta or {}
    if meta.get("type") == "quadratic":
        return quadratic_constraint(meta["A"], meta["center"], meta["c"], working_radius=rho)
    spectral = meta["spectral_norm"]
    return ConstraintOracle(
        eval=oracle.eval,
        grad=oracle.grad,
        lipschitz_G=2.0 * spectral * rho,
        smoothness_L=oracle.smoothness_L,
        meta=meta,
    )


def quadratic_problem(
    x0: Array, quadratics: Sequence[ConstraintOracle], R: float
) -> ProjectionProblem:
    """Assemble a problem from quadratic oracles, fixing their Lipschitz bounds
    to the instance-wide working radius (which needs x0 and all constraints)."""
    rho = quadratic_working_radius(x0, quadratics)
    return ProjectionProblem(
        x0=x0,
        constraints=tuple(_rebuild_with_radius(q, rho) for q in quadratics),
        R=R,
    )


def problem_to_json(problem: ProjectionProblem) -> str:
    """Serialize an instance whose constraints are quadratics to the canonical
    JSON document (dense row-major A)."""
    cons = []
    for c in problem.constraints:
        meta = c.meta or {}
        if meta.get("type") == "quadratic":
            A = meta["A"]
        elif meta.get("type") == "quadratic-factored":
            A = meta["materialize"]()
        else:
            raise ContractViolation("only quadratic constraints serialize to JSON")
        cons.append(
            {
                "type": "quadratic",
                "A": [[float(v) for v in row] for row in A],
                "center": [float(v) for v in meta["center"]],
                "c": float(meta["c"]),
            }
        )
    doc = {
        "n": problem.n,
        "m": problem.m,
        "x0": [float(v) for v in problem.x0],
        "R": float(problem.R),
        "constraints": cons,
    }
    return json.dumps(doc, indent=2)


def problem_from_json(text: str) -> ProjectionProblem:
    doc = json.loads(text)
    try:
        x0 = np.asarray(doc["x0"], dtype=float)
        R = float(doc["R"])
        raw = doc["constraints"]
        n = int(doc["n"])
        m = int(doc["m"])
    except (KeyError, TypeError, ValueError) as err:
        raise ContractViolation(f"malformed instance document: {err}") from err
    if x0.shape != (n,) or len(raw) != m:
        raise ContractViolation("instance dimensions are inconsistent")
    quads = []
    for entry in raw:
        if entry.get("type") != "quadratic":
            raise ContractViolation(f"unsupported constraint type {entry.get('type')!r}")
        quads.append(
            quadratic_constraint(
                np.asarray(entry["A"], dtype=float),
                np.asarray(entry["center"], dtype=float),
                float(entry["c"]),
            )
        )
    return quadratic_problem(x0, quads, R)
