"""Accelerated gradient descent for smooth strongly convex minimization."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .model import Array, ContractViolation, NumericalFailure


@dataclass(frozen=True)
class SmoothObjective:
    """An alpha-strongly-convex, beta-smooth function with a gradient oracle."""

    value: Callable[[Array], float]
    gradient: Callable[[Array], Array]
    alpha: float
    beta: float

    def __post_init__(self):
        if not (self.beta >= self.alpha > 0):
            raise ContractViolation("need beta >= alpha > 0")


def agd_minimize(objective: SmoothObjective, x_init: Array, iterations: int) -> Array:
    """Run exactly ``iterations`` momentum steps and return the last y iterate.

    Update per step: ``y+ = x - grad(x)/beta`` followed by the momentum
    combination ``x+ = (1 + gamma) y+ - gamma y`` with
    ``gamma = (sqrt(kappa) - 1)/(sqrt(kappa) + 1)``, ``kappa = beta/alpha``.
    No line search, restarts or adaptivity.
    """
    if iterations < 1:
        raise ContractViolation("iterations must be >= 1")
    beta = objective.beta
    kappa = beta / objective.alpha
    sq = math.sqrt(kappa)
    gamma = (sq - 1.0) / (sq + 1.0)

    x = np.array(x_init, dtype=float)
    y = x.copy()
    for _ in range(iterations):
        g = objective.gradient(x)
        if not np.all(np.isfinite(g)):
            raise NumericalFailure("non-finite gradient during AGD", payload=x)
        y_next = x - g / beta
        x = (1.0 + gamma) * y_next - gamma * y
        y = y_next
    return y


def agd_iterations(alpha: float, beta: float, dist_sq_bound: float, eps_tilde: float) -> int:
    """Iteration budget ``ceil(sqrt(beta/alpha) * ln(beta * dist_sq / eps))``, at least 1."""
    if not (alpha > 0 and beta >= alpha and dist_sq_bound > 0 and eps_tilde > 0):
        raise ContractViolation("all inputs must be positive with beta >= alpha")
    ratio = beta * dist_sq_bound / eps_tilde
    if ratio <= 1.0:
        return 1
    return max(1, math.ceil(math.sqrt(beta / alpha) * math.log(ratio)))
