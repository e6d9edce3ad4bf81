"""Cutting-plane maximization of a concave dual with approximate oracles.

The localizer starts as an ellipsoid covering the dual box ``[0, R]^m`` and
is cut through its center every round: with the negated approximate gradient
when the center lies in the box, with a box separation vector otherwise.
Either way the kept half is guaranteed to contain every near-optimal dual
point that has not already been certified by a visited iterate, and the
localizer volume shrinks by a fixed factor per cut, so logarithmically many
rounds suffice.  The returned point is the visited in-box point with the
best value-oracle output (ties broken by earliest visit).

A one-dimensional bisection engine is provided for the single-constraint
case; it brackets the maximizer by the sign of the approximate derivative.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .dual_oracle import OracleTriple
from .model import Array, ContractViolation, NumericalFailure

# Audit cadence for the localizer factor, in updates per dimension.
_PD_CHECK_EVERY = 8


@dataclass(frozen=True)
class DualBox:
    """The multiplier box ``{lam : 0 <= lam_i <= R}``."""

    R: float
    m: int

    def __post_init__(self):
        if not self.R > 0 or self.m < 1:
            raise ContractViolation("need R > 0 and m >= 1")

    def center(self) -> Array:
        return np.full(self.m, self.R / 2.0)

    def contains(self, lam: Array) -> bool:
        return bool(np.all(lam >= 0.0) and np.all(lam <= self.R))


@dataclass
class EllipsoidState:
    """Localizer ellipsoid ``{center + u : u^T shape^{-1} u <= 1}``.

    ``log_volume_offset`` accumulates the analytic per-cut log-volume change
    relative to the initial ellipsoid.  Updates are carried on ``factor`` B
    with ``shape = B B^T``: rank-one updates on B keep the shape matrix
    positive semidefinite by construction, where direct updates on the shape
    matrix drift indefinite once the localizer becomes needle shaped (as it
    must whenever a multiplier's optimum sits on the box boundary).
    """

    center: Array
    shape: Array
    log_volume_offset: float = 0.0
    factor: Array | None = None

    def __post_init__(self):
        if self.factor is None:
            try:
                self.factor = np.linalg.cholesky(self.shape)
            except np.linalg.LinAlgError as err:
                raise NumericalFailure(
                    "shape matrix is not positive definite", payload=self
                ) from err


@dataclass
class CutTrace:
    """Per-round diagnostics of one dual maximization."""

    t: list[int] = field(default_factory=list)
    in_box: list[bool] = field(default_factory=list)
    lam: list[Array] = field(default_factory=list)
    w: list[Array] = field(default_factory=list)
    v: list[float] = field(default_factory=list)
    log_volume: list[float] = field(default_factory=list)
    boundary_hit: bool = False

    def append(self, t: int, in_box: bool, lam: Array, w: Array, v: float, log_volume: float):
        self.t.append(t)
        self.in_box.append(in_box)
        self.lam.append(np.array(lam))
        self.w.append(np.array(w))
        self.v.append(float(v))
        self.log_volume.append(float(log_volume))

    def __len__(self) -> int:
        return len(self.t)

    def write_csv(self, fh) -> None:
        m = self.lam[0].size if self.lam else 0
        writer = csv.writer(fh)
        writer.writerow(
            ["t", "in_box"] + [f"lambda_{i}" for i in range(m)] + ["v", "grad_norm", "log_volume"]
        )
        for i in range(len(self.t)):
            writer.writerow(
                [self.t[i], int(self.in_box[i])]
                + [repr(float(x)) for x in self.lam[i]]
                + [
                    repr(self.v[i]),
                    repr(float(np.linalg.norm(self.w[i]))),
                    repr(self.log_volume[i]),
                ]
            )


def log_unit_ball_volume(m: int) -> float:
    return 0.5 * m * math.log(math.pi) - math.lgamma(0.5 * m + 1.0)


def central_cut_log_factor(m: int) -> float:
    """Analytic log of the volume ratio of one central ellipsoid cut (< 0)."""
    if m == 1:
        return -math.log(2.0)
    return math.log(m / (m + 1.0)) + 0.5 * (m - 1.0) * math.log(m * m / (m * m - 1.0))


def separation_oracle_box(lam: Array, R: float) -> Array:
    """Outward normal separating an out-of-box ``lam`` from ``[0, R]^m``:
    +1 where the component overshoots R, -1 where it is negative, else 0."""
    lam = np.asarray(lam, dtype=float)
    w = np.where(lam > R, 1.0, np.where(lam < 0.0, -1.0, 0.0))
    if not np.any(w):
        raise ContractViolation("separation oracle called with a point inside the box")
    return w


def cut_resolution(state: EllipsoidState, w: Array) -> float:
    """``w^T Q w``, the squared extent of the localizer along the cut."""
    Bw = state.factor.T @ np.asarray(w, dtype=float)
    return float(Bw @ Bw)


def ellipsoid_update(state: EllipsoidState, w: Array, cut_point: Array) -> EllipsoidState:
    """Central-cut update keeping ``{lam in E : w . (lam - center) <= 0}``.

    Equivalent to ``c' = c - Qw/((m+1) sqrt(wQw))`` and
    ``Q' = m^2/(m^2-1) (Q - 2/(m+1) (Qw)(Qw)^T / wQw)``, performed on the
    factor; for m = 1 the interval is halved.
    """
    w = np.asarray(w, dtype=float)
    if not np.any(w):
        raise ContractViolation("cut direction must be nonzero")
    if not np.array_equal(np.asarray(cut_point, dtype=float), state.center):
        raise ContractViolation("cuts must pass through the current center")
    m = state.center.size
    B = state.factor
    if m == 1:
        half = math.sqrt(float(state.shape[0, 0]))
        sign = 1.0 if w[0] > 0 else -1.0
        center = state.center - sign * (half / 2.0)
        B_new = np.array([[half / 2.0]])
    else:
        Bw = B.T @ w
        wQw = float(Bw @ Bw)
        if wQw <= 0.0 or not math.isfinite(wQw):
            raise NumericalFailure(
                "localizer degenerate along the cut direction", payload=state
            )
        p = Bw / math.sqrt(wQw)
        Bp = B @ p
        center = state.center - Bp / (m + 1.0)
        scale = math.sqrt(m * m / (m * m - 1.0))
        gamma = 1.0 - math.sqrt((m - 1.0) / (m + 1.0))
        B_new = scale * (B - gamma * np.outer(Bp, p))
    shape = B_new @ B_new.T
    return EllipsoidState(
        center=center,
        shape=0.5 * (shape + shape.T),
        log_volume_offset=state.log_volume_offset + central_cut_log_factor(m),
        factor=B_new,
    )


def cutting_plane_maximize(
    grad_oracle: Callable[[Array], Array],
    value_oracle: Callable[[Array], float],
    sep_oracle: Callable[[Array], Array],
    box: DualBox,
    engine: str = "ellipsoid",
    T: int = 100,
    early_stop_log_volume: float | None = None,
) -> tuple[Array, CutTrace]:
    """Run T rounds of the chosen engine and return the best visited point.

    ``early_stop_log_volume`` aborts once the localizer's (absolute) log
    volume drops below it: past that point the near-optimal set can no longer
    fit inside the localizer, so some visited point is already near optimal.
    """
    if T < 1:
        raise ContractViolation("T must be positive")
    if engine == "ellipsoid":
        return _ellipsoid_maximize(grad_oracle, value_oracle, sep_oracle, box, T, early_stop_log_volume)
    if engine == "bisection":
        if box.m != 1:
            raise ContractViolation("bisection engine requires m = 1")
        return _bisection_maximize_gv(grad_oracle, value_oracle, box.R, T)
    raise ContractViolation(f"unknown engine {engine!r}")


def _ellipsoid_maximize(grad_oracle, value_oracle, sep_oracle, box, T, early_stop_log_volume):
    m = box.m
    # Smallest ball covering the box: the corners sit at distance sqrt(m) R/2.
    state = EllipsoidState(
        center=box.center(), shape=(m * (box.R / 2.0) ** 2) * np.eye(m)
    )
    log_vol_initial = log_unit_ball_volume(m) + 0.5 * float(
        np.linalg.slogdet(state.shape)[1]
    )
    trace = CutTrace()
    try:
        return _ellipsoid_rounds(
            grad_oracle, value_oracle, sep_oracle, box, T,
            early_stop_log_volume, state, log_vol_initial, trace,
        )
    except NumericalFailure as err:
        err.trace = trace  # partial diagnostics travel with the failure
        raise


def _ellipsoid_rounds(
    grad_oracle, value_oracle, sep_oracle, box, T,
    early_stop_log_volume, state, log_vol_initial, trace,
):
    m = box.m
    best_v = -math.inf
    best_lam = None

    for t in range(1, T + 1):
        lam_t = state.center.copy()
        log_vol = log_vol_initial + state.log_volume_offset
        if box.contains(lam_t):
            g = np.asarray(grad_oracle(lam_t), dtype=float)
            v = float(value_oracle(lam_t))
            if v > best_v:
                best_v, best_lam = v, lam_t
            if not np.any(g):
                # A vanishing approximate gradient certifies near-optimality
                # and leaves no cut direction; stop here.
                trace.append(t, True, lam_t, np.zeros(m), v, log_vol)
                return lam_t, trace
            w = -g
            trace.append(t, True, lam_t, w, v, log_vol)
        else:
            w = sep_oracle(lam_t)
            trace.append(t, False, lam_t, w, math.nan, log_vol)
        # Once the localizer's extent along the cut is below the float
        # resolution of the query point, further cuts cannot move it.
        extent_tol = 1e-13 * (1.0 + float(np.max(np.abs(lam_t))))
        if cut_resolution(state, w) <= (extent_tol**2) * float(w @ w):
            break
        state = ellipsoid_update(state, w, lam_t)
        if t % (_PD_CHECK_EVERY * m) == 0:
            sign, logdet = np.linalg.slogdet(state.factor)
            if sign == 0 or not math.isfinite(logdet):
                raise NumericalFailure(
                    "localizer factor failed its audit", payload=state
                )
        if (
            early_stop_log_volume is not None
            and log_vol_initial + state.log_volume_offset < early_stop_log_volume
        ):
            break

    assert best_lam is not None  # the first center is the box center
    return best_lam, trace


def _bisection_maximize_gv(grad_oracle, value_oracle, R, T):
    lo, hi = 0.0, float(R)
    trace = CutTrace()
    best_v = -math.inf
    best_lam = None
    for t in range(1, T + 1):
        mid = 0.5 * (lo + hi)
        lam_t = np.array([mid])
        g = np.asarray(grad_oracle(lam_t), dtype=float)
        v = float(value_oracle(lam_t))
        trace.append(t, True, lam_t, -g, v, _log_bracket(hi - lo))
        if v > best_v:
            best_v, best_lam = v, lam_t
        if g[0] > 0:
            lo = mid
        else:
            hi = mid
    return best_lam, trace


def _log_bracket(width: float) -> float:
    # the bracket can underflow to exactly 0 at extreme budgets
    return math.log(width) if width > 0.0 else -math.inf


def bisection_maximize(
    oracle: Callable[[float], OracleTriple], R: float, T: int
) -> tuple[Array, float, CutTrace]:
    """Derivative-sign bisection over [0, R] driven by a triple oracle.

    Returns ``(x_tau, lam_tau, trace)`` where tau indexes the queried
    midpoint with the best value estimate.
    """
    if T < 1:
        raise ContractViolation("T must be positive")
    lo, hi = 0.0, float(R)
    trace = CutTrace()
    best = None
    for t in range(1, T + 1):
        mid = 0.5 * (lo + hi)
        triple = oracle(mid)
        g = float(np.asarray(triple.g).reshape(-1)[0])
        trace.append(t, True, np.array([mid]), np.array([-g]), triple.v, _log_bracket(hi - lo))
        if best is None or triple.v > best[0]:
            best = (triple.v, triple.x_lambda, mid)
        if g > 0:
            lo = mid
        else:
            hi = mid
    return best[1], best[2], trace
