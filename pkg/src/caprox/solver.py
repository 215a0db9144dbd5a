"""Proximal-linearization solver.

Each iteration linearizes the data term ||A x - b||^2 around the current
iterate and solves

    min_x  penalty(x) + tau * ||x - m||^2,
    m = x_k - (1/tau) * A^T (A x_k - b),

in closed form via the penalty's prox. A step is accepted only if it
strictly decreases the full objective; on failure tau is increased
(tau <- 1.5*(tau-1) + 1) and the step retried, on success tau is decreased
(tau <- (tau-1)/1.1 + 1). tau = 1 is a fixed point of both rules, and a
zero step at any tau >= 1 is a stationary point of the objective.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from .instances import Instance
from .penalties import (
    MATRIX_KINDS,
    VECTOR_KINDS,
    RegKind,
    Regularizer,
    _check_mu,
)

# cutoffs for reporting the solution's cardinality / numerical rank
CARD_ATOL = 1e-8
RANK_RTOL = 1e-6


class Status(Enum):
    RUNNING = "running"
    CONVERGED_OBJ_TOL = "converged_obj_tol"
    CONVERGED_STEP_TOL = "converged_step_tol"
    MAX_ITERS = "max_iters"
    STALLED = "stalled"

    @property
    def converged(self) -> bool:
        return self in (Status.CONVERGED_OBJ_TOL, Status.CONVERGED_STEP_TOL)


@dataclass(frozen=True)
class SolverConfig:
    tau0: float = 5.0
    max_iters: int = 5000
    max_backtracks: int = 60
    tol_obj: float = 1e-10  # relative objective-change tolerance
    tol_step: float = 1e-9  # step-norm tolerance
    accept_rtol: float = 1e-12  # strict-decrease guard against float noise

    def __post_init__(self):
        if not self.tau0 >= 1.0:
            raise ValueError(f"tau0 must be >= 1, got {self.tau0}")
        if self.tol_obj <= 0 or self.tol_step <= 0:
            raise ValueError("tolerances must be positive")


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    objective: float
    tau: float
    step_norm: float


@dataclass
class SolveResult:
    solution: np.ndarray
    objective: float
    residual_norm: float
    reg_value: float
    card_or_rank: int
    iterations: int
    status: Status
    history: list[IterationRecord] = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return self.status.converged


def solution_cardinality(x: np.ndarray, atol: float = CARD_ATOL) -> int:
    """Number of entries with |x_i| > atol."""
    return int(np.count_nonzero(np.abs(x) > atol))


def numerical_rank(X: np.ndarray, rtol: float = RANK_RTOL) -> int:
    """Number of singular values above rtol times the largest."""
    s = np.linalg.svd(np.asarray(X, dtype=np.float64), compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.count_nonzero(s > rtol * s[0]))


def _card_or_rank(x: np.ndarray) -> int:
    return solution_cardinality(x) if x.ndim == 1 else numerical_rank(x)


def _check_reg(instance: Instance, reg: Regularizer) -> None:
    allowed = VECTOR_KINDS if instance.op.flavor == "vector" else MATRIX_KINDS
    if reg.kind not in allowed:
        raise ValueError(f"{reg.kind.value} regularizer does not apply to {instance.op.flavor} instances")


def prox_target(x: np.ndarray, instance: Instance, tau: float = 1.0) -> np.ndarray:
    """The linearization point x - (1/tau) * A^T (A x - b)."""
    residual = instance.op.apply(x) - instance.b
    return x - instance.op.adjoint(residual) / tau


def gist_step(x: np.ndarray, tau: float, instance: Instance, reg: Regularizer) -> np.ndarray:
    """One prox step on the linearized objective at weight tau."""
    _check_reg(instance, reg)
    return reg.prox(prox_target(np.asarray(x, dtype=np.float64), instance, tau), tau)


def tau_update(tau: float, success: bool) -> float:
    """Schedule step: shrink toward 1 after success, grow after failure."""
    if success:
        return (tau - 1.0) / 1.1 + 1.0
    return 1.5 * (tau - 1.0) + 1.0


def objective(x: np.ndarray, instance: Instance, reg: Regularizer) -> float:
    """penalty(x) + ||A x - b||^2 (any stacked penalty rows ride along in b)."""
    residual = instance.op.apply(np.asarray(x, dtype=np.float64)) - instance.b
    return reg.value(x) + float(residual @ residual)


def solve(instance: Instance, reg: Regularizer, config: Optional[SolverConfig] = None,
          x0: Optional[np.ndarray] = None) -> SolveResult:
    """Run the accept/backtrack loop from x0 (default 0) until tolerance.

    Raises ArithmeticError if the objective turns non-finite; stalls are
    reported through ``status``, never swallowed.
    """
    config = config or SolverConfig()
    _check_reg(instance, reg)
    x = np.zeros(instance.op.shape_in) if x0 is None else np.array(x0, dtype=np.float64)
    if x.shape != instance.op.shape_in:
        raise ValueError(f"x0 has shape {x.shape}, operator domain is {instance.op.shape_in}")
    f = objective(x, instance, reg)
    if not math.isfinite(f):
        raise ArithmeticError(f"objective at the initial point is {f}")
    tau = float(config.tau0)
    history: list[IterationRecord] = []
    status = Status.MAX_ITERS

    for it in range(1, config.max_iters + 1):
        accepted = None
        for _ in range(config.max_backtracks + 1):
            candidate = gist_step(x, tau, instance, reg)
            f_cand = objective(candidate, instance, reg)
            if not math.isfinite(f_cand):
                raise ArithmeticError(f"objective became non-finite at iteration {it}")
            if f_cand < f - config.accept_rtol * abs(f):
                accepted = (candidate, f_cand)
                break
            if float(np.linalg.norm(candidate - x)) <= config.tol_step:
                # prox fixed point: nothing to improve at this tau
                accepted = None
                status = Status.CONVERGED_STEP_TOL
                break
            tau = tau_update(tau, success=False)
        if accepted is None:
            if status is not Status.CONVERGED_STEP_TOL:
                status = Status.STALLED
            break
        candidate, f_cand = accepted
        step_norm = float(np.linalg.norm(candidate - x))
        rel_drop = (f - f_cand) / max(abs(f), 1e-300)
        x, f = candidate, f_cand
        history.append(IterationRecord(it, f, tau, step_norm))
        tau = max(tau_update(tau, success=True), 1.0)
        if rel_drop <= config.tol_obj:
            status = Status.CONVERGED_OBJ_TOL
            break
        if step_norm <= config.tol_step:
            status = Status.CONVERGED_STEP_TOL
            break

    residual = instance.op.apply(x) - instance.b
    return SolveResult(
        solution=x,
        objective=f,
        residual_norm=float(np.linalg.norm(residual)),
        reg_value=reg.value(x),
        card_or_rank=_card_or_rank(x),
        iterations=len(history),
        status=status,
        history=history,
    )


def write_trace(history: list[IterationRecord], path) -> None:
    """One JSON object per accepted iteration: iteration, objective, tau, step norm."""
    with open(path, "w") as fh:
        for rec in history:
            fh.write(json.dumps({"iteration": rec.iteration, "objective": rec.objective,
                                 "tau": rec.tau, "step_norm": rec.step_norm}))
            fh.write("\n")


def stationary_points_1d(a: float, b: float, mu: float) -> list[float]:
    """All stationary points of -max(sqrt(mu)-|x|,0)^2 + mu + (a*x - b)^2.

    Case analysis of 2*((1-a^2)*x + a*b) lying in the subdifferential of
    the capped penalty plus x^2: the origin when |a*b| <= sqrt(mu), the
    free point b/a when |b/a| >= sqrt(mu), and sign-matched roots
    (s*sqrt(mu) - a*b)/(1 - a^2) inside (0, sqrt(mu)].

    Degenerate configurations have stationary continua and are represented
    by their endpoints: for a == 0 every |x| >= sqrt(mu) is stationary
    (returned as {-sqrt(mu), 0, sqrt(mu)}), and for a^2 == 1 with
    |a*b| == sqrt(mu) the whole segment between 0 and sign-matched
    sqrt(mu) is (endpoint returned).
    """
    _check_mu(mu)
    root = math.sqrt(mu)
    if a == 0.0:
        return [-root, 0.0, root]
    points: list[float] = []
    if abs(a * b) <= root:
        points.append(0.0)
    free = float(b / a)
    if abs(free) >= root:
        points.append(free)
    if a * a != 1.0:
        for s in (1.0, -1.0):
            xm = float((s * root - a * b) / (1.0 - a * a))
            if 0.0 < s * xm <= root:
                points.append(xm)
    else:
        for s in (1.0, -1.0):
            if a * b == s * root:
                points.append(s * root)
    points.sort()
    deduped: list[float] = []
    for p in points:
        if not deduped or abs(p - deduped[-1]) > 1e-12 * max(1.0, abs(p)):
            deduped.append(p)
    return deduped
