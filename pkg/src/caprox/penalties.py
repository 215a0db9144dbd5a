"""Sparsity and rank penalties with their proximal operators.

The central penalty is the capped quadratic

    p_mu(x) = sum_i ( mu - max(sqrt(mu) - |x_i|, 0)^2 ),

which behaves like 2*sqrt(mu)*|x_i| - x_i^2 near zero and saturates at mu
once |x_i| >= sqrt(mu): entries above the threshold are not penalized
further. Convex baselines (l1 / nuclear) are paired with it through the
weight 2*sqrt(mu), so that their prox soft-thresholds at the same level
sqrt(mu) as the capped penalty's prox.

Matrix variants apply the scalar rules to singular values.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .kernels import capped_penalty_sum, prox_capped_elementwise


def _check_mu(mu: float) -> None:
    if not mu > 0:
        raise ValueError(f"mu must be positive, got {mu}")


def _check_tau(tau: float) -> None:
    if not tau >= 1.0:
        raise ValueError(f"tau must be >= 1, got {tau}")


def _check_level(level: float) -> None:
    if not level > 0:
        raise ValueError(f"threshold level must be positive, got {level}")


def _as_float64(x) -> np.ndarray:
    return np.ascontiguousarray(x, dtype=np.float64)


def capped_penalty(x, mu: float) -> float:
    """Evaluate the capped quadratic penalty of a vector (or any array)."""
    _check_mu(mu)
    return capped_penalty_sum(_as_float64(x).ravel(), mu)


def penalty_plus_square(x: float, mu: float) -> float:
    """Scalar capped penalty plus x^2; convex, piecewise defined.

    Equals mu + x^2 for |x| >= sqrt(mu) and 2*sqrt(mu)*|x| below; the two
    branches agree (value 2*mu) at the breakpoint.
    """
    _check_mu(mu)
    ax = abs(x)
    root = math.sqrt(mu)
    if ax >= root:
        return mu + x * x
    return 2.0 * root * ax


@dataclass(frozen=True)
class SubgradientInterval:
    """Closed interval of subgradients; a singleton when lower == upper."""

    lower: float
    upper: float

    @property
    def is_singleton(self) -> bool:
        return self.lower == self.upper

    def contains(self, v: float, tol: float = 0.0) -> bool:
        return self.lower - tol <= v <= self.upper + tol


def penalty_plus_square_subgrad(x: float, mu: float) -> SubgradientInterval:
    """Subdifferential of ``penalty_plus_square`` at x.

    Singleton {2x} for |x| >= sqrt(mu), {2*sqrt(mu)*sign(x)} for
    0 < |x| <= sqrt(mu) (the two rules coincide at the breakpoint), and the
    full interval [-2*sqrt(mu), 2*sqrt(mu)] at x = 0.
    """
    _check_mu(mu)
    root = math.sqrt(mu)
    if x == 0.0:
        return SubgradientInterval(-2.0 * root, 2.0 * root)
    if abs(x) >= root:
        return SubgradientInterval(2.0 * x, 2.0 * x)
    g = 2.0 * root * math.copysign(1.0, x)
    return SubgradientInterval(g, g)


def prox_capped(m, tau: float, mu: float) -> np.ndarray:
    """Element-wise minimizer of -max(sqrt(mu)-|x|,0)^2 + tau*(x-m)^2.

    Candidate ties resolve toward the smaller magnitude; in particular the
    non-unique case |m_i| == sqrt(mu) at tau == 1 returns 0.
    """
    _check_mu(mu)
    _check_tau(tau)
    arr = _as_float64(m)
    out = prox_capped_elementwise(arr.ravel(), float(tau), float(mu))
    return out.reshape(arr.shape)


def prox_capped_scalar(m: float, tau: float, mu: float) -> float:
    return float(prox_capped(np.array([m]), tau, mu)[0])


def prox_capped_singvals(M, tau: float, mu: float) -> np.ndarray:
    """Apply the capped-penalty prox to the singular values of M."""
    _check_mu(mu)
    _check_tau(tau)
    U, s, Vt = np.linalg.svd(_as_float64(M), full_matrices=False)
    s_new = prox_capped_elementwise(np.ascontiguousarray(s), float(tau), float(mu))
    return (U * s_new) @ Vt


def soft_threshold(m, level: float) -> np.ndarray:
    """Shrink toward zero: sign(m) * max(|m| - level, 0)."""
    _check_level(level)
    arr = _as_float64(m)
    return np.sign(arr) * np.maximum(np.abs(arr) - level, 0.0)


def soft_threshold_singvals(M, level: float) -> np.ndarray:
    """Soft-threshold the singular values of M and recompose."""
    _check_level(level)
    U, s, Vt = np.linalg.svd(_as_float64(M), full_matrices=False)
    return (U * np.maximum(s - level, 0.0)) @ Vt


def hard_threshold(m, level: float) -> np.ndarray:
    """Keep entries with |m| > level, zero the rest (ties zeroed)."""
    _check_level(level)
    arr = _as_float64(m)
    return np.where(np.abs(arr) > level, arr, 0.0)


def hard_threshold_singvals(M, level: float) -> np.ndarray:
    _check_level(level)
    U, s, Vt = np.linalg.svd(_as_float64(M), full_matrices=False)
    return (U * np.where(s > level, s, 0.0)) @ Vt


class RegKind(str, Enum):
    CAPPED = "capped"
    L1 = "l1"
    NUCLEAR = "nuclear"
    CARD = "card"
    RANK = "rank"
    NONE = "none"


VECTOR_KINDS = frozenset({RegKind.CAPPED, RegKind.L1, RegKind.CARD, RegKind.NONE})
MATRIX_KINDS = frozenset({RegKind.CAPPED, RegKind.NUCLEAR, RegKind.RANK, RegKind.NONE})

# numerical-rank cutoff (relative to the largest singular value) used when
# evaluating the RANK penalty
_RANK_RTOL = 1e-9


@dataclass(frozen=True)
class Regularizer:
    """A penalty choice plus its strength mu.

    For L1/NUCLEAR the penalty weight is 2*sqrt(mu) so the soft-threshold
    level is exactly sqrt(mu), matching the capped penalty's threshold.
    ``NONE`` is the zero penalty (identity prox), used for the mu = 0 rows
    of experiment grids.
    """

    kind: RegKind
    mu: float = 0.0

    def __post_init__(self):
        if self.kind is not RegKind.NONE:
            _check_mu(self.mu)

    @property
    def threshold(self) -> float:
        """sqrt(mu): the shrinkage / keep-or-kill level at tau = 1."""
        return math.sqrt(self.mu) if self.kind is not RegKind.NONE else 0.0

    @property
    def convex_weight(self) -> float:
        """The paired convex penalty weight 2*sqrt(mu)."""
        return 2.0 * math.sqrt(self.mu)

    def _want_matrix(self, x: np.ndarray) -> bool:
        if self.kind in (RegKind.NUCLEAR, RegKind.RANK):
            if x.ndim != 2:
                raise ValueError(f"{self.kind.value} penalty needs a matrix argument")
            return True
        if self.kind in (RegKind.L1, RegKind.CARD):
            if x.ndim != 1:
                raise ValueError(f"{self.kind.value} penalty needs a vector argument")
            return False
        return x.ndim == 2

    def value(self, x) -> float:
        x = _as_float64(x)
        if self.kind is RegKind.NONE:
            return 0.0
        if self.kind is RegKind.CAPPED:
            target = np.linalg.svd(x, compute_uv=False) if self._want_matrix(x) else x
            return capped_penalty(target, self.mu)
        if self.kind is RegKind.L1:
            self._want_matrix(x)
            return self.convex_weight * float(np.sum(np.abs(x)))
        if self.kind is RegKind.NUCLEAR:
            self._want_matrix(x)
            return self.convex_weight * float(np.sum(np.linalg.svd(x, compute_uv=False)))
        if self.kind is RegKind.CARD:
            self._want_matrix(x)
            return self.mu * int(np.count_nonzero(x))
        # RANK
        self._want_matrix(x)
        s = np.linalg.svd(x, compute_uv=False)
        if s.size == 0 or s[0] == 0.0:
            return 0.0
        return self.mu * int(np.count_nonzero(s > _RANK_RTOL * s[0]))

    def prox(self, m, tau: float) -> np.ndarray:
        """Minimizer of self-penalty(x) + tau*||x - m||^2.

        CARD/RANK use the fixed keep-or-kill level sqrt(mu) regardless of
        tau (tau is treated as 1 inside their prox).
        """
        _check_tau(tau)
        m = _as_float64(m)
        if self.kind is RegKind.NONE:
            return m.copy()
        if self.kind is RegKind.CAPPED:
            if self._want_matrix(m):
                return prox_capped_singvals(m, tau, self.mu)
            return prox_capped(m, tau, self.mu)
        if self.kind is RegKind.L1:
            self._want_matrix(m)
            return soft_threshold(m, self.threshold / tau)
        if self.kind is RegKind.NUCLEAR:
            self._want_matrix(m)
            return soft_threshold_singvals(m, self.threshold / tau)
        if self.kind is RegKind.CARD:
            self._want_matrix(m)
            return hard_threshold(m, self.threshold)
        self._want_matrix(m)
        return hard_threshold_singvals(m, self.threshold)
