"""Separation certificates for stationary points.

For a stationary point x_s of penalty + ||Ax - b||^2 the point
z = (I - A^T A) x_s + A^T b recovers x_s through the tau = 1 prox. When
the operator satisfies a two-sided isometry bound with constant delta on
differences up to cardinality (rank) c, and no |z_i| (singular value of Z)
lies in the closed interval

    [(1 - delta) * sqrt(mu),  sqrt(mu) / (1 - delta)],

then every other stationary point differs from x_s in more than c entries
(rank). If additionally card(x_s) < c/2, no sparser stationary point can
exist at all.

A certificate is only evaluated after the fixed-point test confirms the
input is stationary; non-stationary inputs raise ``NotStationaryError``
instead of producing a (meaningless) verdict.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .instances import Instance
from .penalties import _check_mu, prox_capped, prox_capped_singvals
from .solver import _card_or_rank, prox_target

STATIONARITY_TOL = 1e-6


class NotStationaryError(RuntimeError):
    """Raised when the fixed-point residual of the input is too large."""

    def __init__(self, residual: float, tol: float):
        super().__init__(
            f"input is not stationary: fixed-point residual {residual:.3e} exceeds {tol:.3e}"
        )
        self.residual = residual
        self.tol = tol


class MissingDeltaError(ValueError):
    """Raised when no isometry constant is available for the certificate."""


def forbidden_interval(mu: float, delta: float) -> tuple[float, float]:
    """The closed interval that z-values must avoid."""
    _check_mu(mu)
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    root = math.sqrt(mu)
    return (1.0 - delta) * root, root / (1.0 - delta)


def compute_z(x: np.ndarray, instance: Instance) -> np.ndarray:
    """(I - A^T A) x + A^T b, in the shape of the instance domain."""
    return prox_target(np.asarray(x, dtype=np.float64), instance, 1.0)


def stationarity_residual(x: np.ndarray, instance: Instance, mu: float) -> float:
    """Norm of x minus the tau = 1 prox applied to its own z."""
    x = np.asarray(x, dtype=np.float64)
    z = compute_z(x, instance)
    fixed = prox_capped(z, 1.0, mu) if x.ndim == 1 else prox_capped_singvals(z, 1.0, mu)
    return float(np.linalg.norm(fixed - x))


@dataclass
class CertificateReport:
    passed: bool
    margin: float  # signed distance of the closest z-value to the interval
    z_values: list[float]  # |z_i| (vector) or singular values of Z (matrix)
    interval_low: float
    interval_high: float
    mu: float
    delta: float
    delta_source: str  # "instance" or "user"
    separation: int  # other stationary points differ by card/rank > this
    solution_card_or_rank: int
    minimal_implication: bool  # solution is the sparsest / lowest-rank stationary point
    stationarity_residual: float
    margin_policy: float  # required clearance beyond the closed interval

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, sort_keys=True, indent=2)
            fh.write("\n")

    @classmethod
    def from_dict(cls, doc: dict) -> "CertificateReport":
        return cls(**doc)


def check_certificate(x: np.ndarray, instance: Instance, mu: float,
                      delta: Optional[float] = None, target: Optional[int] = None,
                      margin: float = 0.0,
                      stationarity_tol: float = STATIONARITY_TOL) -> CertificateReport:
    """Test the interval-exclusion condition at a stationary point.

    ``delta`` defaults to the instance's exactly-known constant; passing it
    explicitly is required for operators without one (the report records
    which source was used). ``target`` is the cardinality/rank bound c (r)
    the separation statement refers to; it defaults to the instance target.
    ``margin`` demands clearance beyond the closed interval, guarding
    borderline float comparisons.
    """
    _check_mu(mu)
    if margin < 0:
        raise ValueError("margin must be nonnegative")
    if delta is None:
        if instance.delta is None:
            raise MissingDeltaError(
                "no isometry constant: the instance records none and no delta was given"
            )
        delta, delta_source = instance.delta, "instance"
    else:
        delta_source = "user"
    if target is None:
        target = instance.target
    if target is None:
        raise ValueError("no separation bound: the instance records no target and none was given")

    x = np.asarray(x, dtype=np.float64)
    resid = stationarity_residual(x, instance, mu)
    if resid > stationarity_tol:
        raise NotStationaryError(resid, stationarity_tol)

    z = compute_z(x, instance)
    values = np.abs(z) if x.ndim == 1 else np.linalg.svd(z, compute_uv=False)
    low, high = forbidden_interval(mu, delta)
    below = low - values
    above = values - high
    distances = np.where(values < low, below, np.where(values > high, above,
                                                       -np.minimum(values - low, high - values)))
    worst = float(np.min(distances))
    passed = worst > margin
    card = _card_or_rank(x)
    return CertificateReport(
        passed=passed,
        margin=worst,
        z_values=sorted(float(v) for v in values),
        interval_low=low,
        interval_high=high,
        mu=float(mu),
        delta=float(delta),
        delta_source=delta_source,
        separation=int(target),
        solution_card_or_rank=card,
        minimal_implication=bool(passed and 2 * card < target),
        stationarity_residual=resid,
        margin_policy=float(margin),
    )


def verified_fraction(reports: list[CertificateReport]) -> float:
    """Fraction of reports with passed == True."""
    if not reports:
        raise ValueError("verified_fraction needs a nonempty list of reports")
    return sum(1 for r in reports if r.passed) / len(reports)
