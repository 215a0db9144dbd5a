"""Experiment drivers: phase grids over (noise, strength) and the
non-rigid fit-versus-rank study.

Every trial derives its RNG stream from
``SeedSequence([base_seed, sigma_index, mu_index, trial])`` (the first
spawned child seeds the operator, the second the ground truth and noise),
so grids are bit-reproducible regardless of execution order or the
``CAPROX_THREADS`` worker count.
"""
from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .certificate import NotStationaryError, check_certificate
from .instances import (
    Instance,
    gen_gaussian_dense,
    gen_rip_dense,
    make_lowrank_instance,
    make_nrsfm_instance,
    make_sparse_instance,
)
from .penalties import RegKind, Regularizer
from .solver import SolverConfig, numerical_rank, solve

GRID_SCHEMA = "caprox-grid-v1"
NRSFM_SCHEMA = "caprox-nrsfm-v1"


def _workers() -> int:
    return max(1, int(os.environ.get("CAPROX_THREADS", "1")))


@dataclass(frozen=True)
class GridSpec:
    """Axes, per-cell trial count and instance template of a phase grid."""

    problem: str  # "sparse" | "lowrank"
    sigma_axis: tuple[float, ...]
    mu_axis: tuple[float, ...]
    trials_per_cell: int = 50
    base_seed: int = 0
    regularizers: tuple[RegKind, ...] = ()
    # sparse template
    n: int = 200
    cardinality: int = 10
    # lowrank template
    rows: int = 20
    cols: int = 20
    rank: int = 5
    # operator
    operator: str = "rip"  # "rip" (exact delta) | "gaussian" (delta unknown)
    delta: float = 0.2
    gaussian_rows: Optional[int] = None
    solver: SolverConfig = field(default_factory=SolverConfig)

    def __post_init__(self):
        if self.problem not in ("sparse", "lowrank"):
            raise ValueError(f"unknown problem {self.problem!r}")
        if self.operator not in ("rip", "gaussian"):
            raise ValueError(f"unknown operator {self.operator!r}")
        for name, axis in (("sigma_axis", self.sigma_axis), ("mu_axis", self.mu_axis)):
            if len(axis) == 0:
                raise ValueError(f"{name} must be nonempty")
            if any(b <= a for a, b in zip(axis, axis[1:])):
                raise ValueError(f"{name} must be strictly increasing")
        if self.sigma_axis[0] < 0:
            raise ValueError("noise levels must be nonnegative")
        if self.mu_axis[0] < 0:
            raise ValueError("mu values must be nonnegative")
        if self.trials_per_cell < 1:
            raise ValueError("trials_per_cell must be >= 1")
        if not self.regularizers:
            default = (RegKind.CAPPED, RegKind.L1) if self.problem == "sparse" \
                else (RegKind.CAPPED, RegKind.NUCLEAR)
            object.__setattr__(self, "regularizers", default)

    @property
    def target(self) -> int:
        return self.cardinality if self.problem == "sparse" else self.rank

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["regularizers"] = [k.value for k in self.regularizers]
        return doc


@dataclass
class TrialRecord:
    sigma_index: int
    mu_index: int
    sigma: float
    mu: float
    trial: int
    seed: str  # "base-sigma_index-mu_index-trial"
    regularizer: str
    threshold: float  # sqrt(mu); 0 when the cell runs unregularized
    distance: float
    residual: float
    achieved: int
    target_hit: bool
    verified: Optional[bool]
    status: str
    iterations: int


@dataclass
class CellAggregate:
    mean_distance: float
    mean_residual: float
    target_fraction: float
    verified_fraction: Optional[float]


@dataclass
class CellResult:
    sigma: float
    mu: float
    aggregates: dict[str, CellAggregate]
    trials: list[TrialRecord]


@dataclass
class GridResult:
    spec: dict
    cells: list[CellResult]

    def records(self) -> list[TrialRecord]:
        return [rec for cell in self.cells for rec in cell.trials]


def _make_operator(spec: GridSpec, seed):
    if spec.problem == "sparse":
        cols, shape_in = spec.n, None
    else:
        cols, shape_in = spec.rows * spec.cols, (spec.rows, spec.cols)
    if spec.operator == "rip":
        return gen_rip_dense(cols, cols, spec.delta, seed, shape_in=shape_in), spec.delta
    rows = spec.gaussian_rows or (150 if spec.problem == "sparse" else 300)
    return gen_gaussian_dense(rows, cols, 1.0 / rows, seed, shape_in=shape_in), None


def _make_instance(spec: GridSpec, sigma: float, op, delta, seed) -> Instance:
    if spec.problem == "sparse":
        return make_sparse_instance(spec.n, spec.cardinality, sigma, op, seed, delta=delta)
    return make_lowrank_instance(spec.rows, spec.cols, spec.rank, sigma, op, seed, delta=delta)


def _run_trial(spec: GridSpec, si: int, mi: int, trial: int) -> list[TrialRecord]:
    sigma = spec.sigma_axis[si]
    mu = spec.mu_axis[mi]
    seq = np.random.SeedSequence([spec.base_seed, si, mi, trial])
    op_seed, inst_seed = seq.spawn(2)
    op, delta = _make_operator(spec, op_seed)
    inst = _make_instance(spec, sigma, op, delta, inst_seed)
    seed_label = f"{spec.base_seed}-{si}-{mi}-{trial}"
    records = []
    for kind in spec.regularizers:
        reg = Regularizer(RegKind.NONE) if mu == 0.0 else Regularizer(kind, mu)
        result = solve(inst, reg, spec.solver)
        verified: Optional[bool] = None
        if kind is RegKind.CAPPED and mu > 0.0 and inst.delta is not None:
            try:
                verified = check_certificate(result.solution, inst, mu).passed
            except NotStationaryError:
                verified = False
        distance = float(np.linalg.norm(result.solution - inst.ground_truth))
        records.append(TrialRecord(
            sigma_index=si, mu_index=mi, sigma=sigma, mu=mu, trial=trial,
            seed=seed_label, regularizer=kind.value, threshold=reg.threshold,
            distance=distance, residual=result.residual_norm,
            achieved=result.card_or_rank,
            target_hit=result.card_or_rank == spec.target,
            verified=verified, status=result.status.value,
            iterations=result.iterations,
        ))
    return records


def _aggregate_cell(spec: GridSpec, sigma: float, mu: float,
                    trial_lists: list[list[TrialRecord]]) -> CellResult:
    flat = [rec for recs in trial_lists for rec in recs]
    aggregates = {}
    for kind in spec.regularizers:
        recs = [r for r in flat if r.regularizer == kind.value]
        n = len(recs)
        verified = [r.verified for r in recs if r.verified is not None]
        aggregates[kind.value] = CellAggregate(
            mean_distance=sum(r.distance for r in recs) / n,
            mean_residual=sum(r.residual for r in recs) / n,
            target_fraction=sum(r.target_hit for r in recs) / n,
            verified_fraction=sum(verified) / len(verified) if verified else None,
        )
    return CellResult(sigma=sigma, mu=mu, aggregates=aggregates, trials=flat)


def run_phase_grid(spec: GridSpec) -> GridResult:
    """Solve every (sigma, mu, trial) cell with each regularizer.

    Solver stalls are recorded in the per-trial status, never raised; the
    convex baselines run at threshold sqrt(mu); certificates run for the
    capped penalty whenever the operator's delta is exact.
    """
    tasks = [(si, mi, t)
             for si in range(len(spec.sigma_axis))
             for mi in range(len(spec.mu_axis))
             for t in range(spec.trials_per_cell)]
    workers = _workers()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda args: _run_trial(spec, *args), tasks))
    else:
        results = [_run_trial(spec, *args) for args in tasks]
    by_cell: dict[tuple[int, int], list[list[TrialRecord]]] = {}
    for (si, mi, t), recs in zip(tasks, results):
        by_cell.setdefault((si, mi), []).append(recs)
    cells = [
        _aggregate_cell(spec, spec.sigma_axis[si], spec.mu_axis[mi], by_cell[(si, mi)])
        for si in range(len(spec.sigma_axis))
        for mi in range(len(spec.mu_axis))
    ]
    return GridResult(spec=spec.to_dict(), cells=cells)


@dataclass
class NrsfmRecord:
    regularizer: str
    mu: float
    rank: int
    data_fit: float  # ||R X - M||_F, derivative rows excluded
    gt_distance: float
    status: str
    iterations: int
    with_derivative: bool
    seed: str


def run_nrsfm_study(frames: int, points: int, basis_size: int, noise: float,
                    mu_list, with_derivative: bool, seed,
                    solver_config: Optional[SolverConfig] = None,
                    regularizers: tuple[RegKind, ...] = (RegKind.CAPPED, RegKind.NUCLEAR),
                    ) -> dict[str, list[NrsfmRecord]]:
    """Sweep mu on one synthetic sequence; returns records per regularizer."""
    config = solver_config or SolverConfig()
    instance, ops = make_nrsfm_instance(frames, points, basis_size, noise, seed,
                                        with_derivative=with_derivative)
    m_vec = ops.measurement_vec()
    out: dict[str, list[NrsfmRecord]] = {}
    for kind in regularizers:
        records = []
        for mu in mu_list:
            reg = Regularizer(RegKind.NONE) if mu == 0.0 else Regularizer(kind, float(mu))
            result = solve(instance, reg, config)
            W = result.solution
            fit = float(np.linalg.norm(ops.projection.apply(W) - m_vec))
            records.append(NrsfmRecord(
                regularizer=kind.value, mu=float(mu), rank=numerical_rank(W),
                data_fit=fit,
                gt_distance=float(np.linalg.norm(W - instance.ground_truth)),
                status=result.status.value, iterations=result.iterations,
                with_derivative=with_derivative, seed=str(seed),
            ))
        out[kind.value] = records
    return out


_GRID_COLUMNS = ["sigma_index", "mu_index", "sigma", "mu", "trial", "seed", "regularizer",
                 "threshold", "distance", "residual", "achieved", "target_hit", "verified",
                 "status", "iterations"]
_NRSFM_COLUMNS = ["regularizer", "mu", "rank", "data_fit", "gt_distance", "status",
                  "iterations", "with_derivative", "seed"]


def _write_csv(path, columns, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns)
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


def emit_results(obj, path, fmt: str = "csv", meta: Optional[dict] = None) -> None:
    """Write grid or study results; CSV holds the flat per-trial records,
    JSON additionally carries the resolved run parameters (the grid spec,
    or ``meta`` for study curves) and per-cell aggregates."""
    if fmt not in ("csv", "json"):
        raise ValueError(f"unknown format {fmt!r}")
    try:
        if isinstance(obj, GridResult):
            if fmt == "csv":
                _write_csv(path, _GRID_COLUMNS, (asdict(r) for r in obj.records()))
            else:
                doc = {
                    "schema": GRID_SCHEMA,
                    "spec": obj.spec,
                    "cells": [{"sigma": c.sigma, "mu": c.mu,
                               "aggregates": {k: asdict(v) for k, v in c.aggregates.items()}}
                              for c in obj.cells],
                    "records": [asdict(r) for r in obj.records()],
                }
                with open(path, "w") as fh:
                    json.dump(doc, fh, sort_keys=True, indent=2)
                    fh.write("\n")
        elif isinstance(obj, dict):  # nrsfm curves
            rows = [asdict(rec) for recs in obj.values() for rec in recs]
            if fmt == "csv":
                _write_csv(path, _NRSFM_COLUMNS, rows)
            else:
                with open(path, "w") as fh:
                    json.dump({"schema": NRSFM_SCHEMA, "params": meta or {}, "records": rows},
                              fh, sort_keys=True, indent=2)
                    fh.write("\n")
        else:
            raise TypeError(f"cannot emit {type(obj).__name__}")
    except OSError as exc:
        raise OSError(f"could not write results to {path}: {exc}") from exc
