"""Problem instances and their generators.

An instance bundles a linear operator, the observation vector b, optional
ground truth, the operator's two-sided isometry constant delta when it is
known exactly, and the target cardinality/rank bound used by certificates.

All generators are deterministic in their seed (an int or a
``numpy.random.SeedSequence``); experiment drivers derive per-trial seeds
as ``SeedSequence([base_seed, *indices])``.

JSON schema (``caprox-instance-v1``)::

    {
      "schema": "caprox-instance-v1",
      "operator": {
        "kind": "rip_dense" | "gaussian_dense" | "dense" | "nrsfm_projection",
        ... kind-specific fields (see save_instance) ...
      },
      "b": [...],
      "ground_truth": nested list or null,
      "delta": float or null,
      "target": int or null,
      "provenance": {...} or null
    }

``rip_dense`` / ``gaussian_dense`` store the generator parameters and seed
and are regenerated exactly on load; ``dense`` stores explicit entries;
``nrsfm_projection`` stores the rotation blocks.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .operators import DenseOp, DifferenceOp, LinOp, ProjectionOp, StackedOp, random_rotations, stack_to_wide

SCHEMA = "caprox-instance-v1"


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    return np.random.default_rng(seed)


@dataclass
class Instance:
    op: LinOp
    b: np.ndarray
    ground_truth: Optional[np.ndarray] = None
    delta: Optional[float] = None
    target: Optional[int] = None
    provenance: Optional[dict] = None

    def __post_init__(self):
        self.b = np.asarray(self.b, dtype=np.float64)
        if self.b.shape != (self.op.shape_out,):
            raise ValueError(f"b has shape {self.b.shape}, operator output is {self.op.shape_out}")
        if self.delta is not None and not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")
        if self.ground_truth is not None:
            self.ground_truth = np.asarray(self.ground_truth, dtype=np.float64)
            if self.ground_truth.shape != self.op.shape_in:
                raise ValueError("ground truth does not match the operator domain")

    def check_calibration(self, atol: float = 1e-9) -> None:
        """Verify the recorded delta against the dense operator's spectrum.

        The exact constant requires every singular value s to satisfy
        sqrt(1-delta) - atol <= s <= sqrt(1+delta) + atol.
        """
        if self.delta is None:
            return
        if not isinstance(self.op, DenseOp):
            raise ValueError("calibration check needs a dense operator")
        s = np.linalg.svd(self.op.matrix, compute_uv=False)
        lo, hi = np.sqrt(1.0 - self.delta) - atol, np.sqrt(1.0 + self.delta) + atol
        if s.min() < lo or s.max() > hi:
            raise ValueError(
                f"operator spectrum [{s.min():.6g}, {s.max():.6g}] violates the recorded "
                f"delta={self.delta} bounds [{lo:.6g}, {hi:.6g}]"
            )


def gen_rip_dense(rows: int, cols: int, delta: float, seed, shape_in=None) -> DenseOp:
    """Dense operator whose squared singular values span [1-delta, 1+delta] exactly.

    Gaussian entries, then the singular spectrum is replaced by an
    inclusive linear grid from sqrt(1+delta) down to sqrt(1-delta), so the
    two-sided bound (1-delta)||x||^2 <= ||Ax||^2 <= (1+delta)||x||^2 holds
    for every x, not just sparse ones. Requires rows >= cols so the bound
    is realized by the full spectrum.
    """
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    if rows < cols:
        raise ValueError("calibration needs rows >= cols")
    rng = _rng(seed)
    U, _, Vt = np.linalg.svd(rng.standard_normal((rows, cols)), full_matrices=False)
    s = np.linspace(np.sqrt(1.0 + delta), np.sqrt(1.0 - delta), cols)
    return DenseOp((U * s) @ Vt, shape_in=shape_in)


def gen_gaussian_dense(rows: int, cols: int, variance: float, seed, shape_in=None) -> DenseOp:
    """Dense operator with iid N(0, variance) entries; no isometry constant recorded."""
    if not variance > 0:
        raise ValueError(f"variance must be positive, got {variance}")
    rng = _rng(seed)
    return DenseOp(np.sqrt(variance) * rng.standard_normal((rows, cols)), shape_in=shape_in)


def make_sparse_instance(n: int, cardinality: int, noise_sigma: float, op: DenseOp, seed,
                         delta: Optional[float] = None) -> Instance:
    """Ground truth with ``cardinality`` standard-normal entries on a random support."""
    if cardinality > n:
        raise ValueError(f"cardinality {cardinality} exceeds dimension {n}")
    if noise_sigma < 0:
        raise ValueError("noise_sigma must be nonnegative")
    if op.shape_in != (n,):
        raise ValueError(f"operator domain {op.shape_in} does not match n={n}")
    rng = _rng(seed)
    x = np.zeros(n)
    support = rng.choice(n, size=cardinality, replace=False)
    x[support] = rng.standard_normal(cardinality)
    b = op.apply(x) + noise_sigma * rng.standard_normal(op.shape_out)
    return Instance(op, b, ground_truth=x, delta=delta, target=cardinality)


def make_lowrank_instance(m: int, n: int, rank: int, noise_sigma: float, op: DenseOp, seed,
                          delta: Optional[float] = None) -> Instance:
    """Rank-``rank`` ground truth U V^T with standard-normal factors."""
    if rank > min(m, n):
        raise ValueError(f"rank {rank} exceeds min(m, n) = {min(m, n)}")
    if noise_sigma < 0:
        raise ValueError("noise_sigma must be nonnegative")
    if op.shape_in != (m, n):
        raise ValueError(f"operator domain {op.shape_in} does not match ({m}, {n})")
    rng = _rng(seed)
    if rank == 0:
        X = np.zeros((m, n))
    else:
        X = rng.standard_normal((m, rank)) @ rng.standard_normal((n, rank)).T
    b = op.apply(X) + noise_sigma * rng.standard_normal(op.shape_out)
    return Instance(op, b, ground_truth=X, delta=delta, target=rank)


@dataclass
class NrsfmOps:
    """Operators and data of a non-rigid reconstruction problem."""

    rotations: np.ndarray  # (F, 2, 3)
    projection: ProjectionOp
    difference: DifferenceOp
    measurements: np.ndarray  # (2F, n)
    frames: int
    points: int
    basis_size: int

    def measurement_vec(self) -> np.ndarray:
        return self.measurements.ravel(order="F")


def make_nrsfm_instance(frames: int, points: int, basis_size: int, noise_sigma: float, seed,
                        with_derivative: bool = False) -> tuple[Instance, NrsfmOps]:
    """Synthetic deforming shapes from a random low-dimensional basis.

    Per-frame shapes are combinations of ``basis_size`` random 3 x n basis
    shapes, so the wide ground-truth matrix has rank <= basis_size. The
    instance variable is the wide (F, 3n) form; when ``with_derivative`` is
    set, the first-order row difference is stacked under the projection
    with zero observations appended, which adds ||D W||^2 to the data term.
    """
    if basis_size > frames or basis_size > points:
        raise ValueError("basis_size must not exceed frames or points")
    if noise_sigma < 0:
        raise ValueError("noise_sigma must be nonnegative")
    rng = _rng(seed)
    basis = rng.standard_normal((basis_size, 3, points))
    coeffs = rng.standard_normal((frames, basis_size))
    X = np.einsum("fk,kjn->fjn", coeffs, basis).reshape(3 * frames, points)
    W_gt = stack_to_wide(X, frames)
    rotations = random_rotations(frames, rng)
    projection = ProjectionOp(rotations, points)
    M = projection.project(W_gt) + noise_sigma * rng.standard_normal((2 * frames, points))
    ops = NrsfmOps(rotations, projection, DifferenceOp(frames, 3 * points), M,
                   frames, points, basis_size)
    b = M.ravel(order="F")
    op: LinOp = projection
    if with_derivative:
        op = StackedOp([projection, ops.difference])
        b = np.concatenate([b, np.zeros(ops.difference.shape_out)])
    instance = Instance(op, b, ground_truth=W_gt, target=basis_size)
    return instance, ops


def _ground_truth_payload(instance: Instance):
    if instance.ground_truth is None:
        return None
    return instance.ground_truth.tolist()


def save_instance(instance: Instance, path) -> None:
    """Write the JSON form described in the module docstring."""
    op = instance.op
    prov = instance.provenance or {}
    kind = prov.get("generator")
    if kind in ("rip_dense", "gaussian_dense"):
        operator = {"kind": kind, **prov["params"]}
    elif isinstance(op, ProjectionOp):
        operator = {"kind": "nrsfm_projection", "rotations": op.rotations.tolist(),
                    "points": op.points}
    elif isinstance(op, DenseOp):
        operator = {"kind": "dense", "entries": op.matrix.tolist(),
                    "shape_in": list(op.shape_in)}
    else:
        raise ValueError(f"cannot serialize operator of type {type(op).__name__}")
    doc = {
        "schema": SCHEMA,
        "operator": operator,
        "b": instance.b.tolist(),
        "ground_truth": _ground_truth_payload(instance),
        "delta": instance.delta,
        "target": instance.target,
        "provenance": instance.provenance,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True, indent=2)
        fh.write("\n")


def load_instance(path) -> Instance:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("schema") != SCHEMA:
        raise ValueError(f"unrecognized instance schema {doc.get('schema')!r}")
    spec = doc["operator"]
    kind = spec["kind"]
    if kind == "rip_dense":
        op = gen_rip_dense(spec["rows"], spec["cols"], spec["delta"], spec["seed"],
                           shape_in=tuple(spec["shape_in"]) if spec.get("shape_in") else None)
    elif kind == "gaussian_dense":
        op = gen_gaussian_dense(spec["rows"], spec["cols"], spec["variance"], spec["seed"],
                                shape_in=tuple(spec["shape_in"]) if spec.get("shape_in") else None)
    elif kind == "dense":
        op = DenseOp(np.array(spec["entries"]), shape_in=tuple(spec["shape_in"]))
    elif kind == "nrsfm_projection":
        op = ProjectionOp(np.array(spec["rotations"]), spec["points"])
    else:
        raise ValueError(f"unrecognized operator kind {kind!r}")
    gt = doc.get("ground_truth")
    inst = Instance(op, np.array(doc["b"]),
                    ground_truth=None if gt is None else np.array(gt),
                    delta=doc.get("delta"), target=doc.get("target"),
                    provenance=doc.get("provenance"))
    if kind == "dense" and inst.delta is not None:
        # explicit entries are untrusted; generator-backed kinds are exact
        # by construction
        inst.check_calibration()
    return inst
