"""Linear operators for recovery problems.

Two flavors share one interface: vector operators map R^n -> R^p, matrix
operators map m x n matrices to R^p. Matrix operators correspond to a
p x (m*n) dense matrix acting on column-stacked (column-major) entries;
``dense()`` materializes that representation for any operator, which is
how the structured operators are tested against their definitions.

The non-rigid reconstruction operators work on the wide reshape of a
stacked trajectory matrix: a 3F x n stack of per-frame 3 x n point sets
corresponds to an F x 3n matrix whose row f is the concatenation of the
three rows of frame f.
"""
from __future__ import annotations

import numpy as np


def stack_to_wide(X: np.ndarray, frames: int) -> np.ndarray:
    """(3F, n) stacked frames -> (F, 3n) wide form, row f = concat of frame f's rows."""
    n = X.shape[1]
    if X.shape[0] != 3 * frames:
        raise ValueError(f"expected {3 * frames} rows, got {X.shape[0]}")
    return X.reshape(frames, 3, n).reshape(frames, 3 * n)


def wide_to_stack(W: np.ndarray, frames: int) -> np.ndarray:
    """Inverse of :func:`stack_to_wide`."""
    if W.shape[0] != frames or W.shape[1] % 3:
        raise ValueError(f"bad wide shape {W.shape} for {frames} frames")
    n = W.shape[1] // 3
    return W.reshape(frames, 3, n).reshape(3 * frames, n)


class LinOp:
    """Base operator; subclasses set shape_in/shape_out and implement apply/adjoint."""

    shape_in: tuple[int, ...]
    shape_out: int

    @property
    def flavor(self) -> str:
        return "vector" if len(self.shape_in) == 1 else "matrix"

    def apply(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def adjoint(self, y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _check_domain(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != self.shape_in:
            raise ValueError(f"operator domain is {self.shape_in}, got {x.shape}")
        return x

    def dense(self) -> np.ndarray:
        """Column-stacked dense representation, shape (p, prod(shape_in))."""
        size = int(np.prod(self.shape_in))
        out = np.empty((self.shape_out, size))
        basis = np.zeros(size)
        for j in range(size):
            basis[j] = 1.0
            out[:, j] = self.apply(basis.reshape(self.shape_in, order="F"))
            basis[j] = 0.0
        return out


class DenseOp(LinOp):
    """Operator given by an explicit dense matrix.

    ``shape_in=(n,)`` gives the vector flavor; ``shape_in=(m, n)`` acts on
    matrices through column-major stacking of the entries.
    """

    def __init__(self, matrix: np.ndarray, shape_in: tuple[int, ...] | None = None):
        self.matrix = np.asarray(matrix, dtype=np.float64)
        if self.matrix.ndim != 2:
            raise ValueError("dense operator needs a 2-D matrix")
        if shape_in is None:
            shape_in = (self.matrix.shape[1],)
        if int(np.prod(shape_in)) != self.matrix.shape[1]:
            raise ValueError(f"shape_in {shape_in} does not match {self.matrix.shape[1]} columns")
        self.shape_in = tuple(shape_in)
        self.shape_out = self.matrix.shape[0]

    def apply(self, x):
        x = self._check_domain(x)
        return self.matrix @ x.ravel(order="F")

    def adjoint(self, y):
        return (self.matrix.T @ np.asarray(y, dtype=np.float64)).reshape(self.shape_in, order="F")

    def dense(self):
        return self.matrix


class ProjectionOp(LinOp):
    """Per-frame 2 x 3 camera projection acting on the wide trajectory form.

    rotations has shape (F, 2, 3); each block holds two rows of an
    orthogonal matrix. The domain is the (F, 3n) wide form, the output the
    column-stacked 2F x n measurement matrix.
    """

    def __init__(self, rotations: np.ndarray, points: int):
        self.rotations = np.asarray(rotations, dtype=np.float64)
        if self.rotations.ndim != 3 or self.rotations.shape[1:] != (2, 3):
            raise ValueError("rotations must have shape (F, 2, 3)")
        self.frames = self.rotations.shape[0]
        self.points = points
        self.shape_in = (self.frames, 3 * points)
        self.shape_out = 2 * self.frames * points

    def project(self, W: np.ndarray) -> np.ndarray:
        """Apply the per-frame blocks, returning the (2F, n) measurement matrix."""
        W = self._check_domain(W)
        X = wide_to_stack(W, self.frames).reshape(self.frames, 3, self.points)
        return np.einsum("fij,fjn->fin", self.rotations, X).reshape(2 * self.frames, self.points)

    def apply(self, W):
        return self.project(W).ravel(order="F")

    def adjoint(self, y):
        Y = np.asarray(y, dtype=np.float64).reshape(2 * self.frames, self.points, order="F")
        Yf = Y.reshape(self.frames, 2, self.points)
        X = np.einsum("fij,fin->fjn", self.rotations, Yf).reshape(3 * self.frames, self.points)
        return stack_to_wide(X, self.frames)


class DifferenceOp(LinOp):
    """First-order difference across the rows of an (F, w) matrix."""

    def __init__(self, frames: int, width: int):
        if frames < 2:
            raise ValueError("difference operator needs at least two rows")
        self.shape_in = (frames, width)
        self.shape_out = (frames - 1) * width

    def apply(self, W):
        W = self._check_domain(W)
        return (W[1:] - W[:-1]).ravel(order="F")

    def adjoint(self, y):
        frames, width = self.shape_in
        Y = np.asarray(y, dtype=np.float64).reshape(frames - 1, width, order="F")
        out = np.zeros(self.shape_in)
        out[:-1] -= Y
        out[1:] += Y
        return out


class StackedOp(LinOp):
    """Vertical stack of operators sharing one domain."""

    def __init__(self, ops: list[LinOp]):
        if not ops:
            raise ValueError("need at least one operator")
        self.ops = list(ops)
        self.shape_in = ops[0].shape_in
        for op in ops[1:]:
            if op.shape_in != self.shape_in:
                raise ValueError("stacked operators must share their domain")
        self.shape_out = sum(op.shape_out for op in ops)

    def apply(self, x):
        return np.concatenate([op.apply(x) for op in self.ops])

    def adjoint(self, y):
        y = np.asarray(y, dtype=np.float64)
        out = np.zeros(self.shape_in)
        offset = 0
        for op in self.ops:
            out += op.adjoint(y[offset : offset + op.shape_out])
            offset += op.shape_out
        return out


def random_rotations(frames: int, rng: np.random.Generator) -> np.ndarray:
    """(F, 2, 3) blocks: first two rows of uniformly random orthogonal 3x3 matrices.

    QR of a Gaussian matrix with the sign of the R diagonal folded into Q,
    which makes the distribution uniform and the draw deterministic per rng.
    """
    out = np.empty((frames, 2, 3))
    for f in range(frames):
        Q, R = np.linalg.qr(rng.standard_normal((3, 3)))
        Q = Q * np.sign(np.diag(R))
        out[f] = Q[:2]
    return out
