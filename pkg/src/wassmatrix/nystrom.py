"""Column-sampled completion of symmetric distance matrices.

Given the block of fully computed columns C = D(:, I) and its core
U = D(I, I), the completed matrix is the symmetric product C U^+ C^T
with U^+ a truncated pseudoinverse.  When rank(U) equals rank(D) the
product reproduces D exactly; the estimate is sanitized afterwards
(zero diagonal, symmetrization, negative clamp) so it satisfies the
distance-matrix invariants.  Sampled rows/columns are NOT re-imposed on
the output by default; the product already is the estimate.

Also here: the incoherence diagnostic of the top-r singular subspace
and the Procrustes alignment distance used to compare embeddings.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm
from scipy.optimize import minimize

from .errors import (
    DegenerateCore,
    InvariantViolation,
    NotCentered,
    RankOutOfRange,
    ShapeMismatch,
)
from .matrixio import DistanceMatrix, MatrixKind

_CENTER_TOL = 1e-8


def _freeze(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class ColumnBlock:
    """Fully observed columns D(:, I) together with their core D(I, I)."""

    columns: np.ndarray
    indices: np.ndarray
    core: np.ndarray

    def __init__(self, columns, indices, core=None):
        columns = np.array(columns, dtype=np.float64)
        indices = np.array(indices, dtype=np.int64).ravel()
        if columns.ndim != 2 or columns.shape[1] != indices.shape[0]:
            raise InvariantViolation(
                f"columns shape {columns.shape} does not match "
                f"{indices.shape[0]} indices"
            )
        n = columns.shape[0]
        if indices.size == 0 or np.any(indices < 0) or np.any(indices >= n):
            raise InvariantViolation("column indices out of range")
        if np.unique(indices).size != indices.size:
            raise InvariantViolation("duplicate column indices")
        derived = columns[indices, :]
        if core is None:
            core = derived
        else:
            core = np.asarray(core, dtype=np.float64)
            if not np.array_equal(core, derived):
                raise InvariantViolation("core must equal columns(I, :)")
        if not np.array_equal(core, core.T):
            raise InvariantViolation("core must be symmetric")
        if np.any(np.diagonal(core) != 0.0):
            raise InvariantViolation("core diagonal must be zero")
        object.__setattr__(self, "columns", _freeze(columns))
        object.__setattr__(self, "indices", _freeze(indices))
        object.__setattr__(self, "core", _freeze(np.array(core)))

    @property
    def size(self) -> int:
        return self.columns.shape[0]

    @property
    def count(self) -> int:
        return self.indices.shape[0]

    @staticmethod
    def from_matrix(matrix: DistanceMatrix, indices) -> "ColumnBlock":
        """Extract sampled columns from a matrix that observes them.

        Works on FULL matrices and on PARTIAL matrices whose mask covers
        the requested columns.
        """
        indices = np.asarray(indices, dtype=np.int64).ravel()
        if np.any(indices < 0) or np.any(indices >= matrix.size):
            raise InvariantViolation("column indices out of range")
        if matrix.kind is MatrixKind.PARTIAL and not matrix.mask[:, indices].all():
            raise InvariantViolation("matrix does not observe all requested columns")
        return ColumnBlock(matrix.values[:, indices], indices)


def truncated_pinv(matrix: np.ndarray, rel_tolerance: float) -> np.ndarray:
    """Moore-Penrose pseudoinverse with singular values below
    ``rel_tolerance * sigma_max`` truncated to zero."""
    u, s, vt = np.linalg.svd(matrix)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros_like(matrix.T)
    keep = s > rel_tolerance * s[0]
    inv = np.where(keep, 1.0 / np.where(keep, s, 1.0), 0.0)
    return (vt.T * inv) @ u.T


def nystrom_product(columns: np.ndarray, core: np.ndarray,
                    pinv_tolerance: float = 1e-10) -> np.ndarray:
    """Raw symmetric Nystrom extension C U^+ C^T, unsanitized."""
    return columns @ truncated_pinv(core, pinv_tolerance) @ columns.T


def complete_nystrom(block: ColumnBlock, pinv_tolerance: float = 1e-10,
                     reimpose_observed: bool = False) -> DistanceMatrix:
    """Complete a distance matrix from a column block.

    ``reimpose_observed`` overwrites the sampled rows/columns of the
    product with the computed values afterwards; off by default since
    the plain product is the estimator (and re-imposition breaks the
    symmetric factorization that makes exact recovery provable).
    """
    if not np.any(block.core) and np.any(block.columns):
        raise DegenerateCore("core block is identically zero")
    d_est = nystrom_product(block.columns, block.core, pinv_tolerance)
    if reimpose_observed:
        d_est[:, block.indices] = block.columns
        d_est[block.indices, :] = block.columns.T
    d_est = 0.5 * (d_est + d_est.T)
    np.fill_diagonal(d_est, 0.0)
    np.maximum(d_est, 0.0, out=d_est)
    return DistanceMatrix.estimated(d_est)


def incoherence(matrix: DistanceMatrix, r: int) -> float:
    """sqrt(N/r) times the largest row norm of the top-r singular subspace.

    Always lies in [1, sqrt(N/r)]; 1 means perfectly flat leverage.
    """
    n = matrix.size
    if not 1 <= r <= n:
        raise RankOutOfRange(f"need 1 <= r <= {n}, got {r}")
    u, _, _ = np.linalg.svd(matrix.values)
    rows = np.linalg.norm(u[:, :r], axis=1)
    return float(np.sqrt(n / r) * rows.max())


def procrustes_distance(Z: np.ndarray, Y: np.ndarray) -> float:
    """Spectral-norm discrepancy min over orthogonal R of ||Z - Y R||_2.

    Both configurations are rows-as-points and must be column-centered.
    The alignment starts from the SVD of Y^T Z (the Frobenius-optimal
    orthogonal Procrustes solution, reflections allowed); because that
    solution need not minimize the spectral norm, a short derivative-free
    descent over both connected components of O(d) tightens it.  The
    result never exceeds the SVD-aligned value.
    """
    Z = np.asarray(Z, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if Z.shape != Y.shape or Z.ndim != 2:
        raise ShapeMismatch(f"configurations differ: {Z.shape} vs {Y.shape}")
    if (np.abs(Z.mean(axis=0)).max() > _CENTER_TOL
            or np.abs(Y.mean(axis=0)).max() > _CENTER_TOL):
        raise NotCentered("both configurations must have zero column means")
    d = Z.shape[1]
    u, _, vt = np.linalg.svd(Y.T @ Z)
    flip = np.ones(d)
    flip[-1] = -1.0
    candidates = [u @ vt, (u * flip) @ vt]

    def value(rotation: np.ndarray) -> float:
        return float(np.linalg.norm(Z - Y @ rotation, 2))

    best = min(value(r) for r in candidates)
    if d == 1 or best <= 1e-12 * max(np.linalg.norm(Y, 2), 1.0):
        return best  # O(1) is enumerated exactly; or already at roundoff
    triu = np.triu_indices(d, 1)

    def polished(start: np.ndarray) -> float:
        def objective(theta: np.ndarray) -> float:
            skew = np.zeros((d, d))
            skew[triu] = theta
            return value(start @ expm(skew - skew.T))

        res = minimize(objective, np.zeros(d * (d - 1) // 2), method="Powell",
                       options={"maxiter": 200, "xtol": 1e-12, "ftol": 1e-12})
        return float(res.fun)

    return min([best] + [polished(r) for r in candidates])
