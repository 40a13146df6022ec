"""Exact squared quadratic Wasserstein distances between discrete measures.

``w2_squared`` solves the transportation linear program exactly: uniform
measures with equal atom counts reduce to an assignment problem (solved
by scipy's exact Jonker-Volgenant implementation); everything else goes
through the HiGHS simplex LP solver.  Two independent routes exist for
testing: a permutation brute force for small uniform instances and the
sorted-quantile closed form for measures on the line.

``w2_matrix`` assembles the N x N matrix D_ij = W2(mu_i, mu_j)^2 for a
dataset, either in full or restricted to a sample plan (entry set or
column set), optionally fanning the independent pair solves out over a
process pool.  Entries are pure functions of the two measures, so the
result is identical for any worker count.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.optimize import linear_sum_assignment, linprog
from scipy.spatial.distance import cdist

from .errors import (
    DimensionMismatch,
    IndexOutOfRange,
    InvariantViolation,
    SolverFailure,
    UnsupportedInstance,
)
from .matrixio import DistanceMatrix, MatrixKind
from .measures import DiscreteMeasure, MeasureDataset
from .sampling import SamplePlan

_MARGINAL_TOL = 1e-9
_UNIFORM_TOL = 1e-12


def cost_matrix(mu: DiscreteMeasure, nu: DiscreteMeasure) -> np.ndarray:
    """Quadratic ground cost C_ij = ||x_i - y_j||^2."""
    if mu.dimension != nu.dimension:
        raise DimensionMismatch(
            f"measures live in R^{mu.dimension} and R^{nu.dimension}"
        )
    return cdist(mu.points, nu.points, "sqeuclidean")


@dataclass(frozen=True)
class Coupling:
    """Transport plan with prescribed marginals."""

    plan: np.ndarray

    def __init__(self, plan, row_marginal, col_marginal):
        plan = np.asarray(plan, dtype=np.float64)
        if np.any(plan < -_MARGINAL_TOL):
            raise InvariantViolation("coupling has negative mass")
        plan = np.maximum(plan, 0.0)
        if (np.abs(plan.sum(axis=1) - row_marginal).max() > _MARGINAL_TOL
                or np.abs(plan.sum(axis=0) - col_marginal).max() > _MARGINAL_TOL):
            raise InvariantViolation("coupling marginals are off by > 1e-9")
        object.__setattr__(self, "plan", plan)


def _solve_transport(cost: np.ndarray, a: np.ndarray, b: np.ndarray):
    """Exact optimum of the balanced transportation LP; returns (value, plan)."""
    m, n = cost.shape
    if m == 1:  # coupling is forced by the column marginal
        plan = b[None, :].copy()
        return float(cost[0] @ b), plan
    if n == 1:
        plan = a[:, None].copy()
        return float(cost[:, 0] @ a), plan
    rows = sparse.kron(sparse.eye(m, format="csr"),
                       np.ones((1, n)), format="csr")
    cols = sparse.kron(np.ones((1, m)),
                       sparse.eye(n, format="csr"), format="csr")
    res = linprog(
        cost.ravel(),
        A_eq=sparse.vstack([rows, cols], format="csr"),
        b_eq=np.concatenate([a, b]),
        bounds=(0, None),
        method="highs",
    )
    if res.status != 0:
        raise SolverFailure(f"transportation LP failed: {res.message}")
    # costs are nonnegative, so a negative optimum can only be solver noise
    return max(float(res.fun), 0.0), res.x.reshape(m, n)


def _w2_from_arrays(x: np.ndarray, wx: np.ndarray,
                    y: np.ndarray, wy: np.ndarray) -> float:
    if x.shape[1] != y.shape[1]:
        raise DimensionMismatch(
            f"measures live in R^{x.shape[1]} and R^{y.shape[1]}"
        )
    cost = cdist(x, y, "sqeuclidean")
    m, n = cost.shape
    if m == n and (np.abs(wx - 1.0 / m).max() <= _UNIFORM_TOL
                   and np.abs(wy - 1.0 / n).max() <= _UNIFORM_TOL):
        rows, cols = linear_sum_assignment(cost)
        return float(cost[rows, cols].sum() / m)
    if m == 1:
        return float(cost[0] @ wy)
    if n == 1:
        return float(cost[:, 0] @ wx)
    value, _ = _solve_transport(cost, wx, wy)
    return value


def w2_squared(mu: DiscreteMeasure, nu: DiscreteMeasure,
               return_plan: bool = False):
    """Exact W2(mu, nu)^2 via the transportation linear program.

    With ``return_plan=True`` also returns an optimal :class:`Coupling`
    (which optimal vertex is returned is solver-dependent; only the
    value is contracted).
    """
    cost = cost_matrix(mu, nu)
    m, n = cost.shape
    if not return_plan:
        return _w2_from_arrays(mu.points, mu.weights, nu.points, nu.weights)
    if m == n and mu.is_uniform() and nu.is_uniform():
        rows, cols = linear_sum_assignment(cost)
        plan = np.zeros((m, n))
        plan[rows, cols] = 1.0 / m
        value = float(cost[rows, cols].sum() / m)
    else:
        value, plan = _solve_transport(cost, mu.weights, nu.weights)
    return value, Coupling(plan, mu.weights, nu.weights)


def w2_squared_1d(mu: DiscreteMeasure, nu: DiscreteMeasure) -> float:
    """Closed-form W2^2 on the line via monotone (quantile) coupling.

    Independent of the LP route: sorts both supports and matches CDF mass
    front to back.  Exact for arbitrary weights and atom counts.
    """
    if mu.dimension != 1 or nu.dimension != 1:
        raise DimensionMismatch("quantile closed form requires measures on R")
    ix = np.argsort(mu.points[:, 0], kind="stable")
    iy = np.argsort(nu.points[:, 0], kind="stable")
    x, wx = mu.points[ix, 0], mu.weights[ix].copy()
    y, wy = nu.points[iy, 0], nu.weights[iy].copy()
    total = 0.0
    i = j = 0
    while i < x.size and j < y.size:
        mass = min(wx[i], wy[j])
        total += mass * (x[i] - y[j]) ** 2
        wx[i] -= mass
        wy[j] -= mass
        if wx[i] <= 0.0:
            i += 1
        if j < y.size and wy[j] <= 0.0:
            j += 1
    return float(total)


def w2_squared_bruteforce(mu: DiscreteMeasure, nu: DiscreteMeasure) -> float:
    """Exhaustive minimum over all m! permutation couplings.

    Only valid for uniform measures with equal atom counts m <= 8, where
    the transportation polytope's vertices are permutation matrices / m.
    """
    m = mu.num_atoms
    if m != nu.num_atoms:
        raise UnsupportedInstance("brute force needs equal atom counts")
    if m > 8:
        raise UnsupportedInstance(f"brute force capped at 8 atoms, got {m}")
    if not (mu.is_uniform() and nu.is_uniform()):
        raise UnsupportedInstance("brute force needs uniform weights")
    cost = cost_matrix(mu, nu)
    idx = np.arange(m)
    best = np.inf
    for perm in itertools.permutations(range(m)):
        best = min(best, cost[idx, perm].sum())
    return float(best / m)


# --- matrix assembly -----------------------------------------------------------

_POOL_DATA: tuple | None = None


def _pool_init(points: list, weights: list) -> None:
    global _POOL_DATA
    _POOL_DATA = (points, weights)


def _pool_solve(pairs: np.ndarray) -> np.ndarray:
    points, weights = _POOL_DATA
    out = np.empty(pairs.shape[0])
    for k, (i, j) in enumerate(pairs):
        out[k] = _w2_from_arrays(points[i], weights[i], points[j], weights[j])
    return out


def _required_pairs(n: int, plan: SamplePlan | None) -> np.ndarray:
    if plan is None:
        iu, ju = np.triu_indices(n, k=1)
        return np.column_stack([iu, ju])
    if plan.size != n:
        raise IndexOutOfRange(f"plan is for size {plan.size}, dataset has {n}")
    if plan.is_entries:
        return plan.indices.copy()
    cols = np.zeros(n, bool)
    cols[plan.indices] = True
    iu, ju = np.triu_indices(n, k=1)
    sel = cols[iu] | cols[ju]
    return np.column_stack([iu[sel], ju[sel]])


def w2_matrix(data: MeasureDataset, plan: SamplePlan | None = None,
              workers: int = 1) -> DistanceMatrix:
    """Squared W2 distance matrix of a dataset.

    ``plan=None`` computes all N(N-1)/2 upper-triangle entries and
    mirrors them.  An entry plan computes exactly its pairs; a column
    plan computes every entry in the sampled columns (and, by symmetry,
    rows).  Independent pair solves may be distributed over ``workers``
    processes; the result does not depend on the worker count.
    """
    n = len(data)
    if workers < 1:
        raise ValueError("workers must be >= 1")
    pairs = _required_pairs(n, plan)
    points = [mu.points for mu in data.measures]
    weights = [mu.weights for mu in data.measures]
    if workers == 1 or pairs.shape[0] < 2 * workers:
        _pool_init(points, weights)
        vals = _pool_solve(pairs)
    else:
        chunks = np.array_split(pairs, workers * 4)
        chunks = [c for c in chunks if c.shape[0]]
        with ProcessPoolExecutor(max_workers=workers, initializer=_pool_init,
                                 initargs=(points, weights)) as pool:
            vals = np.concatenate(list(pool.map(_pool_solve, chunks)))
    values = np.zeros((n, n))
    mask = np.eye(n, dtype=bool)
    ii, jj = pairs[:, 0], pairs[:, 1]
    values[ii, jj] = vals
    values[jj, ii] = vals
    mask[ii, jj] = True
    mask[jj, ii] = True
    kind = MatrixKind.FULL if mask.all() else MatrixKind.PARTIAL
    return DistanceMatrix(values, mask, kind)
