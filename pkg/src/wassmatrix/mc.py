"""Squared-distance matrix completion through a centered Gram factor.

Observed entries D_ij enter through the sampling operator

    A(X)_alpha = X_ii + X_jj - 2 X_ij,        alpha = (i, j) in Omega,

which turns the Gram matrix QQ^T of a factor Q in R^{N x q} into
squared row distances.  Completion minimizes the augmented-Lagrangian
objective

    L(Q; lambda) = 1/2 || A(QQ^T) - b + lambda ||^2

by alternating blocks of Barzilai-Borwein gradient steps on Q with
multiplier ascent lambda += damping * (A(QQ^T) - b).  The gradient is
2 * As(r) Q where r = A(QQ^T) - b + lambda and As is the adjoint of A,
scattering r_alpha with +1 onto (i,i), (j,j) and -1 onto (i,j), (j,i);
this is verified against finite differences in the test suite.  The
centering constraint Q^T 1 = 0 is maintained by projecting column means
to zero after every step (the objective is translation invariant, so
the projection never increases it).

The estimated matrix is read off as the squared row distances of the
final factor, then sanitized: zero diagonal, symmetrized, and negative
entries clamped to zero.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    Diverged,
    EmptyPlan,
    FormatError,
    IndexOutOfRange,
    InvariantViolation,
)
from .matrixio import DistanceMatrix

_CENTER_TOL = 1e-8


@dataclass(frozen=True)
class McConfig:
    """Solver knobs for :func:`complete_mc`.

    ``max_outer_iters * inner_steps`` caps the total number of BB steps.
    ``bb_step_bounds`` clamp the raw BB1 step; a nonpositive secant
    curvature falls back to the lower bound.
    """

    rank_estimate: int = 10
    max_outer_iters: int = 300
    inner_steps: int = 100
    residual_tolerance: float = 1e-6
    bb_step_bounds: tuple = (1e-12, 1e10)
    multiplier_update_damping: float = 1.0
    divergence_patience: int = 50
    initial_step: float | None = None  # None: 1/||grad|| at the start point
    seed: int = 0

    def __post_init__(self):
        if self.rank_estimate < 1:
            raise ValueError("rank_estimate must be >= 1")
        if self.max_outer_iters < 1 or self.inner_steps < 1:
            raise ValueError("iteration limits must be >= 1")
        if self.residual_tolerance <= 0:
            raise ValueError("residual_tolerance must be > 0")
        lo, hi = self.bb_step_bounds
        if not 0 < lo <= hi:
            raise ValueError("bb_step_bounds must satisfy 0 < lo <= hi")
        if self.initial_step is not None and self.initial_step <= 0:
            raise ValueError("initial_step must be > 0 when given")

    def to_json(self) -> dict:
        return {
            "rank_estimate": self.rank_estimate,
            "max_outer_iters": self.max_outer_iters,
            "inner_steps": self.inner_steps,
            "residual_tolerance": self.residual_tolerance,
            "bb_step_bounds": list(self.bb_step_bounds),
            "multiplier_update_damping": self.multiplier_update_damping,
            "divergence_patience": self.divergence_patience,
            "initial_step": self.initial_step,
            "seed": self.seed,
        }

    @staticmethod
    def from_json(obj: dict) -> "McConfig":
        try:
            obj = dict(obj)
            if "bb_step_bounds" in obj:
                obj["bb_step_bounds"] = tuple(obj["bb_step_bounds"])
            return McConfig(**obj)
        except TypeError as exc:
            raise FormatError(f"malformed McConfig: {exc}") from exc


@dataclass(frozen=True)
class GramFactor:
    """Centered factor whose Gram matrix encodes completed distances."""

    factor: np.ndarray
    rank_estimate: int

    def __init__(self, factor):
        factor = np.asarray(factor, dtype=np.float64)
        if factor.ndim != 2:
            raise InvariantViolation("factor must be an (N, q) array")
        if np.abs(factor.sum(axis=0)).max() > _CENTER_TOL:
            raise InvariantViolation("factor column sums are not zero")
        factor = factor.copy()
        factor.flags.writeable = False
        object.__setattr__(self, "factor", factor)
        object.__setattr__(self, "rank_estimate", factor.shape[1])

    def gram(self) -> np.ndarray:
        return self.factor @ self.factor.T

    def squared_distances(self) -> np.ndarray:
        return _row_squared_distances(self.factor)


@dataclass
class ConvergenceReport:
    iterations: int
    outer_iterations: int
    final_residual: float
    stop_reason: str
    residual_trace: list = field(default_factory=list)
    factor: GramFactor | None = None

    def to_json(self, max_trace: int = 200) -> dict:
        trace = self.residual_trace
        if len(trace) > max_trace:  # thin, always keeping the last point
            stride = -(-len(trace) // max_trace)
            trace = trace[::stride] + ([trace[-1]] if (len(trace) - 1) % stride else [])
        return {
            "iterations": self.iterations,
            "outer_iterations": self.outer_iterations,
            "final_residual": self.final_residual,
            "stop_reason": self.stop_reason,
            "residual_trace": [float(v) for v in trace],
        }

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), sort_keys=True) + "\n")


# --- sampling operator -----------------------------------------------------------

def apply_A(X: np.ndarray, pairs: np.ndarray) -> np.ndarray:
    """A(X)_alpha = X_ii + X_jj - 2 X_ij for each pair alpha = (i, j)."""
    X = np.asarray(X)
    n = X.shape[0]
    pairs = np.asarray(pairs, dtype=np.int64)
    if pairs.size and (pairs.min() < 0 or pairs.max() >= n):
        raise IndexOutOfRange(f"pair index out of range for {n}x{n} matrix")
    ii, jj = pairs[:, 0], pairs[:, 1]
    return X[ii, ii] + X[jj, jj] - 2.0 * X[ii, jj]


def apply_A_adjoint(v: np.ndarray, pairs: np.ndarray, n: int) -> np.ndarray:
    """Adjoint As(v) = sum_alpha v_alpha (e_i - e_j)(e_i - e_j)^T (dense)."""
    out = np.zeros((n, n))
    ii, jj = pairs[:, 0], pairs[:, 1]
    np.add.at(out, (ii, ii), v)
    np.add.at(out, (jj, jj), v)
    np.add.at(out, (ii, jj), -v)
    np.add.at(out, (jj, ii), -v)
    return out


def _row_squared_distances(Q: np.ndarray) -> np.ndarray:
    g = np.einsum("ij,ij->i", Q, Q)
    d = g[:, None] + g[None, :] - 2.0 * (Q @ Q.T)
    return d


def _apply_A_gram(Q: np.ndarray, ii: np.ndarray, jj: np.ndarray) -> np.ndarray:
    g = np.einsum("ij,ij->i", Q, Q)
    return g[ii] + g[jj] - 2.0 * np.einsum("ij,ij->i", Q[ii], Q[jj])


def lagrangian_value(Q: np.ndarray, pairs: np.ndarray, b: np.ndarray,
                     lam: np.ndarray) -> float:
    r = _apply_A_gram(Q, pairs[:, 0], pairs[:, 1]) - b + lam
    return 0.5 * float(r @ r)


def lagrangian_gradient(Q: np.ndarray, pairs: np.ndarray, b: np.ndarray,
                        lam: np.ndarray) -> np.ndarray:
    """Analytic gradient 2 * As(r) Q of the augmented Lagrangian."""
    n, q = Q.shape
    ii, jj = pairs[:, 0], pairs[:, 1]
    r = _apply_A_gram(Q, ii, jj) - b + lam
    t = r[:, None] * (Q[ii] - Q[jj])
    idx = (np.concatenate([ii, jj])[:, None] * q + np.arange(q)).ravel()
    contrib = np.concatenate([t, -t]).ravel()
    return 2.0 * np.bincount(idx, contrib, minlength=n * q).reshape(n, q)


def bb_step(gradient_current: np.ndarray, gradient_previous: np.ndarray,
            iterate_current: np.ndarray, iterate_previous: np.ndarray,
            bounds: tuple = (1e-12, 1e10)) -> float:
    """BB1 step <dx, dx> / <dx, dg>, clamped to ``bounds``.

    Falls back to the lower bound when the secant curvature <dx, dg> is
    nonpositive (the quadratic model is unusable there).
    """
    dx = np.ravel(iterate_current) - np.ravel(iterate_previous)
    dg = np.ravel(gradient_current) - np.ravel(gradient_previous)
    denom = float(dx @ dg)
    lo, hi = bounds
    if denom <= 0.0:
        return lo
    step = float(dx @ dx) / denom
    return min(max(step, lo), hi)


# --- completion driver ------------------------------------------------------------

def complete_mc(d_obs: DistanceMatrix,
                cfg: McConfig) -> tuple[DistanceMatrix, ConvergenceReport]:
    """Estimate the full squared-distance matrix from observed entries.

    Runs blocks of ``cfg.inner_steps`` BB steps on the factor, checking
    the relative observed residual ||A(QQ^T) - b|| / ||b|| after each
    block and updating the multipliers between blocks.  Raises
    :class:`Diverged` when the block residual is non-finite or grows for
    ``cfg.divergence_patience`` consecutive blocks.
    """
    n = d_obs.size
    q = cfg.rank_estimate
    if q > n:
        raise ValueError(f"rank estimate {q} exceeds matrix size {n}")
    ii, jj = d_obs.observed_pairs()
    if ii.size == 0:
        raise EmptyPlan("no observed off-diagonal entries to fit")
    b = d_obs.values[ii, jj]
    bnorm = float(np.linalg.norm(b))

    rng = np.random.default_rng(cfg.seed)
    scale = float(np.sqrt(max(b.mean(), 0.0) / q))
    Q = rng.standard_normal((n, q)) * scale
    Q -= Q.mean(axis=0)
    lam = np.zeros_like(b)

    scatter_idx = (np.concatenate([ii, jj])[:, None] * q + np.arange(q)).ravel()

    def grad(Q: np.ndarray, r: np.ndarray) -> np.ndarray:
        t = r[:, None] * (Q[ii] - Q[jj])
        contrib = np.concatenate([t, -t]).ravel()
        return 2.0 * np.bincount(scatter_idx, contrib, minlength=n * q).reshape(n, q)

    def rel_residual(Q: np.ndarray) -> float:
        res = float(np.linalg.norm(_apply_A_gram(Q, ii, jj) - b))
        return res / bnorm if bnorm > 0 else res

    total_steps = 0
    trace: list[float] = []
    stop_reason = "max_iters"
    growth_run = 0
    outer_done = 0
    current = rel_residual(Q)
    trace.append(current)
    if current <= cfg.residual_tolerance:
        stop_reason = "converged"
    else:
        for outer in range(cfg.max_outer_iters):
            Q_prev = None
            g_prev = None
            for _ in range(cfg.inner_steps):
                r = _apply_A_gram(Q, ii, jj) - b + lam
                g = grad(Q, r)
                if Q_prev is None:
                    if cfg.initial_step is not None:
                        step = cfg.initial_step
                    else:
                        gn = float(np.linalg.norm(g))
                        step = 1.0 / gn if gn > 0 else cfg.bb_step_bounds[0]
                    step = min(max(step, cfg.bb_step_bounds[0]),
                               cfg.bb_step_bounds[1])
                else:
                    step = bb_step(g, g_prev, Q, Q_prev, cfg.bb_step_bounds)
                Q_prev, g_prev = Q, g
                Q = Q - step * g
                Q -= Q.mean(axis=0)
                total_steps += 1
            outer_done = outer + 1
            previous, current = current, rel_residual(Q)
            trace.append(current)
            if not np.isfinite(current):
                raise Diverged(f"residual became non-finite at block {outer_done}")
            growth_run = growth_run + 1 if current > previous else 0
            if growth_run >= cfg.divergence_patience:
                raise Diverged(
                    f"residual grew for {growth_run} consecutive blocks"
                )
            if current <= cfg.residual_tolerance:
                stop_reason = "converged"
                break
            lam = lam + cfg.multiplier_update_damping * (
                _apply_A_gram(Q, ii, jj) - b)

    d_est = _row_squared_distances(Q)
    np.fill_diagonal(d_est, 0.0)
    d_est = 0.5 * (d_est + d_est.T)
    np.maximum(d_est, 0.0, out=d_est)
    report = ConvergenceReport(
        iterations=total_steps,
        outer_iterations=outer_done,
        final_residual=current,
        stop_reason=stop_reason,
        residual_trace=trace,
        factor=GramFactor(Q),
    )
    return DistanceMatrix.estimated(d_est), report
