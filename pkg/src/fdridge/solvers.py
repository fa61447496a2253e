"""Ridge regression solvers: exact, one-shot sketched, and iterative.

The sketch-and-solve estimators never form the n x d data more than once;
the iterative refinement scheme reuses a single Frequent Directions
sketch as a fixed preconditioner and touches the data only through
matrix-vector products.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.linalg

from .sketch import MODE_FD, SketchOutput, StreamingSketch

# An iterate whose norm exceeds this multiple of |A^T y| / gamma has left
# the region where any ridge solution can live; treat it as divergence.
DIVERGENCE_FACTOR = 1e8


class DivergenceError(RuntimeError):
    """Raised when an iterative solve blows past the divergence guard."""

    def __init__(self, iteration: int, trace: "IterativeTrace"):
        super().__init__(
            f"iterate norm exceeded the divergence guard at iteration {iteration}")
        self.iteration = iteration
        self.trace = trace


@dataclass(frozen=True, eq=False)
class RidgeProblem:
    """A ridge instance: n x d data, n targets, and a positive regularizer."""

    A: np.ndarray
    y: np.ndarray
    gamma: float

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if A.ndim != 2:
            raise ValueError(f"data must be a 2-d array, got shape {A.shape}")
        if y.shape != (A.shape[0],):
            raise ValueError(
                f"targets must have shape ({A.shape[0]},), got {y.shape}")
        if not self.gamma > 0:
            raise ValueError(f"regularizer must be positive, got {self.gamma}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "y", y)

    @property
    def shape(self) -> tuple[int, int]:
        return self.A.shape


class InverseOperator:
    """Fast application of (M^T M + g I)^{-1} for a short-and-fat sketch M.

    One economy SVD of M at construction gives orthonormal right singular
    vectors and the squared spectrum; each apply is then

        v / g + V diag(1 / (spectrum + g) - 1 / g) V^T v,

    which costs O(m d) per vector instead of a dense d x d solve.
    Instances are immutable after construction and thread-safe to apply.
    """

    def __init__(self, matrix: np.ndarray, gamma_total: float):
        matrix = np.asarray(matrix, dtype=float)
        if matrix.ndim != 2:
            raise ValueError(f"expected a 2-d sketch, got shape {matrix.shape}")
        if not gamma_total > 0:
            raise ValueError(
                f"total regularizer must be positive, got {gamma_total}")
        _, s, vt = np.linalg.svd(matrix, full_matrices=False)
        self.basis = vt.T
        self.spectrum = s ** 2
        self.gamma_total = float(gamma_total)
        self.dim = matrix.shape[1]

    @classmethod
    def from_sketch(cls, output: SketchOutput, gamma: float) -> "InverseOperator":
        """Operator for a finalized sketch; the shift adds to gamma."""
        return cls(output.matrix, gamma + output.shift)

    def apply(self, v: np.ndarray) -> np.ndarray:
        """Apply to a vector or to each column of a matrix."""
        v = np.asarray(v, dtype=float)
        if v.shape[0] != self.dim:
            raise ValueError(
                f"operator acts on dimension {self.dim}, got {v.shape[0]}")
        g = self.gamma_total
        coeff = 1.0 / (self.spectrum + g) - 1.0 / g
        proj = self.basis.T @ v
        if v.ndim == 1:
            return v / g + self.basis @ (coeff * proj)
        return v / g + self.basis @ (coeff[:, None] * proj)


@dataclass
class IterativeTrace:
    """History of an iterative solve.

    ``iterates[i]`` is the i-th iterate starting from the zero vector;
    ``residual_norms[i]`` is its distance to a supplied reference solution
    (``None`` when no reference was given).
    """

    iterates: list
    residual_norms: Optional[list] = None


def solve_exact(problem: RidgeProblem) -> np.ndarray:
    """Dense oracle: factor the d x d regularized Gram matrix directly."""
    A, y, gamma = problem.A, problem.y, problem.gamma
    d = A.shape[1]
    H = A.T @ A + gamma * np.eye(d)
    return np.linalg.solve(H, A.T @ y)


def sketch_with_targets(A: np.ndarray, y: np.ndarray, m: int
                        ) -> tuple[StreamingSketch, np.ndarray]:
    """Single pass over the rows building the sketch and A^T y together."""
    A = np.asarray(A, dtype=float)
    y = np.asarray(y, dtype=float)
    n, d = A.shape
    sk = StreamingSketch(m, d)
    cross = np.zeros(d)
    pos = 0
    while pos < n:
        take = min(2 * sk.m - sk.fill, n - pos)
        block = A[pos:pos + take]
        cross += block.T @ y[pos:pos + take]
        sk.extend(block)
        pos += take
    return sk, cross


def fdrr_solve(problem: RidgeProblem, m: int, mode: str = MODE_FD) -> np.ndarray:
    """Sketched ridge estimate (B^T B + (gamma + shift) I)^{-1} A^T y.

    One streaming pass builds the sketch and the cross product together;
    the solve itself costs O(m d) after one SVD of the sketch.
    """
    sk, cross = sketch_with_targets(problem.A, problem.y, m)
    out = sk.finalize(mode)
    op = InverseOperator.from_sketch(out, problem.gamma)
    return op.apply(cross)


def classical_sketch_solve(sketched_A: np.ndarray, sketched_y: np.ndarray,
                           gamma: float) -> np.ndarray:
    """Sketch-and-solve with both sides compressed:
    (A^T S^T S A + gamma I)^{-1} A^T S^T S y."""
    sketched_A = np.asarray(sketched_A, dtype=float)
    sketched_y = np.asarray(sketched_y, dtype=float)
    if not gamma > 0:
        raise ValueError(f"regularizer must be positive, got {gamma}")
    d = sketched_A.shape[1]
    H = sketched_A.T @ sketched_A + gamma * np.eye(d)
    return np.linalg.solve(H, sketched_A.T @ sketched_y)


def hessian_sketch_solve(sketched_A: np.ndarray, cross: np.ndarray,
                         gamma: float) -> np.ndarray:
    """Partial sketching: curvature from S A, full-data right-hand side
    (A^T S^T S A + gamma I)^{-1} A^T y."""
    sketched_A = np.asarray(sketched_A, dtype=float)
    cross = np.asarray(cross, dtype=float)
    if not gamma > 0:
        raise ValueError(f"regularizer must be positive, got {gamma}")
    d = sketched_A.shape[1]
    H = sketched_A.T @ sketched_A + gamma * np.eye(d)
    return np.linalg.solve(H, cross)


def _newton_iterate(problem: RidgeProblem,
                    apply_inverse: Callable[[np.ndarray, int], np.ndarray],
                    t: int,
                    x_star: Optional[np.ndarray] = None
                    ) -> tuple[np.ndarray, IterativeTrace]:
    """Shared loop: x <- x - apply_inverse(gradient, iteration).

    The ridge gradient A^T (A x - y) + gamma x is evaluated as two
    streaming matrix-vector products; the d x d Gram matrix is never
    formed.  Raises :class:`DivergenceError` when the iterate norm passes
    the guard; the partial trace rides along on the exception.
    """
    A, y, gamma = problem.A, problem.y, problem.gamma
    if t < 1:
        raise ValueError(f"iteration count must be at least 1, got {t}")
    d = A.shape[1]
    x = np.zeros(d)
    track = x_star is not None
    trace = IterativeTrace(iterates=[x.copy()],
                           residual_norms=[float(np.linalg.norm(x - x_star))]
                           if track else None)
    guard = DIVERGENCE_FACTOR * np.linalg.norm(A.T @ y) / gamma
    for i in range(t):
        grad = A.T @ (A @ x - y) + gamma * x
        x = x - apply_inverse(grad, i)
        if not np.isfinite(x).all() or np.linalg.norm(x) > guard:
            raise DivergenceError(iteration=i + 1, trace=trace)
        trace.iterates.append(x.copy())
        if track:
            trace.residual_norms.append(float(np.linalg.norm(x - x_star)))
    return x, trace


def ifdrr_solve(problem: RidgeProblem, m: int, t: int, mode: str = MODE_FD,
                x_star: Optional[np.ndarray] = None
                ) -> tuple[np.ndarray, IterativeTrace]:
    """Iterative refinement with a fixed Frequent Directions preconditioner.

    The sketch is built once (same pass also accumulates A^T y) and its
    inverse operator is reused every iteration, so the first iterate
    coincides with :func:`fdrr_solve` and later iterates sharpen it at
    O(nd) per step.
    """
    sk, _ = sketch_with_targets(problem.A, problem.y, m)
    out = sk.finalize(mode)
    op = InverseOperator.from_sketch(out, problem.gamma)
    return _newton_iterate(problem, lambda g, _i: op.apply(g), t, x_star)


def iterative_randomized_solve(problem: RidgeProblem,
                               sketch_factory: Callable[[int], np.ndarray],
                               t: int,
                               refresh: bool,
                               x_star: Optional[np.ndarray] = None
                               ) -> tuple[np.ndarray, IterativeTrace]:
    """Newton-type iterations with randomized curvature estimates.

    ``sketch_factory(i)`` must return the compressed data S A for
    iteration i.  With ``refresh=True`` a fresh sketch is drawn every
    iteration (iterative Hessian sketching); with ``refresh=False`` the
    factory is called once and the same factorization is reused, which
    with S = I reproduces the exact solution after one step.
    """
    gamma = problem.gamma
    d = problem.A.shape[1]
    if refresh:
        def apply_inverse(g: np.ndarray, i: int) -> np.ndarray:
            SA = np.asarray(sketch_factory(i), dtype=float)
            H = SA.T @ SA + gamma * np.eye(d)
            return np.linalg.solve(H, g)
    else:
        SA = np.asarray(sketch_factory(0), dtype=float)
        H = SA.T @ SA + gamma * np.eye(d)
        factor = scipy.linalg.cho_factor(H)

        def apply_inverse(g: np.ndarray, _i: int) -> np.ndarray:
            return scipy.linalg.cho_solve(factor, g)

    return _newton_iterate(problem, apply_inverse, t, x_star)
