"""Streaming Frequent Directions sketches.

A sketch consumes rows of an n x d matrix one at a time and maintains a
small buffer whose Gram matrix tracks the Gram matrix of everything seen
so far.  The classic Frequent Directions (FD) guarantee is

    0 <= A^T A - B^T B <= (|A - A_k|_F^2 / (m - k)) * I   for every k < m,

in the ordering of symmetric matrices.  The robust variant (RFD) keeps a
running scalar ``shift`` equal to half the total spectral mass removed by
shrink steps; reporting ``B^T B + shift * I`` halves the error constant.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

MODE_FD = "fd"
MODE_RFD = "rfd"
MODES = (MODE_FD, MODE_RFD)

# Singular values below this fraction of the largest one are treated as
# exact zeros during a shrink, so roundoff noise never survives the
# subtract-and-sqrt step.
SV_CUTOFF = 1e-12


def _svd_rows(block: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Economy SVD returning (singular values, right factor Vt)."""
    try:
        _, s, vt = np.linalg.svd(block, full_matrices=False)
    except np.linalg.LinAlgError:
        # gesdd occasionally fails to converge; gesvd is slower but solid.
        _, s, vt = scipy.linalg.svd(block, full_matrices=False,
                                    lapack_driver="gesvd")
    return s, vt


@dataclass(frozen=True, eq=False)
class SketchOutput:
    """Finalized sketch: an m x d matrix with pairwise orthogonal rows.

    ``shift`` is the accumulated robustness constant (zero in "fd" mode).
    Downstream solvers regularize with ``gamma + shift``.  Treat instances
    as immutable; they can be shared freely across threads.
    """

    matrix: np.ndarray
    shift: float
    mode: str

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def covariance(self) -> np.ndarray:
        """Dense d x d approximation B^T B + shift * I."""
        d = self.dim
        return self.matrix.T @ self.matrix + self.shift * np.eye(d)


class StreamingSketch:
    """Frequent Directions sketch over a row stream.

    Maintains a ``2m x d`` buffer.  Rows are copied into free slots; when
    the buffer fills, it is re-expressed through an SVD, every squared
    singular value is reduced by the m-th largest, and at least m + 1
    slots become free again.  Half of each reduction accumulates into
    ``shift_total``.

    The per-row update cost is amortized O(m d); each shrink costs one
    SVD of the buffer.  Instances are single-writer: concurrent ``update``
    calls must be serialized by the caller.  ``finalize`` does not mutate
    state, so a finalized snapshot can be taken mid-stream and updates may
    continue afterwards.
    """

    def __init__(self, m: int, d: int):
        if m < 1:
            raise ValueError(f"sketch size must be a positive integer, got m={m}")
        if d < 1:
            raise ValueError(f"row dimension must be a positive integer, got d={d}")
        self.m = int(m)
        self.d = int(d)
        self.buffer = np.zeros((2 * self.m, self.d))
        self.fill = 0
        self.shift_total = 0.0

    def update(self, row: np.ndarray) -> None:
        """Insert one row, shrinking if the buffer becomes full."""
        row = np.asarray(row, dtype=float)
        if row.shape != (self.d,):
            raise ValueError(
                f"expected a row of shape ({self.d},), got {row.shape}")
        self.buffer[self.fill] = row
        self.fill += 1
        if self.fill == 2 * self.m:
            self._shrink()

    def extend(self, rows: np.ndarray) -> None:
        """Insert many rows; equivalent to calling update on each in order.

        Rows are copied into the free slots in blocks, so the sequence of
        buffer states at shrink time is identical to the one produced by
        row-at-a-time updates.
        """
        rows = np.asarray(rows, dtype=float)
        if rows.ndim != 2 or rows.shape[1] != self.d:
            raise ValueError(
                f"expected rows of shape (k, {self.d}), got {rows.shape}")
        pos = 0
        total = rows.shape[0]
        while pos < total:
            free = 2 * self.m - self.fill
            take = min(free, total - pos)
            self.buffer[self.fill:self.fill + take] = rows[pos:pos + take]
            self.fill += take
            pos += take
            if self.fill == 2 * self.m:
                self._shrink()

    def _shrink(self) -> None:
        s, vt = _svd_rows(self.buffer[:self.fill])
        if s.size == 0 or s[0] == 0.0:
            self.buffer[:] = 0.0
            self.fill = 0
            return
        reduction = float(s[self.m - 1] ** 2) if s.size >= self.m else 0.0
        squared = s ** 2 - reduction
        squared[s <= SV_CUTOFF * s[0]] = 0.0
        np.maximum(squared, 0.0, out=squared)
        kept = squared > 0.0
        survivors = np.sqrt(squared[kept])[:, None] * vt[kept]
        self.buffer[:] = 0.0
        self.buffer[:survivors.shape[0]] = survivors
        self.fill = survivors.shape[0]
        self.shift_total += reduction / 2.0

    def finalize(self, mode: str = MODE_FD) -> SketchOutput:
        """Produce an m x d snapshot without disturbing the stream.

        The occupied part of the buffer is re-expressed through an SVD so
        the output rows are orthogonal.  If more than m directions carry
        mass, one extra shrink brings the count down to at most m - 1;
        otherwise the re-expression is exact.  In "fd" mode the reported
        shift is zero, in "rfd" mode it is the accumulated total.
        """
        if mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
        out = np.zeros((self.m, self.d))
        shift_total = self.shift_total
        if self.fill:
            s, vt = _svd_rows(self.buffer[:self.fill])
            if s.size and s[0] > 0.0:
                squared = s ** 2
                squared[s <= SV_CUTOFF * s[0]] = 0.0
                rank = int(np.count_nonzero(squared))
                if rank > self.m:
                    reduction = float(s[self.m - 1] ** 2)
                    squared -= reduction
                    np.maximum(squared, 0.0, out=squared)
                    shift_total += reduction / 2.0
                kept = np.flatnonzero(squared > 0.0)[:self.m]
                out[:kept.size] = np.sqrt(squared[kept])[:, None] * vt[kept]
        shift = shift_total if mode == MODE_RFD else 0.0
        return SketchOutput(matrix=out, shift=shift, mode=mode)


def sketch_matrix(A: np.ndarray, m: int, mode: str = MODE_FD) -> SketchOutput:
    """One-shot convenience: stream every row of A and finalize."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2:
        raise ValueError(f"expected a 2-d array, got shape {A.shape}")
    sk = StreamingSketch(m, A.shape[1])
    sk.extend(A)
    return sk.finalize(mode)


@dataclass(frozen=True)
class TailMass:
    """Squared Frobenius mass of A beyond its best rank-k approximation."""

    k: int
    mass: float
    alpha: float  # 1 / (m - k) for the sketch size the caller supplied


def tail_masses(A: np.ndarray) -> np.ndarray:
    """All tail masses at once: entry k is |A - A_k|_F^2, k = 0..min(n, d)."""
    s = np.linalg.svd(np.asarray(A, dtype=float), compute_uv=False)
    tails = np.concatenate([np.cumsum((s ** 2)[::-1])[::-1], [0.0]])
    return tails


def tail_mass(A: np.ndarray, k: int, m: int) -> TailMass:
    """Tail mass at rank k together with the error constant 1 / (m - k).

    Computed from a dense SVD, so this is an oracle for small matrices and
    a preprocessing step for experiment instances, not a streaming
    primitive.
    """
    A = np.asarray(A, dtype=float)
    limit = min(A.shape)
    if not 0 <= k <= limit:
        raise ValueError(f"rank k must lie in [0, {limit}], got {k}")
    if not k < m:
        raise ValueError(f"error constant needs k < m, got k={k}, m={m}")
    tails = tail_masses(A)
    return TailMass(k=int(k), mass=float(tails[k]), alpha=1.0 / (m - k))


def save_sketch_csv(output: SketchOutput, path) -> None:
    """Write a finalized sketch as CSV.

    The first line is a comment header ``# m,d,shift,mode``; the remaining
    m lines hold d comma-separated decimals at 17 significant digits,
    enough for an exact float64 round trip.
    """
    mat = output.matrix
    m, d = mat.shape
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# {m},{d},{output.shift:.17g},{output.mode}\n")
        for row in mat:
            fh.write(",".join(format(v, ".17g") for v in row) + "\n")


def load_sketch_csv(path) -> SketchOutput:
    """Inverse of :func:`save_sketch_csv`."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if not header.startswith("#"):
            raise ValueError(f"{path}: missing '# m,d,shift,mode' header line")
        fields = header.lstrip("#").strip().split(",")
        if len(fields) != 4:
            raise ValueError(f"{path}: malformed header {header!r}")
        m, d = int(fields[0]), int(fields[1])
        shift, mode = float(fields[2]), fields[3].strip()
        if mode not in MODES:
            raise ValueError(f"{path}: unknown sketch mode {mode!r}")
        mat = np.loadtxt(fh, delimiter=",", ndmin=2)
    if mat.shape != (m, d):
        raise ValueError(
            f"{path}: header promises shape ({m}, {d}), file holds {mat.shape}")
    return SketchOutput(matrix=mat, shift=shift, mode=mode)
