"""Oblivious random sketches: dense Gaussian and sparse SJLT.

Both sketches are described by a small frozen spec (dimensions plus an
integer seed) and realized deterministically from a PCG64 generator, so
applying the same spec twice gives bitwise-identical results.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse


@dataclass(frozen=True)
class GaussianSketchSpec:
    """Dense m x n sketch with i.i.d. N(0, 1/m) entries."""

    m: int
    n: int
    seed: int

    def __post_init__(self):
        if self.m < 1 or self.n < 1:
            raise ValueError(
                f"sketch dimensions must be positive, got m={self.m}, n={self.n}")


@dataclass(frozen=True)
class SjltSketchSpec:
    """Sparse JL transform: s stacked CountSketch blocks of m/s rows each.

    Every input coordinate receives exactly one nonzero per block, a sign
    scaled by 1/sqrt(s), for s nonzeros per column of S overall.
    """

    m: int
    n: int
    s: int
    seed: int

    def __post_init__(self):
        if self.m < 1 or self.n < 1:
            raise ValueError(
                f"sketch dimensions must be positive, got m={self.m}, n={self.n}")
        if self.s < 1 or self.m % self.s != 0:
            raise ValueError(
                f"block count s must be positive and divide m, got s={self.s}, m={self.m}")


def realize_gaussian(spec: GaussianSketchSpec) -> np.ndarray:
    """Materialize the m x n Gaussian sketch matrix for the given seed."""
    rng = np.random.default_rng(spec.seed)
    return rng.standard_normal((spec.m, spec.n)) / np.sqrt(spec.m)


def realize_sjlt(spec: SjltSketchSpec) -> scipy.sparse.csr_matrix:
    """Materialize the SJLT as a CSR matrix with s * n nonzeros.

    Stream discipline: a single generator seeded with ``spec.seed`` draws,
    for block b = 0, 1, ..., s-1 in order, first the n row offsets inside
    the block and then the n signs.
    """
    rng = np.random.default_rng(spec.seed)
    rows_per_block = spec.m // spec.s
    scale = 1.0 / np.sqrt(spec.s)
    cols = np.tile(np.arange(spec.n), spec.s)
    rows = np.empty(spec.s * spec.n, dtype=np.int64)
    vals = np.empty(spec.s * spec.n)
    for b in range(spec.s):
        lo = b * spec.n
        offsets = rng.integers(0, rows_per_block, size=spec.n)
        signs = rng.integers(0, 2, size=spec.n) * 2 - 1
        rows[lo:lo + spec.n] = b * rows_per_block + offsets
        vals[lo:lo + spec.n] = scale * signs
    return scipy.sparse.csr_matrix(
        (vals, (rows, cols)), shape=(spec.m, spec.n))


def _apply(S, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.shape[0] != S.shape[1]:
        raise ValueError(
            f"sketch expects {S.shape[1]} input rows, got {X.shape[0]}")
    out = S @ X
    return np.asarray(out)


def apply_gaussian(spec: GaussianSketchSpec, X: np.ndarray) -> np.ndarray:
    """Compute S X for the realized Gaussian sketch; X may be 1-d or 2-d."""
    return _apply(realize_gaussian(spec), X)


def apply_sjlt(spec: SjltSketchSpec, X: np.ndarray) -> np.ndarray:
    """Compute S X for the realized SJLT.

    The sparse product touches each row of X once per block, i.e. it is a
    streaming signed accumulation, never a dense m x n matrix.
    """
    return _apply(realize_sjlt(spec), X)
