"""Minimum-norm least squares via rank-truncated SVD.

Every collocation solve in the package funnels through ``lstsq``. The
adaptive dictionaries routinely produce near-rank-deficient systems, so
singular values below ``rcond * s_max`` are discarded and the
minimum-Euclidean-norm minimizer is returned, together with rank and
spectrum diagnostics.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_RCOND = 1e-12


@dataclass(frozen=True)
class LsqResult:
    solution: np.ndarray
    residual_norm: float
    effective_rank: int
    max_singular_value: float
    min_kept_singular_value: float


def as_matrix(a) -> np.ndarray:
    """Validate and return a dense 2-d float64 array (finite entries only)."""
    m = np.ascontiguousarray(a, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError(f"expected a 2-d matrix, got ndim={m.ndim}")
    if not np.isfinite(m).all():
        raise ValueError("matrix contains non-finite entries")
    return m


def as_vector(v, length: int | None = None) -> np.ndarray:
    w = np.ascontiguousarray(v, dtype=np.float64)
    if w.ndim != 1:
        raise ValueError(f"expected a 1-d vector, got ndim={w.ndim}")
    if length is not None and w.shape[0] != length:
        raise ValueError(f"dimension mismatch: expected length {length}, got {w.shape[0]}")
    if not np.isfinite(w).all():
        raise ValueError("vector contains non-finite entries")
    return w


def lstsq(a, b, rcond: float = DEFAULT_RCOND) -> LsqResult:
    """Solve min ||A x - b||_2, returning the minimum-norm x.

    Singular values below ``rcond * max_singular_value`` are treated as
    zero. An all-zero A is not an error: the solution is the zero vector
    with effective rank 0.
    """
    a = as_matrix(a)
    b = as_vector(b, length=a.shape[0])
    if not 0.0 < rcond < 1.0:
        raise ValueError(f"rcond must lie in (0, 1), got {rcond}")

    x, _, rank, sv = np.linalg.lstsq(a, b, rcond=rcond)
    rank = int(rank)
    smax = float(sv[0]) if sv.size else 0.0
    if smax == 0.0:
        x = np.zeros(a.shape[1])
        rank = 0
    smin_kept = float(sv[rank - 1]) if rank > 0 else 0.0
    residual = float(np.linalg.norm(a @ x - b))
    return LsqResult(
        solution=x,
        residual_norm=residual,
        effective_rank=rank,
        max_singular_value=smax,
        min_kept_singular_value=smin_kept,
    )
