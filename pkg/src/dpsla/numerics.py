"""Dense vector/matrix helpers and the seeded random stream used by every module.

All systems in this project are tiny (dimension <= 32), so everything here is
plain dense float64 arithmetic with eager validation at the API boundary.
"""

from __future__ import annotations

import numpy as np

# Cholesky pivots below this are treated as a singular / non-SPD input.
SPD_PIVOT_TOL = 1e-12


class SingularMatrixError(ValueError):
    """Raised when a direct factorization meets a pivot that is not safely positive."""


def as_vec(x, dim: int | None = None) -> np.ndarray:
    """Validate and convert `x` to a finite 1-D float64 array."""
    v = np.asarray(x, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise ValueError(f"expected a nonempty 1-D vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError("vector entries must be finite")
    if dim is not None and v.size != dim:
        raise ValueError(f"dimension mismatch: expected {dim}, got {v.size}")
    return v


def as_mat(x, rows: int | None = None, cols: int | None = None) -> np.ndarray:
    """Validate and convert `x` to a finite 2-D float64 array."""
    m = np.asarray(x, dtype=float)
    if m.ndim != 2 or m.shape[0] == 0 or m.shape[1] == 0:
        raise ValueError(f"expected a nonempty 2-D matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix entries must be finite")
    if rows is not None and m.shape[0] != rows:
        raise ValueError(f"row mismatch: expected {rows}, got {m.shape[0]}")
    if cols is not None and m.shape[1] != cols:
        raise ValueError(f"column mismatch: expected {cols}, got {m.shape[1]}")
    return m


def dot(a, b) -> float:
    """Inner product of two equal-length vectors."""
    va = as_vec(a)
    vb = as_vec(b, dim=va.size)
    return float(va @ vb)


def matvec(A, x) -> np.ndarray:
    """Matrix-vector product A @ x."""
    M = as_mat(A)
    v = as_vec(x, dim=M.shape[1])
    return M @ v


def _cholesky(A: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor with explicit pivot checks (dims here are <= 32)."""
    n = A.shape[0]
    L = np.zeros_like(A)
    for j in range(n):
        d = A[j, j] - L[j, :j] @ L[j, :j]
        if d < SPD_PIVOT_TOL:
            raise SingularMatrixError(f"pivot {d:.3e} at column {j} below {SPD_PIVOT_TOL:g}")
        L[j, j] = np.sqrt(d)
        if j + 1 < n:
            L[j + 1:, j] = (A[j + 1:, j] - L[j + 1:, :j] @ L[j, :j]) / L[j, j]
    return L


def solve_spd(A, b) -> np.ndarray:
    """Solve A x = b for symmetric positive definite A by Cholesky factorization."""
    M = as_mat(A)
    if M.shape[0] != M.shape[1]:
        raise ValueError(f"matrix must be square, got shape {M.shape}")
    if not np.allclose(M, M.T, rtol=0.0, atol=1e-12 * (1.0 + np.abs(M).max())):
        raise ValueError("matrix must be symmetric")
    v = as_vec(b, dim=M.shape[0])
    L = _cholesky(M)
    # forward then backward substitution
    n = v.size
    y = np.zeros(n)
    for i in range(n):
        y[i] = (v[i] - L[i, :i] @ y[:i]) / L[i, i]
    x = np.zeros(n)
    for i in range(n - 1, -1, -1):
        x[i] = (y[i] - L[i + 1:, i] @ x[i + 1:]) / L[i, i]
    return x


class Rng:
    """Deterministic pseudo-random stream.

    Backed by numpy's PCG64 generator: the same 64-bit seed always reproduces
    the same sequence of draws within this package. One instance is owned by a
    single run thread and must never be shared across threads.
    """

    ALGORITHM = "numpy PCG64 (numpy.random.default_rng)"

    def __init__(self, seed: int):
        if not (0 <= int(seed) < 2 ** 64):
            raise ValueError("seed must be a 64-bit unsigned integer")
        self.seed = int(seed)
        self._gen = np.random.default_rng(self.seed)

    def uniform(self, lo: float, hi: float) -> float:
        """One draw from U[lo, hi); advances the stream."""
        if not (lo < hi):
            raise ValueError(f"need lo < hi, got lo={lo}, hi={hi}")
        return float(self._gen.uniform(lo, hi))

    def uniform_array(self, shape, lo: float, hi: float) -> np.ndarray:
        """Block of U[lo, hi) draws from the same stream."""
        if not (lo < hi):
            raise ValueError(f"need lo < hi, got lo={lo}, hi={hi}")
        return self._gen.uniform(lo, hi, size=shape)

    def integer(self, lo: int, hi: int) -> int:
        """One integer draw from [lo, hi); advances the stream."""
        if not (lo < hi):
            raise ValueError(f"need lo < hi, got lo={lo}, hi={hi}")
        return int(self._gen.integers(lo, hi))
