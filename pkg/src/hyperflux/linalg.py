"""Small dense determinants, row-deleted minors and the cofactor machinery.

All float routines broadcast over leading batch axes, so ``det`` of an
array of shape ``(n, m, m)`` returns ``n`` determinants. Integer (or object)
input is handled exactly with fraction-free elimination.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "MAX_SIZE",
    "det",
    "minor_det",
    "normal_from_minors",
    "rank_tolerance",
    "cofactor_field",
    "cauchy_binet",
]

MAX_SIZE = 12


def _is_exact(M):
    return M.dtype.kind in "iuO"


def _det_bareiss(M):
    """Exact determinant of one integer matrix (Python ints throughout)."""
    n = len(M)
    A = [[int(v) for v in row] for row in M]
    sign, prev = 1, 1
    for k in range(n - 1):
        if A[k][k] == 0:
            for r in range(k + 1, n):
                if A[r][k] != 0:
                    A[k], A[r] = A[r], A[k]
                    sign = -sign
                    break
            else:
                return 0
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                A[i][j] = (A[i][j] * A[k][k] - A[i][k] * A[k][j]) // prev
        prev = A[k][k]
    return sign * A[n - 1][n - 1]


def _det_lu(A):
    # Gaussian elimination with partial pivoting over a batch (b, n, n)
    A = A.copy()
    b, n, _ = A.shape
    out = np.ones(b)
    rows = np.arange(b)
    for k in range(n):
        p = k + np.argmax(np.abs(A[:, k:, k]), axis=1)
        swap = p != k
        out[swap] = -out[swap]
        rk = A[rows, k].copy()
        A[rows, k] = A[rows, p]
        A[rows, p] = rk
        piv = A[:, k, k]
        out *= piv
        nz = piv != 0
        if k + 1 < n:
            factors = np.zeros((b, n - k - 1))
            factors[nz] = A[nz, k + 1 :, k] / piv[nz, None]
            A[:, k + 1 :, k:] -= factors[:, :, None] * A[:, None, k, k:]
    return out


def det(M):
    """Determinant of a square matrix or a stack of them.

    Closed forms for n <= 3, LU with partial pivoting above. Integer input is
    computed exactly and returned as a Python int (or object array).
    """
    M = np.asarray(M)
    if M.ndim < 2 or M.shape[-1] != M.shape[-2]:
        raise ValueError(f"det needs square matrices, got shape {M.shape}")
    n = M.shape[-1]
    if n > MAX_SIZE:
        raise ValueError(f"matrix size {n} exceeds cap {MAX_SIZE}")
    batch = M.shape[:-2]
    if _is_exact(M):
        flat = M.reshape((-1, n, n))
        vals = [_det_bareiss(A) if n else 1 for A in flat]
        if not batch:
            return vals[0]
        return np.array(vals, dtype=object).reshape(batch)
    M = M.astype(float, copy=False)
    if n == 0:
        return np.ones(batch) if batch else 1.0
    if n == 1:
        out = M[..., 0, 0]
    elif n == 2:
        out = M[..., 0, 0] * M[..., 1, 1] - M[..., 0, 1] * M[..., 1, 0]
    elif n == 3:
        out = (
            M[..., 0, 0] * (M[..., 1, 1] * M[..., 2, 2] - M[..., 1, 2] * M[..., 2, 1])
            - M[..., 0, 1] * (M[..., 1, 0] * M[..., 2, 2] - M[..., 1, 2] * M[..., 2, 0])
            + M[..., 0, 2] * (M[..., 1, 0] * M[..., 2, 1] - M[..., 1, 1] * M[..., 2, 0])
        )
    else:
        out = _det_lu(M.reshape((-1, n, n))).reshape(batch)
    return float(out) if not batch else np.asarray(out)


def _check_tall(M):
    M = np.asarray(M)
    if M.ndim < 2 or M.shape[-1] != M.shape[-2] - 1 or M.shape[-1] < 1:
        raise ValueError(f"expected an m x (m-1) matrix with m >= 2, got shape {M.shape}")
    return M


def minor_det(M, drop_row: int):
    """Determinant of ``M`` (m x (m-1)) with row ``drop_row`` (1-based) deleted."""
    M = _check_tall(M)
    m = M.shape[-2]
    if not 1 <= drop_row <= m:
        raise ValueError(f"drop_row must be in 1..{m}, got {drop_row}")
    return det(np.delete(M, drop_row - 1, axis=-2))


def normal_from_minors(M):
    """Signed maximal minors of an m x (m-1) matrix.

    Component i is ``(-1)^(i+1)`` times the minor with row i removed, which
    makes the result orthogonal to every column of ``M``; it vanishes exactly
    when the columns are dependent.
    """
    M = _check_tall(M)
    m = M.shape[-2]
    comps = [minor_det(M, i) for i in range(1, m + 1)]
    if _is_exact(M):
        signed = [c if i % 2 == 0 else -c for i, c in enumerate(comps)]
        return np.moveaxis(np.array(signed, dtype=object), 0, -1)
    N = np.stack([np.asarray(c, dtype=float) for c in comps], axis=-1)
    return N * np.where(np.arange(m) % 2 == 0, 1.0, -1.0)


def rank_tolerance(M):
    """Threshold below which |N| signals a rank-deficient m x (m-1) matrix."""
    M = np.asarray(M, dtype=float)
    return 1e-10 * np.prod(np.linalg.norm(M, axis=-2), axis=-1)


def cofactor_field(phi, X, cfg=None):
    """Cofactors of the first row of phi'(x): A_i = (-1)^(i+1) * det of the
    Jacobian with row 1 and column i removed.

    Shape ``(m,)`` for one point, ``(n, m)`` for a batch.
    """
    from .diff import DiffConfig, jacobian

    J = jacobian(phi, X, cfg or DiffConfig())
    if J.shape[-1] != J.shape[-2]:
        raise ValueError("cofactor_field needs a map R^m -> R^m")
    return normal_from_minors(np.swapaxes(J[..., 1:, :], -1, -2))


def cauchy_binet(P, Q):
    """det(P @ Q) for P of shape (m-1, m) and Q of shape (m, m-1), computed as
    the sum over i of det(P without column i) * det(Q without row i)."""
    P = np.asarray(P)
    Q = np.asarray(Q)
    if P.ndim != 2 or Q.ndim != 2:
        raise ValueError("cauchy_binet expects two matrices")
    k, m = P.shape
    if Q.shape != (m, k) or k != m - 1:
        raise ValueError(f"shape mismatch: P {P.shape}, Q {Q.shape}; need (m-1, m) and (m, m-1)")
    if m > 10:
        raise ValueError("cauchy_binet is capped at m = 10")
    total = 0
    for i in range(m):
        total = total + det(np.delete(P, i, axis=1)) * det(np.delete(Q, i, axis=0))
    return total
