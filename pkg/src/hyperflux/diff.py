"""Central finite differences for Jacobians, determinants, divergence, gradient.

Every function takes a batch of points ``X`` of shape ``(n, k)`` (or a single
point of shape ``(k,)``) and a callable mapping ``(n, k) -> (n, d)`` (maps) or
``(n, k) -> (n,)`` (scalar fields). ``FieldExpr``/``MapExpr`` satisfy this.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .linalg import det

__all__ = [
    "DiffConfig",
    "DifferentiationError",
    "jacobian",
    "jacobian_det",
    "divergence",
    "gradient",
    "DEFAULT_REL_STEP",
]

DEFAULT_REL_STEP = float(np.cbrt(np.finfo(float).eps))


class DifferentiationError(ArithmeticError):
    def __init__(self, message, axis=None):
        self.axis = axis
        super().__init__(message)


@dataclass(frozen=True)
class DiffConfig:
    """Step policy: ``h_i = rel_step * max(1, |x_i|)``, second-order stencils.

    ``lo``/``hi`` optionally bound the region where the function may be
    sampled; points closer than ``h`` to a bound switch to one-sided
    second-order stencils on that axis.
    """

    rel_step: float = DEFAULT_REL_STEP
    lo: Optional[tuple] = None
    hi: Optional[tuple] = None

    def __post_init__(self):
        if not self.rel_step > 0:
            raise ValueError("rel_step must be positive")

    def steps(self, X):
        h = self.rel_step * np.maximum(1.0, np.abs(X))
        # snap so that x + h is exactly representable
        return (X + h) - X

    def with_bounds(self, lo, hi):
        return DiffConfig(self.rel_step, tuple(map(float, lo)), tuple(map(float, hi)))


def _as_batch(X):
    X = np.asarray(X, dtype=float)
    single = X.ndim == 1
    return np.atleast_2d(X), single


def _jac_batch(fn, X, cfg):
    n, k = X.shape
    H = cfg.steps(X)
    fwd = np.zeros((n, k), dtype=bool)
    bwd = np.zeros((n, k), dtype=bool)
    if cfg.lo is not None:
        fwd = X - H < np.asarray(cfg.lo)
    if cfg.hi is not None:
        bwd = (X + H > np.asarray(cfg.hi)) & ~fwd

    cols = []
    for j in range(k):
        f, b = fwd[:, j], bwd[:, j]
        c = ~(f | b)
        # rows that need the sample at x + o*h*e_j
        rows = {1.0: c | f, -1.0: c | b, 0.0: f | b, 2.0: f, -2.0: b}
        rows = {o: np.flatnonzero(r) for o, r in rows.items() if r.any()}
        pts = []
        for o, idx in rows.items():
            P = X[idx].copy()
            P[:, j] += o * H[idx, j]
            pts.append(P)
        vals = np.asarray(fn(np.concatenate(pts)), dtype=float)
        if not np.all(np.isfinite(vals)):
            raise DifferentiationError(
                f"non-finite function value while differentiating along axis {j + 1}", axis=j + 1
            )
        F = {}
        start = 0
        for o, idx in rows.items():
            full = np.full((n,) + vals.shape[1:], np.nan)
            full[idx] = vals[start : start + len(idx)]
            start += len(idx)
            F[o] = full
        h = H[:, j].reshape((n,) + (1,) * (vals.ndim - 1))
        d = np.empty((n,) + vals.shape[1:])
        if c.any():
            d[c] = ((F[1.0] - F[-1.0]) / (2 * h))[c]
        if f.any():
            d[f] = ((-3 * F[0.0] + 4 * F[1.0] - F[2.0]) / (2 * h))[f]
        if b.any():
            d[b] = ((3 * F[0.0] - 4 * F[-1.0] + F[-2.0]) / (2 * h))[b]
        cols.append(d)
    return np.stack(cols, axis=-1)


def jacobian(fn, X, cfg: DiffConfig = DiffConfig()):
    """Matrix of partials ``d fn_i / d x_j``: shape ``(n, d, k)``, or ``(d, k)``
    for a single point."""
    Xb, single = _as_batch(X)
    if not np.all(np.isfinite(Xb)):
        raise DifferentiationError("non-finite evaluation point")
    J = _jac_batch(fn, Xb, cfg)
    if J.ndim == 2:
        raise ValueError("jacobian needs a vector-valued map; use gradient for scalar fields")
    return J[0] if single else J


def gradient(fn, X, cfg: DiffConfig = DiffConfig()):
    Xb, single = _as_batch(X)
    G = _jac_batch(fn, Xb, cfg)
    if G.ndim != 2:
        raise ValueError("gradient needs a scalar field")
    return G[0] if single else G


def jacobian_det(fn, X, cfg: DiffConfig = DiffConfig()):
    J = jacobian(fn, X, cfg)
    if J.shape[-1] != J.shape[-2]:
        raise ValueError(f"jacobian_det needs a square Jacobian, got {J.shape[-2:]}")
    return det(J)


def divergence(fn, X, cfg: DiffConfig = DiffConfig()):
    J = jacobian(fn, X, cfg)
    if J.shape[-1] != J.shape[-2]:
        raise ValueError("divergence needs a field R^m -> R^m")
    return np.trace(J, axis1=-2, axis2=-1)
