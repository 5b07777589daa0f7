"""Composite tensor-product Gauss-Legendre quadrature over domains and
hypersurfaces, mollifier smoothing, and a seeded Monte Carlo oracle.

Integrands are vectorized callables ``(n, m) -> (n,)`` (``FieldExpr`` works
directly). Node sets are processed in fixed-size chunks and the per-chunk
partial sums are added in chunk order, so results do not depend on how
many worker threads evaluate the chunks.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate as _sp_integrate

from .diff import DiffConfig
from .geom import Ball, Box, DomainError, Graph, ParamSurface, PiecewiseSurface, surface_normal

__all__ = [
    "QuadScheme",
    "NonFiniteError",
    "gauss_legendre",
    "composite_rule",
    "tensor_rule",
    "integrate_volume",
    "integrate_surface",
    "surface_piece_integrals",
    "flux",
    "piece_fluxes",
    "Mollifier",
    "mollify",
    "mc_estimate",
    "ball_integrals",
    "worker_count",
]

CHUNK = 1 << 15


class NonFiniteError(ArithmeticError):
    pass


@dataclass(frozen=True)
class QuadScheme:
    gauss_order: int = 16
    subdivisions: int = 4
    rel_tol: float = 1e-8
    diff: DiffConfig = field(default_factory=DiffConfig)
    mc_seed: int = 0

    def __post_init__(self):
        if self.gauss_order < 2:
            raise ValueError("gauss_order must be >= 2")
        if self.subdivisions < 1:
            raise ValueError("subdivisions must be >= 1")
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be positive")


def worker_count():
    env = os.environ.get("HYPERFLUX_THREADS")
    if env:
        return max(1, int(env))
    return min(4, os.cpu_count() or 1)


@lru_cache(maxsize=None)
def gauss_legendre(order):
    """Nodes and weights of the ``order``-point rule on [-1, 1]."""
    x, w = np.polynomial.legendre.leggauss(order)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def composite_rule(a, b, order, subdivisions):
    """Composite Gauss rule on [a, b]; ``a``/``b`` may be arrays, giving one
    rule per entry (shape ``(..., order * subdivisions)``)."""
    x, w = gauss_legendre(order)
    a = np.asarray(a, float)[..., None]
    b = np.asarray(b, float)[..., None]
    edges = np.arange(subdivisions) / subdivisions
    t = (edges[:, None] + (x + 1) / (2 * subdivisions)).ravel()
    ws = np.tile(w / (2 * subdivisions), subdivisions)
    return a + (b - a) * t, (b - a) * ws


def tensor_rule(lo, hi, order, subdivisions):
    """Full tensor-product node set (n, k) and weights over the box [lo, hi]."""
    axes = [composite_rule(a, b, order, subdivisions) for a, b in zip(lo, hi)]
    X = np.stack(np.meshgrid(*[n for n, _ in axes], indexing="ij"), axis=-1).reshape(-1, len(axes))
    W = np.ones(1)
    for _, w in axes:
        W = np.multiply.outer(W, w).ravel()
    return X, W


def _tensor_chunks(lo, hi, order, subdivisions):
    axes = [composite_rule(a, b, order, subdivisions) for a, b in zip(lo, hi)]
    shape = tuple(len(n) for n, _ in axes)
    total = int(np.prod(shape))
    for start in range(0, total, CHUNK):
        idx = np.unravel_index(np.arange(start, min(start + CHUNK, total)), shape)
        X = np.stack([axes[d][0][i] for d, i in enumerate(idx)], axis=-1)
        W = np.prod([axes[d][1][i] for d, i in enumerate(idx)], axis=0)
        yield X, W


def _sum_chunks(partial, chunks):
    """Apply ``partial`` to each chunk (possibly in threads) and add the results
    in chunk order."""
    chunks = list(chunks)
    workers = worker_count()
    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(partial, chunks))
    else:
        parts = [partial(c) for c in chunks]
    if not parts:
        return 0.0
    return float(np.sum(np.asarray(parts, dtype=float)))


def _checked(values, what):
    values = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(values)):
        raise NonFiniteError(f"non-finite integrand sample in {what}")
    return values


# -- volume integrals -------------------------------------------------------


def _sphere_dirs(U):
    """Unit vectors for angle tuples (same convention as geom.sphere_chart),
    plus the angular part of the spherical volume element."""
    n, k = U.shape
    m = k + 1
    out = np.empty((n, m))
    prefix = np.ones(n)
    elem = np.ones(n)
    for i in range(k - 1):
        out[:, m - 1 - i] = prefix * np.cos(U[:, i])
        s = np.sin(U[:, i])
        prefix = prefix * s
        elem = elem * s ** (m - 2 - i)
    out[:, 0] = prefix * np.cos(U[:, k - 1])
    out[:, 1] = prefix * np.sin(U[:, k - 1])
    return out, np.abs(elem)


def _ball_box(m, radius):
    lo = (0.0,) + (0.0,) * (m - 1)
    hi = (float(radius),) + (math.pi,) * (m - 2) + (2 * math.pi,)
    return lo, hi


def _ball_points(center, P):
    """Polar box points (r, u1..u(m-1)) -> Cartesian points and volume element."""
    r = P[:, 0]
    dirs, ang = _sphere_dirs(P[:, 1:])
    m = P.shape[1]
    return np.asarray(center) + r[:, None] * dirs, np.abs(r ** (m - 1)) * ang


def _volume_chunks(D, q):
    g, s = q.gauss_order, q.subdivisions
    if isinstance(D, Box):
        yield from _tensor_chunks(D.lo, D.hi, g, s)
    elif isinstance(D, Ball):
        m = D.dim
        if m == 1:
            c = D.center[0]
            yield from _tensor_chunks((c - D.radius,), (c + D.radius,), g, s)
            return
        lo, hi = _ball_box(m, D.radius)
        for P, W in _tensor_chunks(lo, hi, g, s):
            X, jac = _ball_points(D.center, P)
            yield X, W * jac
    elif isinstance(D, Graph):
        per = g * s
        base_chunk = max(1, CHUNK // per)
        base_iter = _tensor_chunks(D.lo, D.hi, g, s)
        for B, WB in base_iter:
            for k in range(0, len(B), base_chunk):
                b, wb = B[k : k + base_chunk], WB[k : k + base_chunk]
                t, wt = composite_rule(D.lower(b), D.upper(b), g, s)
                X = D.lift(np.repeat(b, per, axis=0), t.ravel())
                yield X, (wb[:, None] * wt).ravel()
    else:
        raise DomainError(f"unsupported domain {type(D).__name__}")


def integrate_volume(f, D, q: QuadScheme = QuadScheme()):
    """Integral of f over a Box, Ball or Graph domain.

    Balls go through a fixed spherical-coordinate map with its analytic
    volume element; graph domains are integrated fiber by fiber.
    """
    arity = getattr(f, "arity_in", None)
    if arity is not None and arity != D.dim:
        raise ValueError(f"integrand takes {arity} variables but domain has dimension {D.dim}")

    def partial(chunk):
        X, W = chunk
        return np.sum(W * _checked(f(X), "integrate_volume"))

    return _sum_chunks(partial, _volume_chunks(D, q))


def ball_integrals(f, centers, radii, q: QuadScheme = QuadScheme()):
    """Integrals of f over many balls at once (one shared polar rule)."""
    centers = np.atleast_2d(np.asarray(centers, float))
    radii = np.asarray(radii, float)
    m = centers.shape[1]
    P, W = tensor_rule(*_ball_box(m, 1.0), q.gauss_order, q.subdivisions)
    dirs, ang = _sphere_dirs(P[:, 1:])
    r = P[:, 0]
    out = np.empty(len(radii))
    per = max(1, CHUNK // len(P))
    for k in range(0, len(radii), per):
        c, R = centers[k : k + per], radii[k : k + per]
        X = c[:, None, :] + (R[:, None, None] * r[None, :, None]) * dirs[None]
        vals = _checked(f(X.reshape(-1, m)), "ball_integrals").reshape(len(R), -1)
        elem = R[:, None] ** m * (r ** (m - 1) * ang * W)[None]
        out[k : k + per] = np.sum(vals * elem, axis=1)
    return out


# -- surface integrals ------------------------------------------------------


def _pieces(surface):
    if isinstance(surface, ParamSurface):
        return (surface,)
    if isinstance(surface, PiecewiseSurface):
        return surface.pieces
    return tuple(surface)


def _surface_partial(S, q, integrand):
    def partial(chunk):
        U, W = chunk
        X = S.chart(U)
        N, _ = surface_normal(S, U, q.diff)
        return np.sum(W * _checked(integrand(X, N), f"surface piece {S.label!r}"))

    return partial


def surface_piece_integrals(f, surface, q: QuadScheme = QuadScheme()):
    """Per-piece values of the integral of f(x(u)) |N(u)| du."""
    out = []
    for S in _pieces(surface):
        arity = getattr(f, "arity_in", None)
        if arity is not None and arity != S.dim:
            raise ValueError(f"integrand takes {arity} variables, surface lives in R^{S.dim}")
        integrand = lambda X, N: f(X) * np.linalg.norm(N, axis=-1)  # noqa: E731
        chunks = _tensor_chunks(S.lo, S.hi, q.gauss_order, q.subdivisions)
        out.append(_sum_chunks(_surface_partial(S, q, integrand), chunks))
    return out


def integrate_surface(f, surface, q: QuadScheme = QuadScheme()):
    return float(np.sum(surface_piece_integrals(f, surface, q)))


def piece_fluxes(F, surface, q: QuadScheme = QuadScheme()):
    """Per-piece outward flux of a vector field F."""
    out = []
    for S in _pieces(surface):
        sign = S.orientation_sign
        integrand = lambda X, N, s=sign: s * np.einsum("ij,ij->i", F(X), N)  # noqa: E731
        chunks = _tensor_chunks(S.lo, S.hi, q.gauss_order, q.subdivisions)
        out.append(_sum_chunks(_surface_partial(S, q, integrand), chunks))
    return out


def flux(F, surface, q: QuadScheme = QuadScheme()):
    """Outward flux: sum over pieces of the integral of F(x(u)) . (+-N(u)) du."""
    return float(np.sum(piece_fluxes(F, surface, q)))


# -- mollifier --------------------------------------------------------------


def _bump(s):
    out = np.zeros_like(s)
    inside = s < 1.0
    out[inside] = np.exp(1.0 / (s[inside] - 1.0))
    return out


class Mollifier:
    """Radial bump exp(1 / (|z|^2/eps^2 - 1)) on the eps-ball, scaled to unit mass.

    The scale comes from the same tensor Gauss rule used for convolution, so
    the discrete mass is 1 up to roundoff; construction also checks it
    against an independent radial integral.
    """

    def __init__(self, epsilon, dim, q: QuadScheme = QuadScheme()):
        if not epsilon > 0:
            raise ValueError("epsilon must be positive")
        if dim < 1:
            raise ValueError("dim must be >= 1")
        self.epsilon = float(epsilon)
        self.dim = int(dim)
        Z, W = tensor_rule((-epsilon,) * dim, (epsilon,) * dim, q.gauss_order, q.subdivisions)
        raw = _bump(np.sum(Z**2, axis=1) / epsilon**2)
        keep = raw > 0
        self.nodes = Z[keep]
        raw_w = W[keep] * raw[keep]
        self.scale = 1.0 / np.sum(raw_w)
        self.weights = raw_w * self.scale

        radial, _ = _sp_integrate.quad(
            lambda r: math.exp(1.0 / (r * r - 1.0)) * r ** (dim - 1) if r < 1 else 0.0,
            0.0,
            1.0,
            epsabs=1e-14,
            epsrel=1e-13,
        )
        sphere_area = 2 * math.pi ** (dim / 2) / math.gamma(dim / 2)
        self.mass = self.scale * epsilon**dim * sphere_area * radial
        if abs(self.mass - 1.0) > 1e-6:
            raise ValueError(f"mollifier mass {self.mass!r} is not 1 within 1e-6; refine the rule")

    def __call__(self, Z):
        Z = np.asarray(Z, float)
        return self.scale * _bump(np.sum(Z**2, axis=-1) / self.epsilon**2)


def mollify(f, M: Mollifier, q: QuadScheme = QuadScheme(), domain=None):
    """Evaluator for the convolution y -> sum_k f(y - z_k) eta(z_k) w_k.

    With ``domain`` given, f is extended beyond it by clamping sample points
    to the domain's bounding box.
    """
    clamp = domain.bounding_box() if domain is not None else None
    per = max(1, CHUNK // len(M.nodes))

    def smoothed(Y):
        Y = np.asarray(Y, float)
        single = Y.ndim == 1
        Y = np.atleast_2d(Y)
        out = np.empty(len(Y))
        for k in range(0, len(Y), per):
            P = Y[k : k + per, None, :] - M.nodes[None]
            if clamp is not None:
                P = np.clip(P, clamp[0], clamp[1])
            vals = _checked(f(P.reshape(-1, M.dim)), "mollify").reshape(P.shape[:2])
            out[k : k + per] = vals @ M.weights
        return out[0] if single else out

    return smoothed


# -- Monte Carlo oracle -----------------------------------------------------


def mc_estimate(f, D, n_samples, seed, stream_size=1 << 16):
    """Uniform rejection-sampling estimate of the integral of f over D.

    Returns ``(mean, stderr)``. Samples come from Philox streams spawned per
    fixed-size block of ``stream_size`` draws, so the estimate depends only
    on ``seed`` and ``n_samples``.
    """
    if n_samples < 1000:
        raise ValueError("mc_estimate needs at least 1000 samples")
    lo, hi = (np.asarray(b, float) for b in D.bounding_box())
    vol = float(np.prod(hi - lo))
    blocks = -(-n_samples // stream_size)
    seqs = np.random.SeedSequence(seed).spawn(blocks)
    total = 0.0
    total_sq = 0.0
    accepted = 0
    for b, ss in enumerate(seqs):
        n = min(stream_size, n_samples - b * stream_size)
        rng = np.random.Generator(np.random.Philox(ss))
        X = lo + (hi - lo) * rng.random((n, len(lo)))
        inside = D.contains(X)
        vals = np.zeros(n)
        if inside.any():
            vals[inside] = _checked(f(X[inside]), "mc_estimate")
        accepted += int(inside.sum())
        total += float(np.sum(vals))
        total_sq += float(np.sum(vals * vals))
    if accepted == 0:
        raise DomainError("no Monte Carlo sample landed inside the domain")
    mean = total / n_samples
    var = max(total_sq / n_samples - mean * mean, 0.0) * n_samples / (n_samples - 1)
    return vol * mean, vol * math.sqrt(var / n_samples)
