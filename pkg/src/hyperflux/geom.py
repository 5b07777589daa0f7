"""Parametrized hypersurfaces, volume domains and their oriented boundaries."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Tuple

import numpy as np

from .diff import DiffConfig, jacobian
from .expr import BinOp, FieldExpr, MapExpr, Num, Var, parse_map, substitute, to_source
from .linalg import normal_from_minors, rank_tolerance

__all__ = [
    "DegenerateParametrizationError",
    "OrientationError",
    "DomainError",
    "ParamSurface",
    "PiecewiseSurface",
    "Box",
    "Ball",
    "Graph",
    "surface_normal",
    "boundary",
    "orient_outward",
    "sphere_chart",
    "param_names",
]


class DegenerateParametrizationError(ValueError):
    """The chart differential drops rank (|N(u)| below the rank tolerance)."""


class OrientationError(ValueError):
    pass


class DomainError(ValueError):
    pass


def param_names(k):
    return tuple(f"u{i}" for i in range(1, k + 1))


def coord_names(m):
    return tuple(f"x{i}" for i in range(1, m + 1))


@dataclass(frozen=True)
class ParamSurface:
    """Chart U -> R^m over the box ``[lo, hi]`` in R^(m-1).

    ``orientation_sign`` multiplies N(u) to give the outward normal.
    """

    chart: MapExpr
    lo: tuple
    hi: tuple
    orientation_sign: int = 1
    label: str = ""

    def __post_init__(self):
        m = self.chart.dim_out
        if self.chart.arity_in != m - 1:
            raise ValueError(f"chart must map R^{m - 1} -> R^{m}, got arity {self.chart.arity_in}")
        if len(self.lo) != m - 1 or len(self.hi) != m - 1:
            raise ValueError("parameter box has the wrong dimension")
        if not all(a < b for a, b in zip(self.lo, self.hi)):
            raise ValueError("parameter box needs lo < hi on every axis")
        if self.orientation_sign not in (1, -1):
            raise ValueError("orientation_sign must be +1 or -1")

    @property
    def dim(self):
        return self.chart.dim_out

    @property
    def center(self):
        return 0.5 * (np.asarray(self.lo) + np.asarray(self.hi))

    def diff_config(self, cfg: DiffConfig):
        return cfg.with_bounds(self.lo, self.hi)


@dataclass(frozen=True)
class PiecewiseSurface:
    pieces: tuple

    def __iter__(self):
        return iter(self.pieces)

    def __len__(self):
        return len(self.pieces)


# -- domains ---------------------------------------------------------------


@dataclass(frozen=True)
class Box:
    lo: tuple
    hi: tuple

    def __post_init__(self):
        if len(self.lo) != len(self.hi) or not self.lo:
            raise DomainError("box bounds must have equal, nonzero length")
        if not all(a < b for a, b in zip(self.lo, self.hi)):
            raise DomainError(f"box needs lo < hi componentwise, got {self.lo}, {self.hi}")

    @property
    def dim(self):
        return len(self.lo)

    def interior_probe(self):
        return 0.5 * (np.asarray(self.lo, float) + np.asarray(self.hi, float))

    def bounding_box(self):
        return np.asarray(self.lo, float), np.asarray(self.hi, float)

    def volume(self):
        return float(np.prod(np.subtract(self.hi, self.lo)))

    def contains(self, X):
        X = np.asarray(X)
        return np.all((X > np.asarray(self.lo)) & (X < np.asarray(self.hi)), axis=-1)


@dataclass(frozen=True)
class Ball:
    center: tuple
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise DomainError(f"ball radius must be positive, got {self.radius}")
        if len(self.center) < 1:
            raise DomainError("ball center must be non-empty")

    @property
    def dim(self):
        return len(self.center)

    def interior_probe(self):
        return np.asarray(self.center, float)

    def bounding_box(self):
        c = np.asarray(self.center, float)
        return c - self.radius, c + self.radius

    def volume(self):
        m = self.dim
        return math.pi ** (m / 2) / math.gamma(m / 2 + 1) * self.radius**m

    def contains(self, X):
        d = np.asarray(X) - np.asarray(self.center)
        return np.einsum("...i,...i->...", d, d) < self.radius**2


@dataclass(frozen=True)
class Graph:
    """``{x : lower(x') < x_axis < upper(x'), x' in base box}``.

    ``axis`` is 1-based; ``lower``/``upper`` are fields over the remaining
    coordinates x' (named x1..xm with x_axis omitted).
    """

    axis: int
    lo: tuple
    hi: tuple
    lower: FieldExpr
    upper: FieldExpr
    samples: int = field(default=9, compare=False)

    def __post_init__(self):
        m = len(self.lo) + 1
        if m < 2 or len(self.hi) != m - 1:
            raise DomainError("graph base box must be (m-1)-dimensional")
        if not 1 <= self.axis <= m:
            raise DomainError(f"axis must be in 1..{m}")
        if not all(a < b for a, b in zip(self.lo, self.hi)):
            raise DomainError("graph base box needs lo < hi componentwise")
        names = self.base_names
        for f in (self.lower, self.upper):
            if tuple(f.variables) != names:
                raise DomainError(f"graph bounds must use variables {names}, got {f.variables}")
        # strict on cell midpoints; touching is allowed on the closed base box
        inner = self.base_grid(self.samples, midpoints=True)
        closed = self.base_grid(self.samples)
        if not (np.all(self.lower(inner) < self.upper(inner)) and np.all(self.lower(closed) <= self.upper(closed))):
            raise DomainError("graph domain needs lower < upper on the base box")

    @property
    def dim(self):
        return len(self.lo) + 1

    @property
    def base_names(self):
        return tuple(n for i, n in enumerate(coord_names(self.dim)) if i != self.axis - 1)

    def base_grid(self, n, midpoints=False):
        if midpoints:
            axes = [a + (b - a) * (np.arange(n) + 0.5) / n for a, b in zip(self.lo, self.hi)]
        else:
            axes = [np.linspace(a, b, n) for a, b in zip(self.lo, self.hi)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.dim - 1)

    def lift(self, base, t):
        """Insert the axis coordinate ``t`` into base points x'."""
        return np.insert(np.asarray(base, float), self.axis - 1, t, axis=-1)

    def interior_probe(self):
        c = 0.5 * (np.asarray(self.lo, float) + np.asarray(self.hi, float))
        mid = 0.5 * (float(self.lower(c)) + float(self.upper(c)))
        return self.lift(c, mid)

    def bounding_box(self, n=65):
        g = self.base_grid(n)
        lo_t, hi_t = float(np.min(self.lower(g))), float(np.max(self.upper(g)))
        pad = 0.1 * (hi_t - lo_t)
        lo = self.lift(np.asarray(self.lo, float), lo_t - pad)
        hi = self.lift(np.asarray(self.hi, float), hi_t + pad)
        return lo, hi

    def contains(self, X):
        X = np.asarray(X, float)
        base = np.delete(X, self.axis - 1, axis=-1)
        t = X[..., self.axis - 1]
        inside = np.all((base > np.asarray(self.lo)) & (base < np.asarray(self.hi)), axis=-1)
        return inside & (self.lower(base) < t) & (t < self.upper(base))


# -- normals and orientation -----------------------------------------------


def surface_normal(S: ParamSurface, u, cfg: DiffConfig = DiffConfig()):
    """Minor normal N(u) and the oriented unit normal at parameter point(s) u."""
    U = np.asarray(u, float)
    single = U.ndim == 1
    U = np.atleast_2d(U)
    J = jacobian(S.chart, U, S.diff_config(cfg))
    N = normal_from_minors(J)
    norm = np.linalg.norm(N, axis=-1)
    bad = ~(norm > rank_tolerance(J))
    if bad.any():
        k = int(np.flatnonzero(bad)[0])
        raise DegenerateParametrizationError(
            f"rank condition fails on {S.label or 'surface'} at u={U[k].tolist()} (|N|={norm[k]:.3e})"
        )
    n = S.orientation_sign * N / norm[:, None]
    if single:
        return N[0], n[0]
    return N, n


def orient_outward(S: ParamSurface, D, cfg: DiffConfig = DiffConfig(), rel_tol=1e-9) -> int:
    """Sign making N point away from the interior probe of D at the chart center."""
    u0 = S.center
    x0 = S.chart(u0)
    J = jacobian(S.chart, u0, S.diff_config(cfg))
    N = normal_from_minors(J)
    d = x0 - D.interior_probe()
    s = float(N @ d)
    if abs(s) <= rel_tol * np.linalg.norm(N) * np.linalg.norm(d) or np.linalg.norm(N) == 0:
        raise OrientationError(
            f"orientation probe inconclusive for {S.label or 'surface'}; try a different probe point"
        )
    return 1 if s > 0 else -1


def _oriented(S, D, cfg):
    return replace(S, orientation_sign=orient_outward(S, D, cfg))


def _num(v):
    v = float(v)
    return repr(v) if v >= 0 else f"(-{repr(-v)})"


def sphere_chart(center, radius) -> Tuple[MapExpr, tuple, tuple]:
    """Single chart of the sphere |x - c| = r in R^m.

    x_m = cos u1, x_(m-1) = sin u1 cos u2, ..., and the last angle sweeps the
    (x1, x2) plane: x1 = S cos u_(m-1), x2 = S sin u_(m-1) with S the product of
    the other sines. u_(m-1) runs over [0, 2pi], the rest over [0, pi].
    """
    c = [float(v) for v in center]
    m = len(c)
    k = m - 1
    if m < 2:
        raise ValueError("spheres need m >= 2")
    u = param_names(k)
    comps = [None] * m
    prefix = []
    # x_m .. x_3 take cos of successive polar angles
    for j in range(m, 2, -1):
        angle = u[m - j]
        comps[j - 1] = "*".join(prefix + [f"cos({angle})"])
        prefix.append(f"sin({angle})")
    last = u[k - 1]
    comps[0] = "*".join(prefix + [f"cos({last})"])
    comps[1] = "*".join(prefix + [f"sin({last})"])
    r = _num(radius)
    src = [f"{_num(c[i])} + {r}*{comps[i]}" for i in range(m)]
    lo = (0.0,) * k
    hi = (math.pi,) * (k - 1) + (2 * math.pi,)
    return parse_map(src, u), lo, hi


def boundary(D, cfg: DiffConfig = DiffConfig()) -> PiecewiseSurface:
    """Oriented piecewise parametrization of the boundary of D."""
    if isinstance(D, Box):
        m = D.dim
        if m < 2:
            raise DomainError("boundary needs m >= 2")
        u = param_names(m - 1)
        pieces = []
        for j in range(m):
            free = [i for i in range(m) if i != j]
            for v, tag in ((D.lo[j], "lo"), (D.hi[j], "hi")):
                src = [None] * m
                src[j] = _num(v)
                for p, i in enumerate(free):
                    src[i] = u[p]
                S = ParamSurface(
                    parse_map(src, u),
                    tuple(float(D.lo[i]) for i in free),
                    tuple(float(D.hi[i]) for i in free),
                    label=f"face x{j + 1}={tag}",
                )
                pieces.append(_oriented(S, D, cfg))
        return PiecewiseSurface(tuple(pieces))

    if isinstance(D, Ball):
        chart, lo, hi = sphere_chart(D.center, D.radius)
        S = ParamSurface(chart, lo, hi, label="sphere")
        return PiecewiseSurface((_oriented(S, D, cfg),))

    if isinstance(D, Graph):
        return _graph_boundary(D, cfg)

    raise DomainError(f"unsupported domain {type(D).__name__}")


def _graph_boundary(D: Graph, cfg):
    m = D.dim
    k = m - 1
    ax = D.axis - 1
    base = D.base_names
    u = param_names(k)
    to_u = {name: Var(u[p], p) for p, name in enumerate(base)}

    def comps(bound_ast, mapping):
        out = []
        for i in range(m):
            if i == ax:
                out.append(bound_ast)
            else:
                p = i if i < ax else i - 1
                out.append(mapping[base[p]])
        return out

    pieces = []
    for tag, f in (("sigma_plus", D.upper), ("sigma_minus", D.lower)):
        nodes = comps(substitute(f.ast, to_u, u), to_u)
        chart = MapExpr(tuple(FieldExpr(n, u, to_source(n)) for n in nodes))
        S = ParamSurface(chart, tuple(map(float, D.lo)), tuple(map(float, D.hi)), label=tag)
        pieces.append(_oriented(S, D, cfg))

    # side walls over each face of the base box: the remaining base coordinates
    # become u1..u(k-1) and u_k sweeps the fiber from lower to upper
    t = Var(u[k - 1], k - 1)
    for p in range(k):
        free = [q for q in range(k) if q != p]
        for v, tag in ((D.lo[p], "lo"), (D.hi[p], "hi")):
            mapping = {base[p]: Num(float(v))}
            for r, q in enumerate(free):
                mapping[base[q]] = Var(u[r], r)
            lower = substitute(D.lower.ast, mapping, u)
            upper = substitute(D.upper.ast, mapping, u)
            face = D.base_grid(D.samples)
            face = face[np.isclose(face[:, p], v, rtol=0, atol=0)] if k > 1 else np.array([[float(v)]])
            if np.all(D.upper(face) - D.lower(face) <= 0):
                # the fiber collapses along this whole face: zero-measure wall
                continue
            fiber = BinOp("+", lower, BinOp("*", t, BinOp("-", upper, lower)))
            nodes = comps(fiber, mapping)
            nodes = [substitute(n, {}, u) for n in nodes]
            chart = MapExpr(tuple(FieldExpr(n, u, to_source(n)) for n in nodes))
            lo = tuple(float(D.lo[q]) for q in free) + (0.0,)
            hi = tuple(float(D.hi[q]) for q in free) + (1.0,)
            S = ParamSurface(chart, lo, hi, label=f"sigma_0 {base[p]}={tag}")
            pieces.append(_oriented(S, D, cfg))
    return PiecewiseSurface(tuple(pieces))
