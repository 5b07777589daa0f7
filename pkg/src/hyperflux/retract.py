"""Non-retraction obstruction and a fixed-point search on the unit ball."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .diff import DiffConfig, jacobian, jacobian_det
from .expr import FieldExpr, MapExpr, parse_scalar
from .geom import Ball
from .quad import QuadScheme, integrate_volume
from .theorems import VerifyReport

__all__ = [
    "bump_field",
    "bump_integral_closed_form",
    "RetractionCandidate",
    "InadmissibleCandidate",
    "screen_candidate",
    "interior_grid",
    "sphere_grid",
    "check_nonretraction",
    "fixed_point_search",
]

ADMISSIBLE_TOL = 1e-8


class InadmissibleCandidate(ValueError):
    pass


def _coords(m):
    return tuple(f"x{i}" for i in range(1, m + 1))


def bump_field(m: int) -> FieldExpr:
    """1 - 4|y|^2 on the ball of radius 1/2, 0 outside."""
    if m < 2:
        raise ValueError("bump_field needs m >= 2")
    sq = " + ".join(f"{v}^2" for v in _coords(m))
    return parse_scalar(f"piecewise(0.25 - ({sq}), 1 - 4*({sq}), 0)", _coords(m))


def bump_integral_closed_form(m: int) -> float:
    """|S^(m-1)| * int_0^(1/2) (1 - 4 r^2) r^(m-1) dr."""
    area = 2 * math.pi ** (m / 2) / math.gamma(m / 2)
    h = 0.5
    return area * (h**m / m - 4 * h ** (m + 2) / (m + 2))


def interior_grid(m, n=20):
    """Cell-centred product grid inside the closed unit ball; never hits 0 for even n."""
    axis = -1 + (2 * np.arange(n) + 1) / n
    g = np.stack(np.meshgrid(*([axis] * m), indexing="ij"), axis=-1).reshape(-1, m)
    return g[np.sum(g**2, axis=1) <= 1.0]


def sphere_grid(m, n=64):
    """Points on the unit sphere: uniform angles (m=2), Fibonacci lattice
    (m=3), normalized product grid points otherwise."""
    if m == 2:
        t = 2 * np.pi * np.arange(n) / n
        return np.stack([np.cos(t), np.sin(t)], axis=1)
    if m == 3:
        k = np.arange(n) + 0.5
        z = 1 - 2 * k / n
        phi = np.pi * (1 + 5**0.5) * k
        s = np.sqrt(1 - z**2)
        return np.stack([s * np.cos(phi), s * np.sin(phi), z], axis=1)
    side = max(3, int(round(n ** (1 / m))) | 1)
    axis = np.linspace(-1, 1, side + 1)
    g = np.stack(np.meshgrid(*([axis] * m), indexing="ij"), axis=-1).reshape(-1, m)
    g = g[np.linalg.norm(g, axis=1) > 0.5]
    return g / np.linalg.norm(g, axis=1, keepdims=True)


@dataclass(frozen=True)
class RetractionCandidate:
    T: MapExpr
    sphere_deviation: float
    boundary_deviation: float

    @property
    def sphere_valued(self):
        return self.sphere_deviation <= ADMISSIBLE_TOL

    @property
    def identity_on_boundary(self):
        return self.boundary_deviation <= ADMISSIBLE_TOL

    @property
    def admissible(self):
        return self.sphere_valued and self.identity_on_boundary


def screen_candidate(T, grid_n=20, boundary_n=64) -> RetractionCandidate:
    """Run the two grid claims: |T| = 1 inside the ball, T = id on the sphere."""
    m = T.dim_out
    if T.arity_in != m:
        raise ValueError("a retraction candidate maps R^m -> R^m")
    inner = interior_grid(m, grid_n)
    sphere_dev = float(np.max(np.abs(np.linalg.norm(T(inner), axis=1) - 1.0)))
    S = sphere_grid(m, boundary_n)
    boundary_dev = float(np.max(np.linalg.norm(T(S) - S, axis=1)))
    return RetractionCandidate(T, sphere_dev, boundary_dev)


def check_nonretraction(candidate, q: QuadScheme = QuadScheme(), tol=1e-10, name="check_nonretraction"):
    """Exhibit the obstruction for a sphere-valued candidate T.

    L = int_B f > 0 for the bump f, while f(T(x)) vanishes wherever |T| = 1,
    so R = int_B f(T(x)) J_T(x) dx is 0. The report compares R with 0; L,
    its closed form and the contradiction flag are in the diagnostics.
    """
    if isinstance(candidate, MapExpr):
        candidate = screen_candidate(candidate)
    if not candidate.admissible:
        raise InadmissibleCandidate(
            f"candidate fails the grid claims: sphere deviation {candidate.sphere_deviation:.3e}, "
            f"boundary deviation {candidate.boundary_deviation:.3e}"
        )
    T = candidate.T
    m = T.dim_out
    f = bump_field(m)
    B = Ball((0.0,) * m, 1.0)
    L = integrate_volume(f, B, q)
    closed = bump_integral_closed_form(m)
    if not L > 0.1 * closed:
        raise ArithmeticError(f"ball integral of the bump came out as {L!r}")
    max_j = [0.0]
    zero_nodes = [0, 0]

    def pulled(X):
        fT = f(T(X))
        J = jacobian_det(T, X, q.diff)
        max_j[0] = max(max_j[0], float(np.max(np.abs(J))))
        zero_nodes[0] += int(np.sum(fT == 0))
        zero_nodes[1] += len(X)
        return fT * J

    R = integrate_volume(pulled, B, q)
    report = VerifyReport.make(
        name,
        R,
        0.0,
        tol,
        {
            "tol_class": "exact",
            "ball_integral_L": L,
            "closed_form_L": closed,
            "max_abs_jacobian": max_j[0],
            "nodes_with_f_of_T_zero": zero_nodes[0],
            "nodes": zero_nodes[1],
            "sphere_deviation": candidate.sphere_deviation,
            "boundary_deviation": candidate.boundary_deviation,
        },
    )
    report.diagnostics["contradiction"] = bool(L > 0 and report.passed)
    return report


def _ball_grid(m, n):
    axis = np.linspace(-1, 1, n)
    g = np.stack(np.meshgrid(*([axis] * m), indexing="ij"), axis=-1).reshape(-1, m)
    g = g[np.sum(g**2, axis=1) <= 1.0]
    return np.concatenate([g, sphere_grid(m, 64)])


def fixed_point_search(g, grid_n=21, iters=50, cfg: DiffConfig = DiffConfig()):
    """Point of the closed unit ball minimizing |g(x) - x|.

    Screens that g maps the ball into itself, takes the best grid point and
    then refines it with damped Newton steps on g(x) - x, falling back to
    plain iteration x <- g(x). Demonstration only: nothing guarantees
    convergence for a general continuous g.
    """
    m = g.dim_out
    G = _ball_grid(m, grid_n)
    vals = g(G)
    radius = np.linalg.norm(vals, axis=1)
    if np.any(radius > 1 + 1e-8):
        k = int(np.argmax(radius))
        raise ValueError(f"g leaves the unit ball: |g({G[k].tolist()})| = {radius[k]:.6g}")
    res = np.linalg.norm(vals - G, axis=1)
    x = G[int(np.argmin(res))]
    best = float(np.min(res))

    def resid(p):
        return float(np.linalg.norm(g(p) - p))

    for _ in range(iters):
        if best <= 1e-15:
            break
        r = g(x) - x
        J = jacobian(g, x, cfg) - np.eye(m)
        candidates = []
        try:
            step = np.linalg.solve(J, -r)
            for damp in (1.0, 0.5, 0.25):
                candidates.append(x + damp * step)
        except np.linalg.LinAlgError:
            pass
        candidates.append(g(x))
        improved = False
        for c in candidates:
            n = np.linalg.norm(c)
            if n > 1:
                c = c / n
            rc = resid(c)
            if rc < best:
                x, best, improved = c, rc, True
                break
        if not improved:
            break
    return np.asarray(x, float)
