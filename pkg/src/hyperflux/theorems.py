"""Executable checks of the integral identities: divergence theorem, change
of variables (absolute and signed), the cofactor/Hadamard identities, the
partial antiderivative Q and the disjoint-ball exhaustion inequality.

Every check returns a :class:`VerifyReport`. Two tolerance classes are used:
``integral`` (quadrature level, 1e-6..1e-8) and ``nested_fd`` (1e-4, for
quantities obtained by differentiating finite-difference output).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .diff import DiffConfig, divergence, gradient, jacobian_det
from .expr import MapExpr, Num
from .geom import Ball, Box, DomainError, Graph, boundary
from .linalg import cofactor_field
from .quad import (
    QuadScheme,
    ball_integrals,
    composite_rule,
    flux,
    integrate_surface,
    integrate_volume,
    mc_estimate,
    piece_fluxes,
)

__all__ = [
    "VerifyReport",
    "NESTED_STEP",
    "nested_config",
    "check_divergence",
    "potential_Q",
    "check_potential",
    "hadamard_divergence",
    "check_hadamard",
    "cofactor_flux_divergence",
    "check_cofactor_flux",
    "check_cov",
    "check_cov_singly",
    "check_balls_admissible",
    "ball_exhaustion_check",
    "check_surface_measure",
    "check_mc",
]

# step for differentiating finite-difference output: eps^(1/4) balances
# truncation against roundoff amplified twice by 1/h
NESTED_STEP = float(np.finfo(float).eps ** 0.25)


def nested_config():
    return DiffConfig(rel_step=NESTED_STEP)


@dataclass
class VerifyReport:
    name: str
    lhs: float
    rhs: float
    residual: float
    rel_residual: float
    tol: float
    passed: bool
    diagnostics: dict = field(default_factory=dict)

    @classmethod
    def make(cls, name, lhs, rhs, tol, diagnostics=None, residual=None):
        lhs, rhs = float(lhs), float(rhs)
        if residual is None:
            residual = abs(lhs - rhs)
        residual = float(residual)
        rel = residual / max(1.0, abs(lhs), abs(rhs))
        ok = bool(rel <= tol) if math.isfinite(rel) else False
        return cls(name, lhs, rhs, residual, rel, float(tol), ok, dict(diagnostics or {}))

    def to_dict(self):
        d = asdict(self)
        d["pass"] = d.pop("passed")
        d["diagnostics"] = _jsonable(self.diagnostics)
        return d

    def __str__(self):
        flag = "PASS" if self.passed else "FAIL"
        return (
            f"[{flag}] {self.name}: lhs={self.lhs:.12g} rhs={self.rhs:.12g} "
            f"rel_residual={self.rel_residual:.3e} tol={self.tol:.1e}"
        )


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    if isinstance(v, (np.floating, float)):
        return float(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def _itype_axis(F):
    """1-based i when only component i of F is non-zero (by construction)."""
    if not isinstance(F, MapExpr):
        return None
    live = [i for i, c in enumerate(F.components) if not (isinstance(c.ast, Num) and c.ast.value == 0.0)]
    return live[0] + 1 if len(live) == 1 else None


# -- divergence theorem -----------------------------------------------------


def check_divergence(F, D, q: QuadScheme = QuadScheme(), tol=1e-6, name="check_divergence"):
    """Volume integral of div F against the outward flux through boundary(D)."""
    if F.dim_out != D.dim or F.arity_in != D.dim:
        raise ValueError("F must map R^m -> R^m with m the domain dimension")
    div_f = lambda X: divergence(F, X, q.diff)  # noqa: E731
    lhs = integrate_volume(div_f, D, q)
    sigma = boundary(D, q.diff)
    per_piece = piece_fluxes(F, sigma, q)
    rhs = float(np.sum(per_piece))
    diag = {
        "tol_class": "integral",
        "piece_flux": {S.label: v for S, v in zip(sigma, per_piece)},
    }
    axis = _itype_axis(F)
    if axis is not None:
        diag["i_type"] = axis
        if isinstance(D, Graph) and D.axis == axis:
            diag["sigma_0_flux"] = float(
                sum(v for S, v in zip(sigma, per_piece) if S.label.startswith("sigma_0"))
            )
    return VerifyReport.make(name, lhs, rhs, tol, diag)


# -- the partial antiderivative Q --------------------------------------------


def potential_Q(f, a, q: QuadScheme = QuadScheme()):
    """Evaluator for Q(y) = integral of f(t, y2, ..., ym) dt over [-a, y1]."""
    a = float(a)
    if not a > 0:
        raise ValueError("half-width a must be positive")

    def Q(Y):
        Y = np.asarray(Y, float)
        single = Y.ndim == 1
        Y = np.atleast_2d(Y)
        if np.any(np.abs(Y) > a):
            raise ValueError(f"Q is only defined on the cube [-{a}, {a}]^m")
        t, w = composite_rule(-a, Y[:, 0], q.gauss_order, q.subdivisions)
        n, K = t.shape
        P = np.repeat(Y, K, axis=0)
        P[:, 0] = t.ravel()
        vals = np.asarray(f(P), float).reshape(n, K)
        out = np.sum(vals * w, axis=1)
        return out[0] if single else out

    Q.half_width = a
    return Q


def check_potential(f, a, points, q: QuadScheme = QuadScheme(), tol=1e-6, name="potential_Q"):
    """Finite-difference d/dy1 of Q against f on the given points."""
    Q = potential_Q(f, a, q)
    P = np.atleast_2d(np.asarray(points, float))
    m = P.shape[1]
    cfg = q.diff.with_bounds((-a,) * m, (a,) * m)
    dQ = gradient(Q, P, cfg)[:, 0]
    fv = np.asarray(f(P), float)
    err = np.abs(dQ - fv)
    k = int(np.argmax(err))
    diag = {"tol_class": "integral", "n_points": len(P), "worst_point": P[k], "max_error": float(err[k])}
    return VerifyReport.make(name, dQ[k], fv[k], tol, diag)


# -- cofactor identities ------------------------------------------------------


def hadamard_divergence(phi, X, cfg=None):
    """sum_i d/dx_i of the first-row cofactors of phi' (nested differences)."""
    cfg = cfg or nested_config()
    A = lambda Y: cofactor_field(phi, Y, cfg)  # noqa: E731
    return divergence(A, X, cfg)


def check_hadamard(phi, x, cfg=None, tol=1e-4, name="check_hadamard"):
    x = np.asarray(x, float)
    val = float(hadamard_divergence(phi, x, cfg))
    A = cofactor_field(phi, x, cfg or nested_config())
    diag = {"tol_class": "nested_fd", "point": x, "cofactors": A}
    return VerifyReport.make(name, val, 0.0, tol, diag)


def cofactor_flux_divergence(f, phi, X, a, q: QuadScheme = QuadScheme(), cfg=None):
    """div of the field x -> Q(phi(x)) A(x) by nested differences."""
    cfg = cfg or nested_config()
    Q = potential_Q(f, a, q)

    def G(Y):
        return Q(phi(Y))[..., None] * cofactor_field(phi, Y, cfg)

    return divergence(G, X, cfg)


def check_cofactor_flux(f, phi, x, a, q: QuadScheme = QuadScheme(), tol=1e-4, name="check_cofactor_flux"):
    """div(Q(phi) A) at x against f(phi(x)) J_phi(x)."""
    x = np.asarray(x, float)
    lhs = float(cofactor_flux_divergence(f, phi, x, a, q))
    y = phi(x)
    J = float(jacobian_det(phi, x, q.diff))
    rhs = float(f(y)) * J
    diag = {"tol_class": "nested_fd", "point": x, "phi_x": y, "jacobian": J, "half_width": float(a)}
    return VerifyReport.make(name, lhs, rhs, tol, diag)


# -- change of variables -------------------------------------------------------


def _pulled_back(f, phi, cfg, stats=None, absolute=True):
    def g(X):
        J = jacobian_det(phi, X, cfg)
        J = np.atleast_1d(J)
        if stats is not None:
            stats.append((float(J.min()), float(J.max()), int(np.sum(J == 0))))
        return f(phi(X)) * (np.abs(J) if absolute else J)

    return g


def _jacobian_screen(stats):
    lo = min(s[0] for s in stats)
    hi = max(s[1] for s in stats)
    zeros = sum(s[2] for s in stats)
    return {
        "jacobian_min": lo,
        "jacobian_max": hi,
        "jacobian_zero_nodes": zeros,
        "jacobian_sign_change": bool(lo < 0 < hi),
    }


def check_cov(f, phi, omega, D, q: QuadScheme = QuadScheme(), tol=1e-7, name="check_cov"):
    """Integral of f over D against the integral of f(phi) |J_phi| over omega.

    phi is assumed to be a diffeomorphism omega -> D; the quadrature nodes
    double as a screen that J_phi does not vanish or change sign.
    """
    lhs = integrate_volume(f, D, q)
    stats = []
    rhs = integrate_volume(_pulled_back(f, phi, q.diff, stats), omega, q)
    diag = {"tol_class": "integral", **_jacobian_screen(stats)}
    return VerifyReport.make(name, lhs, rhs, tol, diag)


def _uniform_in_ball(ball, n, seed):
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    m = ball.dim
    g = rng.standard_normal((n, m))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    r = rng.random(n) ** (1.0 / m)
    # stay strictly inside
    return np.asarray(ball.center) + 0.999 * ball.radius * r[:, None] * g


def _cube_half_width(D):
    lo, hi = D.bounding_box()
    return 1.05 * float(max(np.max(np.abs(lo)), np.max(np.abs(hi)))) + 1e-3


def check_cov_singly(
    f,
    phi,
    omega: Ball,
    D,
    q: QuadScheme = QuadScheme(),
    tol=1e-7,
    n_sign_samples=100,
    boundary_route=True,
    name="check_cov_singly",
):
    """Signed change of variables on a ball: int_D f = s * int_omega f(phi) J_phi,
    with s the sign of J_phi at the ball center.

    With ``boundary_route`` the diagnostics also carry the two boundary
    integrals that connect the sides: the flux of (Q, 0, ..., 0) out of D and
    the flux of Q(phi) A out of omega.
    """
    if not isinstance(omega, Ball):
        raise DomainError("check_cov_singly needs a ball as the source domain")
    probe = omega.interior_probe()
    J0 = float(jacobian_det(phi, probe, q.diff))
    if abs(J0) < 1e-12:
        raise ValueError(f"sign test inconclusive: |J_phi| = {abs(J0):.3e} at the ball center")
    sign = 1 if J0 > 0 else -1
    samples = _uniform_in_ball(omega, n_sign_samples, q.mc_seed)
    signs = np.sign(jacobian_det(phi, samples, q.diff))
    census = {"positive": int(np.sum(signs > 0)), "negative": int(np.sum(signs < 0)), "zero": int(np.sum(signs == 0))}

    lhs = integrate_volume(f, D, q)
    stats = []
    signed = integrate_volume(_pulled_back(f, phi, q.diff, stats, absolute=False), omega, q)
    rhs = sign * signed
    diag = {
        "tol_class": "integral",
        "sign": sign,
        "probe": probe,
        "jacobian_at_probe": J0,
        "sign_census": census,
        "sign_constant": bool(census[("positive" if sign > 0 else "negative")] == n_sign_samples),
        "signed_integral": signed,
        **_jacobian_screen(stats),
    }
    if boundary_route:
        a = _cube_half_width(D)
        Q = potential_Q(f, a, q)

        def QE1(Y):
            out = np.zeros(Y.shape)
            out[:, 0] = Q(Y)
            return out

        cfg = q.diff

        def QA(X):
            return Q(phi(X))[:, None] * cofactor_field(phi, X, cfg)

        diag["flux_Q_e1_out_of_D"] = flux(QE1, boundary(D, cfg), q)
        diag["flux_QA_out_of_omega"] = flux(QA, boundary(omega, cfg), q)
        diag["cube_half_width"] = a
    return VerifyReport.make(name, lhs, rhs, tol, diag)


# -- exhaustion by disjoint balls ---------------------------------------------


def check_balls_admissible(balls, omega, rel_tol=0.0):
    """Raise DomainError unless the balls are pairwise disjoint and inside omega."""
    centers = np.atleast_2d(np.asarray([b.center for b in balls], float))
    radii = np.asarray([b.radius for b in balls], float)
    if isinstance(omega, Box):
        lo, hi = np.asarray(omega.lo, float), np.asarray(omega.hi, float)
        bad = np.any(centers - radii[:, None] < lo, axis=1) | np.any(centers + radii[:, None] > hi, axis=1)
    elif isinstance(omega, Ball):
        d = np.linalg.norm(centers - np.asarray(omega.center), axis=1)
        bad = d + radii > omega.radius
    else:
        bad = ~omega.contains(centers)
    if bad.any():
        k = int(np.flatnonzero(bad)[0])
        raise DomainError(f"ball {k} (center {centers[k].tolist()}, radius {radii[k]}) escapes the domain")
    n = len(radii)
    step = 512
    for s in range(0, n, step):
        c, r = centers[s : s + step], radii[s : s + step]
        d = np.linalg.norm(c[:, None, :] - centers[None], axis=-1)
        gap = d - (r[:, None] + radii[None])
        idx = np.arange(s, s + len(r))
        gap[np.arange(len(r)), idx] = np.inf
        if np.any(gap < 0):
            i, j = np.argwhere(gap < 0)[0]
            raise DomainError(f"balls {s + i} and {j} overlap")


def ball_exhaustion_check(
    f,
    phi,
    omega,
    D,
    balls,
    q: QuadScheme = QuadScheme(),
    tol=1e-7,
    ball_q: QuadScheme = None,
    name="ball_exhaustion_check",
):
    """Sum over disjoint balls B_i in omega of int_{B_i} f(phi)|J_phi| <= int_D f.

    The residual is the violation max(0, lhs - rhs); the diagnostics carry the
    gap rhs - lhs and the fraction of omega covered by the balls.
    """
    check_balls_admissible(balls, omega)
    ball_q = ball_q or q
    centers = np.asarray([b.center for b in balls], float)
    radii = np.asarray([b.radius for b in balls], float)
    per_ball = ball_integrals(_pulled_back(f, phi, q.diff), centers, radii, ball_q)
    lhs = float(np.sum(per_ball))
    rhs = integrate_volume(f, D, q)
    vol = float(np.sum([b.volume() for b in balls]))
    diag = {
        "tol_class": "integral",
        "relation": "lhs <= rhs",
        "n_balls": len(balls),
        "gap": rhs - lhs,
        "relative_gap": (rhs - lhs) / rhs if rhs else float("nan"),
        "coverage": vol / omega.volume(),
    }
    if len(balls) <= 20:
        diag["per_ball"] = per_ball
    return VerifyReport.make(name, lhs, rhs, tol, diag, residual=max(0.0, lhs - rhs))


# -- measures and oracles ------------------------------------------------------


def check_surface_measure(D, expected, q: QuadScheme = QuadScheme(), tol=1e-6, name="surface_measure"):
    """Total measure of boundary(D) against a closed-form value."""
    sigma = boundary(D, q.diff)
    m = D.dim
    one = lambda X: np.ones(len(X))  # noqa: E731
    one.arity_in = m
    area = integrate_surface(one, sigma, q)
    diag = {"tol_class": "integral", "pieces": len(sigma)}
    return VerifyReport.make(name, area, expected, tol, diag)


def check_mc(f, D, q: QuadScheme = QuadScheme(), n_samples=10**6, n_sigma=4.0, name="check_mc"):
    """Gauss quadrature against the Monte Carlo oracle; passes within
    ``n_sigma`` standard errors (tol is expressed on the rel_residual scale)."""
    lhs = integrate_volume(f, D, q)
    mean, stderr = mc_estimate(f, D, n_samples, q.mc_seed)
    scale = max(1.0, abs(lhs), abs(mean))
    tol = (n_sigma * stderr + 1e-12 * scale) / scale
    diag = {"tol_class": "statistical", "stderr": stderr, "n_samples": n_samples, "seed": q.mc_seed, "n_sigma": n_sigma}
    return VerifyReport.make(name, lhs, mean, tol, diag)
