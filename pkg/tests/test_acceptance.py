"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run directly (``python3 tests/test_acceptance.py``) or through pytest.
"""

import math
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from conftest import random_poly, random_poly_map, random_poly_source  # noqa: E402
from hyperflux.cli import load_document, parse_scenario, run_scenario  # noqa: E402
from hyperflux.diff import jacobian_det  # noqa: E402
from hyperflux.expr import parse_map, parse_scalar  # noqa: E402
from hyperflux.geom import Ball, Box, Graph, ParamSurface, boundary, coord_names, orient_outward, sphere_chart  # noqa: E402
from hyperflux.linalg import cauchy_binet, cofactor_field  # noqa: E402
from hyperflux.packing import coverage, disks_to_balls, exhaust_rectangle  # noqa: E402
from hyperflux.quad import Mollifier, QuadScheme, flux, integrate_surface, integrate_volume, mc_estimate, mollify  # noqa: E402
from hyperflux.retract import bump_field, check_nonretraction, screen_candidate  # noqa: E402
from hyperflux.theorems import (  # noqa: E402
    ball_exhaustion_check,
    check_cofactor_flux,
    check_cov,
    check_cov_singly,
    check_divergence,
    check_potential,
    check_surface_measure,
    hadamard_divergence,
)
from hyperflux.diff import divergence  # noqa: E402

XY = ("x1", "x2")
XYZ = ("x1", "x2", "x3")
SEED = 20240611
MC_SAMPLES = 10**6


def report(capsys, n, ok, detail):
    line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    with capsys.disabled():
        print("\n" + line)
    return ok


# -- shared constructions (also used by the Monte Carlo cross-check) --------


def polar_case():
    phi = parse_map(["x1*cos(x2)", "x1*sin(x2)"], XY)
    return parse_scalar("1", XY), phi, Box((0.0, 0.0), (1.0, 2 * math.pi)), Ball((0.0, 0.0), 1.0)


def spherical_case():
    phi = parse_map(["x1*sin(x2)*cos(x3)", "x1*sin(x2)*sin(x3)", "x1*cos(x2)"], XYZ)
    return parse_scalar("1", XYZ), phi, Box((0.0, 0.0, 0.0), (1.0, math.pi, 2 * math.pi)), Ball((0.0, 0.0, 0.0), 1.0)


def affine_cases(n=20, seed=SEED):
    """Random affine maps u -> y, diagonal plus a shear of the last row, with
    the image of the parameter box described exactly as a graph domain."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        m = int(rng.integers(2, 4))
        x = coord_names(m)
        lo = rng.uniform(-1, 0, m)
        hi = lo + rng.uniform(0.5, 2, m)
        a = (rng.uniform(0.5, 2, m) * rng.choice([-1, 1], m)).tolist()
        b = rng.uniform(-1, 1, m).tolist()
        s = rng.uniform(-1, 1, m - 1).tolist()
        comps = [f"({a[j]!r})*{x[j]} + ({b[j]!r})" for j in range(m - 1)]
        comps.append(f"({a[-1]!r})*{x[-1]} + " + " + ".join(f"({s[j]!r})*{x[j]}" for j in range(m - 1)) + f" + ({b[-1]!r})")
        phi = parse_map(comps, x)
        ylo = [min(a[j] * lo[j], a[j] * hi[j]) + b[j] for j in range(m - 1)]
        yhi = [max(a[j] * lo[j], a[j] * hi[j]) + b[j] for j in range(m - 1)]
        base = x[:-1]
        shear = " + ".join(f"({s[j]!r})*(({base[j]} - ({b[j]!r}))/({a[j]!r}))" for j in range(m - 1))
        ends = sorted([a[-1] * lo[-1] + b[-1], a[-1] * hi[-1] + b[-1]])
        D = Graph(
            m,
            tuple(map(float, ylo)),
            tuple(map(float, yhi)),
            parse_scalar(f"{float(ends[0])!r} + {shear}", base),
            parse_scalar(f"{float(ends[1])!r} + {shear}", base),
        )
        f = parse_scalar(random_poly_source(rng, x, 3, n_terms=5), x)
        out.append((f, phi, Box(tuple(map(float, lo)), tuple(map(float, hi))), D))
    return out


def divergence_pairs():
    pairs = []
    for name in ("divergence_2d", "divergence_3d"):
        sc = parse_scenario(load_document(name))
        for c in sc.checks:
            pairs.append((c["label"], c["args"]["F"], c["args"]["D"]))
    return pairs


# -- criteria ---------------------------------------------------------------


def test_criterion_01_surface_measure(capsys):
    cases = [(2, 2 * math.pi), (3, 4 * math.pi), (4, 2 * math.pi**2)]
    rels = []
    for m, exact in cases:
        r = check_surface_measure(Ball((0.0,) * m, 1.0), exact, tol=1e-6)
        rels.append(abs(r.lhs - exact) / exact)
    ok = max(rels) <= 1e-6
    report(capsys, 1, ok, "S^1, S^2, S^3 relative errors " + ", ".join(f"{e:.1e}" for e in rels))
    assert ok


def test_criterion_02_divergence_theorem(capsys):
    pairs = divergence_pairs()
    worst, worst_sigma0, kinds = 0.0, 0.0, set()
    n_itype_graph = 0
    for label, F, D in pairs:
        r = check_divergence(F, D, tol=1e-6)
        worst = max(worst, r.rel_residual)
        kinds.add(type(D).__name__)
        if "sigma_0_flux" in r.diagnostics:
            n_itype_graph += 1
            worst_sigma0 = max(worst_sigma0, abs(r.diagnostics["sigma_0_flux"]))
    ok = len(pairs) == 12 and worst <= 1e-6 and worst_sigma0 <= 1e-8 and kinds == {"Box", "Ball", "Graph"} and n_itype_graph > 0
    report(capsys, 2, ok, f"{len(pairs)} pairs, max rel_residual {worst:.1e}; {n_itype_graph} i-type graph cases, max |sigma_0 flux| {worst_sigma0:.1e}")
    assert ok


def test_criterion_03_change_of_variables(capsys):
    f, phi, omega, D = polar_case()
    r_disk = check_cov(f, phi, omega, D, tol=1e-7)
    disk_ok = abs(r_disk.lhs - math.pi) <= 1e-7 and abs(r_disk.rhs - math.pi) <= 1e-7
    f, phi, omega, D = spherical_case()
    r_ball = check_cov(f, phi, omega, D, tol=1e-6)
    ball_ok = abs(r_ball.lhs - 4 * math.pi / 3) <= 1e-6 and abs(r_ball.rhs - 4 * math.pi / 3) <= 1e-6
    worst = max(check_cov(*case, tol=1e-8).rel_residual for case in affine_cases())
    ok = disk_ok and ball_ok and worst <= 1e-8
    report(
        capsys,
        3,
        ok,
        f"disk err {abs(r_disk.rhs - math.pi):.1e}, ball err {abs(r_ball.rhs - 4 * math.pi / 3):.1e}, 20 affine max rel_residual {worst:.1e}",
    )
    assert ok


def test_criterion_04_signed_formula(capsys):
    disk = Ball((0.0, 0.0), 1.0)
    f = parse_scalar("x1^2 + x2^2 + x1", XY)
    refl = check_cov_singly(f, parse_map(["x2", "x1"], XY), disk, disk, tol=1e-7)
    rot = check_cov_singly(f, parse_map(["cos(0.9)*x1 - sin(0.9)*x2", "sin(0.9)*x1 + cos(0.9)*x2"], XY), disk, disk, tol=1e-7)
    census_ok = all(
        r.diagnostics["sign_census"]["positive" if r.diagnostics["sign"] > 0 else "negative"] == 100 for r in (refl, rot)
    )
    ok = refl.passed and refl.diagnostics["sign"] == -1 and rot.passed and rot.diagnostics["sign"] == 1 and census_ok
    report(
        capsys,
        4,
        ok,
        f"reflection sign {refl.diagnostics['sign']:+d} rel {refl.rel_residual:.1e}; rotation sign {rot.diagnostics['sign']:+d} rel {rot.rel_residual:.1e}; sign census {'constant' if census_ok else 'MIXED'} on 100 points",
    )
    assert ok


def _laplace(M):
    if len(M) == 1:
        return M[0][0]
    return sum((-1) ** j * M[0][j] * _laplace([row[:j] + row[j + 1 :] for row in M[1:]]) for j in range(len(M)))


def test_criterion_05_cauchy_binet(capsys):
    rng = np.random.default_rng(SEED)
    failures = 0
    for k in range(1000):
        m = 2 + k % 4
        P = rng.integers(-9, 10, (m - 1, m))
        Q = rng.integers(-9, 10, (m, m - 1))
        oracle = _laplace((P.astype(object) @ Q.astype(object)).tolist())
        failures += cauchy_binet(P, Q) != oracle
    ok = failures == 0
    report(capsys, 5, ok, f"1000 integer cases, m in 2..5, {failures} mismatches against det(P Q)")
    assert ok


def test_criterion_06_hadamard(capsys):
    rng = np.random.default_rng(SEED)
    worst_poly, worst_lin = 0.0, 0.0
    for m in (2, 3, 4):
        for _ in range(10):
            phi = random_poly_map(rng, m, 3, n_terms=5)
            X = rng.uniform(-1, 1, (100, m))
            worst_poly = max(worst_poly, float(np.max(np.abs(hadamard_divergence(phi, X)))))
            A = rng.normal(size=(m, m))
            lin = parse_map([" + ".join(f"({float(A[i, j])!r})*x{j + 1}" for j in range(m)) for i in range(m)], coord_names(m))
            worst_lin = max(worst_lin, float(np.max(np.abs(hadamard_divergence(lin, X)))))
    ok = worst_poly <= 1e-4 and worst_lin <= 1e-10
    report(capsys, 6, ok, f"30 cubic maps x 100 points max |div A| {worst_poly:.1e}; linear maps {worst_lin:.1e}")
    assert ok


def test_criterion_07_cofactor_flux(capsys):
    rng = np.random.default_rng(SEED + 7)
    worst = 0.0
    for k in range(50):
        m = 2 + k % 2
        f = random_poly(rng, m, 2, n_terms=4)
        phi = random_poly_map(rng, m, 2, n_terms=4)
        x = rng.uniform(-0.5, 0.5, m)
        a = 2.0 * float(np.max(np.abs(phi(x)))) + 1.0
        r = check_cofactor_flux(f, phi, x, a, tol=1e-4)
        worst = max(worst, r.rel_residual)
    ok = worst <= 1e-4
    report(capsys, 7, ok, f"50 polynomial triples, max rel_residual {worst:.1e}")
    assert ok


def test_criterion_08_potential(capsys):
    rng = np.random.default_rng(SEED + 8)
    shapes = ["sin({a}*x1 + {b}*x2)", "exp({a}*x1)*cos({b}*x2)", "{a}*x1^3 - {b}*x1*x2", "sqrt(1 + ({a}*x1)^2) + {b}*x2", "abs({a}*x2) * cos(x1)"]
    g = np.linspace(-1.2, 1.2, 9)
    grid = np.stack(np.meshgrid(g, g), axis=-1).reshape(-1, 2)
    worst = 0.0
    for k in range(10):
        a, b = rng.uniform(0.5, 2, 2)
        f = parse_scalar(shapes[k % len(shapes)].format(a=repr(float(a)), b=repr(float(b))), XY)
        worst = max(worst, check_potential(f, 1.5, grid).diagnostics["max_error"])
    ok = worst <= 1e-6
    report(capsys, 8, ok, f"10 continuous fields on a 9x9 grid, max |d1 Q - f| {worst:.1e}")
    assert ok


def test_criterion_09_mollifier(capsys):
    Y = np.random.default_rng(SEED).uniform(-1, 1, (50, 2))
    lin = parse_scalar("1.5*x1 - 0.25*x2 + 0.5", XY)
    const = parse_scalar("2", XY)
    f = bump_field(2)
    gg = np.linspace(-0.9, 0.9, 37)
    G = np.stack(np.meshgrid(gg, gg), axis=-1).reshape(-1, 2)
    mass_err, repro_err, sup = 0.0, 0.0, []
    for eps in (0.2, 0.1, 0.05):
        M = Mollifier(eps, 2)
        mass_err = max(mass_err, abs(M.mass - 1))
        repro_err = max(repro_err, float(np.max(np.abs(mollify(const, M)(Y) - 2))))
        repro_err = max(repro_err, float(np.max(np.abs(mollify(lin, M)(Y) - lin(Y)))))
        sup.append(float(np.max(np.abs(mollify(f, M, domain=Ball((0.0, 0.0), 1.0))(G) - f(G)))))
    ok = mass_err <= 1e-6 and repro_err <= 1e-6 and sup[0] > sup[1] > sup[2]
    report(capsys, 9, ok, f"mass err {mass_err:.1e}, reproduction err {repro_err:.1e}, bump sup errors " + " > ".join(f"{s:.2e}" for s in sup))
    assert ok


def test_criterion_10_nonretraction(capsys):
    e2 = abs(integrate_volume(bump_field(2), Ball((0.0, 0.0), 1.0)) - math.pi / 8)
    e3 = abs(integrate_volume(bump_field(3), Ball((0.0, 0.0, 0.0), 1.0)) - math.pi / 15)
    T = parse_map(["x1/max(sqrt(x1^2 + x2^2), 1e-6)", "x2/max(sqrt(x1^2 + x2^2), 1e-6)"], XY)
    r = check_nonretraction(screen_candidate(T), tol=1e-10)
    L = r.diagnostics["ball_integral_L"]
    ok = e2 <= 1e-6 and e3 <= 1e-6 and L > 0.39 and abs(r.lhs) <= 1e-10 and r.diagnostics["contradiction"]
    report(capsys, 10, ok, f"bump integrals err {e2:.1e} (m=2), {e3:.1e} (m=3); L={L:.6f}, |R|={abs(r.lhs):.1e}, contradiction={r.diagnostics['contradiction']}")
    assert ok


def test_criterion_11_ball_exhaustion(capsys):
    f, phi, omega, D = polar_case()
    centers, radii = exhaust_rectangle(omega.lo, omega.hi, min_radius=1e-3)
    cov = coverage(radii, omega.volume())
    balls = disks_to_balls(centers, radii)
    r = ball_exhaustion_check(f, phi, omega, D, balls, ball_q=QuadScheme(gauss_order=8, subdivisions=1))
    gap = r.rhs - r.lhs
    ok = cov >= 0.99 and 0 <= gap <= 0.02 * r.rhs
    report(capsys, 11, ok, f"{len(balls)} disjoint balls cover {cov:.4%} of omega; gap {gap:.3e} = {gap / r.rhs:.3%} of int_D f")
    assert ok


def test_criterion_12_reparametrization(capsys):
    f2 = parse_scalar("exp(x1)*x2^2 + x1", XY)
    F2 = parse_map(["x1^3 + x2", "x1*x2^2"], XY)
    disk = Ball((0.0, 0.0), 1.0)
    base = ParamSurface(parse_map(["cos(u1)", "sin(u1)"], ["u1"]), (0.0,), (2 * math.pi,))
    scaled = ParamSurface(parse_map(["cos(2*u1)", "sin(2*u1)"], ["u1"]), (0.0,), (math.pi,))
    rev = ParamSurface(parse_map(["cos(-u1)", "sin(-u1)"], ["u1"]), (0.0,), (2 * math.pi,))
    diffs = []
    ref_i, ref_f = integrate_surface(f2, base), flux(F2, base.__class__(base.chart, base.lo, base.hi, orient_outward(base, disk)))
    for S in (scaled, rev):
        S = S.__class__(S.chart, S.lo, S.hi, orient_outward(S, disk))
        diffs.append(abs(integrate_surface(f2, S) - ref_i))
        diffs.append(abs(flux(F2, S) - ref_f))
    # the sphere chart with both angles rescaled, and with the azimuth reversed
    f3 = parse_scalar("x3^2 + x1*x2 + exp(x2)", XYZ)
    F3 = parse_map(["x1*x3^2", "x2 + x1", "x3^3"], XYZ)
    ball = Ball((0.0, 0.0, 0.0), 1.0)
    (sph,) = boundary(ball).pieces
    ref_i3, ref_f3 = integrate_surface(f3, sph), flux(F3, sph)
    u = ("u1", "u2")
    chart, _, _ = sphere_chart((0.0, 0.0, 0.0), 1.0)
    srcs = [str(c) for c in chart.components]
    sub = lambda s, a, b: s.replace("u1", "(U1)").replace("u2", "(U2)").replace("U1", a).replace("U2", b)  # noqa: E731
    variants = [
        (parse_map([sub(s, "2*u1", "3*u2") for s in srcs], u), (0.0, 0.0), (math.pi / 2, 2 * math.pi / 3)),
        (parse_map([sub(s, "u1", "-u2") for s in srcs], u), (0.0, 0.0), (math.pi, 2 * math.pi)),
    ]
    for ch, lo, hi in variants:
        S = ParamSurface(ch, lo, hi)
        S = ParamSurface(ch, lo, hi, orient_outward(S, ball))
        diffs.append(abs(integrate_surface(f3, S) - ref_i3))
        diffs.append(abs(flux(F3, S) - ref_f3))
    ok = max(diffs) <= 1e-8
    report(capsys, 12, ok, f"{len(diffs)} rescaled/reversed comparisons, max difference {max(diffs):.1e}")
    assert ok


def test_criterion_13_monte_carlo_oracle(capsys):
    q = QuadScheme()
    rows = []

    def compare(label, g, D):
        exact = integrate_volume(g, D, q)
        mean, se = mc_estimate(g, D, MC_SAMPLES, SEED)
        rows.append((label, abs(exact - mean) / se if se > 0 else (0.0 if abs(exact - mean) <= 1e-9 * max(1, abs(exact)) else math.inf)))

    # criterion 1 has no volume integrals; its balls' volumes are checked here
    for m in (2, 3, 4):
        compare(f"ball{m}", parse_scalar("1", coord_names(m)), Ball((0.0,) * m, 1.0))
    for label, F, D in divergence_pairs():
        compare(label, lambda X, F=F: divergence(F, X, q.diff), D)
    for k, (f, phi, omega, D) in enumerate([polar_case(), spherical_case()] + affine_cases()):
        compare(f"cov{k}_D", f, D)
        compare(f"cov{k}_omega", lambda X, f=f, phi=phi: f(phi(X)) * np.abs(jacobian_det(phi, X, q.diff)), omega)
    worst = max(rows, key=lambda r: r[1])
    ok = worst[1] <= 4.0
    report(capsys, 13, ok, f"{len(rows)} volume integrals vs {MC_SAMPLES:.0e}-sample Monte Carlo, worst {worst[1]:.2f} stderr ({worst[0]})")
    assert ok


def test_criterion_14_determinism(capsys, tmp_path, monkeypatch):
    outs = []
    for k, threads in enumerate(("1", "1", "3")):
        monkeypatch.setenv("HYPERFLUX_THREADS", threads)
        run_scenario("polar_disk", tmp_path / str(k), seed=11, fixed_clock=True)
        outs.append((tmp_path / str(k) / "report.json").read_bytes())
    ok = outs[0] == outs[1] == outs[2]
    report(capsys, 14, ok, "polar_disk twice with seed 11 (and once more with 3 threads): report.json byte-identical" if ok else "report.json differs between runs")
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
