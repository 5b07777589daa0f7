import json
import math
from importlib import resources

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hyperflux.cli import parse_scenario
from hyperflux.expr import parse_map, parse_scalar
from hyperflux.geom import Ball, Box, Graph, ParamSurface, boundary
from hyperflux.quad import (
    Mollifier,
    NonFiniteError,
    QuadScheme,
    ball_integrals,
    composite_rule,
    flux,
    gauss_legendre,
    integrate_surface,
    integrate_volume,
    mc_estimate,
    mollify,
    tensor_rule,
)
from hyperflux.retract import bump_field

XY = ["x1", "x2"]
XYZ = ["x1", "x2", "x3"]


@pytest.mark.parametrize("g", [2, 4, 8])
def test_gauss_exact_to_degree(g):
    x, w = gauss_legendre(g)
    for d in range(2 * g):
        exact = 0.0 if d % 2 else 2.0 / (d + 1)
        assert np.sum(w * x**d) == pytest.approx(exact, abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.floats(-5, 5), st.floats(0.1, 4), st.integers(1, 5))
def test_composite_rule_integrates_cubics(a, width, sub):
    t, w = composite_rule(a, a + width, 2, sub)
    b = a + width
    assert np.sum(w * t**3) == pytest.approx((b**4 - a**4) / 4, rel=1e-12, abs=1e-12)


def test_composite_rule_array_endpoints():
    t, w = composite_rule(np.zeros(3), np.array([1.0, 2.0, 3.0]), 4, 2)
    assert t.shape == w.shape == (3, 8)
    np.testing.assert_allclose(w.sum(axis=1), [1, 2, 3])


def test_tensor_rule_volume():
    X, W = tensor_rule((0, -1, 2), (1, 1, 5), 3, 2)
    assert X.shape == (6**3, 3)
    assert W.sum() == pytest.approx(6.0)


def test_scheme_validation():
    for bad in ({"gauss_order": 1}, {"subdivisions": 0}, {"rel_tol": 0.0}):
        with pytest.raises(ValueError):
            QuadScheme(**bad)


def test_unit_cube_volume():
    assert integrate_volume(parse_scalar("1", XYZ), Box((0.0,) * 3, (1.0,) * 3)) == pytest.approx(1.0, abs=1e-14)


def test_unit_disk_area():
    assert integrate_volume(parse_scalar("1", XY), Ball((0.0, 0.0), 1.0)) == pytest.approx(math.pi, abs=1e-8)


@pytest.mark.parametrize("m", [1, 2, 3, 4, 5])
def test_ball_volumes(m):
    names = [f"x{i}" for i in range(1, m + 1)]
    exact = math.pi ** (m / 2) / math.gamma(m / 2 + 1) * 0.7**m
    got = integrate_volume(parse_scalar("1", names), Ball(tuple([0.3] * m), 0.7), QuadScheme(gauss_order=8, subdivisions=2))
    assert got == pytest.approx(exact, rel=1e-10)


def test_ball_second_moment():
    # integral of |x|^2 over the unit ball in R^3 is 4 pi / 5
    got = integrate_volume(parse_scalar("x1^2 + x2^2 + x3^2", XYZ), Ball((0.0, 0.0, 0.0), 1.0))
    assert got == pytest.approx(4 * math.pi / 5, rel=1e-12)


def test_graph_iterated_integral():
    D = Graph(2, (0.0,), (1.0,), parse_scalar("0", ["x1"]), parse_scalar("x1", ["x1"]))
    assert integrate_volume(parse_scalar("x2", XY), D) == pytest.approx(1 / 6, abs=1e-14)


def test_graph_axis_one_3d():
    # {0 < x1 < x2 + x3, (x2, x3) in [0,1]^2}; integral of x1 is
    # int (x2+x3)^2/2 = 7/12
    D = Graph(1, (0.0, 0.0), (1.0, 1.0), parse_scalar("0", ["x2", "x3"]), parse_scalar("x2 + x3", ["x2", "x3"]))
    assert integrate_volume(parse_scalar("x1", XYZ), D) == pytest.approx(7 / 12, abs=1e-13)


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        integrate_volume(parse_scalar("1", XYZ), Box((0.0, 0.0), (1.0, 1.0)))


def test_nonfinite_integrand():
    with pytest.raises(NonFiniteError):
        integrate_volume(parse_scalar("1/(x1 - 0.5)", ["x1"]), Box((0.0,), (1.0,)), QuadScheme(gauss_order=3, subdivisions=1))


def test_ball_integrals_batched():
    f = parse_scalar("x1^2 + x2", XY)
    centers = np.array([[0.0, 0.0], [1.0, -2.0], [0.3, 0.4]])
    radii = np.array([1.0, 0.5, 0.1])
    batch = ball_integrals(f, centers, radii)
    single = [integrate_volume(f, Ball(tuple(c), r)) for c, r in zip(centers, radii)]
    np.testing.assert_allclose(batch, single, rtol=1e-12)


def _circle():
    return ParamSurface(parse_map(["cos(u1)", "sin(u1)"], ["u1"]), (0.0,), (2 * math.pi,), label="circle")


def test_circle_length():
    assert integrate_surface(parse_scalar("1", XY), _circle()) == pytest.approx(2 * math.pi, abs=1e-8)


def test_sphere_area_and_moment():
    sigma = boundary(Ball((0.0, 0.0, 0.0), 1.0))
    assert integrate_surface(parse_scalar("1", XYZ), sigma) == pytest.approx(4 * math.pi, abs=1e-6)
    assert integrate_surface(parse_scalar("x3^2", XYZ), sigma) == pytest.approx(4 * math.pi / 3, abs=1e-6)


def test_fluxes():
    F = parse_map(["x1", "x2"], XY)
    circle = boundary(Ball((0.0, 0.0), 1.0))
    assert flux(F, circle) == pytest.approx(2 * math.pi, abs=1e-8)
    const = parse_map(["0", "0", "1"], XYZ)
    assert flux(const, boundary(Box((0.0, 0.0, 0.0), (1.0, 2.0, 0.5)))) == pytest.approx(0.0, abs=1e-12)
    assert flux(parse_map(XYZ, XYZ), boundary(Ball((0.0, 0.0, 0.0), 1.0))) == pytest.approx(4 * math.pi, abs=1e-6)


def test_flux_rescaled_pieces_agree():
    F = parse_map(["x1^3 + x2", "x2*x1^2"], XY)
    a = flux(F, _circle())
    scaled = ParamSurface(parse_map(["cos(3*u1)", "sin(3*u1)"], ["u1"]), (0.0,), (2 * math.pi / 3,))
    assert flux(F, scaled) == pytest.approx(a, abs=1e-8)


def test_box_surface_area_closed_form():
    assert integrate_surface(parse_scalar("1", XYZ), boundary(Box((0.0, 0.0, 0.0), (2.0, 3.0, 0.5)))) == pytest.approx(2 * (6 + 1 + 1.5), abs=1e-10)


def test_thread_count_does_not_change_sums(monkeypatch):
    f = parse_scalar("sin(7*x1)*x2^3 + exp(x3)", XYZ)
    D = Ball((0.1, 0.0, -0.2), 1.3)
    q = QuadScheme(gauss_order=20, subdivisions=3)
    monkeypatch.setenv("HYPERFLUX_THREADS", "1")
    one = integrate_volume(f, D, q)
    monkeypatch.setenv("HYPERFLUX_THREADS", "4")
    four = integrate_volume(f, D, q)
    assert one == four


# -- mollifier --------------------------------------------------------------


@pytest.mark.parametrize("dim, eps", [(1, 0.3), (2, 0.2), (2, 0.05), (3, 0.1)])
def test_mollifier_mass(dim, eps):
    M = Mollifier(eps, dim)
    assert abs(M.mass - 1.0) <= 1e-6
    assert M.weights.sum() == pytest.approx(1.0, abs=1e-12)
    assert M(np.array([[eps] + [0.0] * (dim - 1), [eps * 0.8] * dim])).tolist()[0] == 0.0


def test_mollify_reproduces_constants_and_linears():
    M = Mollifier(0.2, 2)
    Y = np.random.default_rng(5).uniform(-1, 1, (40, 2))
    const = mollify(parse_scalar("3.25", XY), M)
    np.testing.assert_allclose(const(Y), 3.25, atol=1e-6)
    lin = parse_scalar("2*x1 - 0.5*x2 + 1", XY)
    np.testing.assert_allclose(mollify(lin, M)(Y), lin(Y), atol=1e-6)


def test_mollified_bump_converges():
    f = bump_field(2)
    g = np.linspace(-0.9, 0.9, 41)
    Y = np.stack(np.meshgrid(g, g), axis=-1).reshape(-1, 2)
    errs = []
    for eps in (0.2, 0.1, 0.05):
        fe = mollify(f, Mollifier(eps, 2), domain=Ball((0.0, 0.0), 1.0))
        errs.append(float(np.max(np.abs(fe(Y) - f(Y)))))
    assert errs[0] > errs[1] > errs[2]


def test_mollifier_clamps_outside_domain():
    f = parse_scalar("sqrt(1 - x1^2)", ["x1"])
    D = Box((-1.0,), (1.0,))
    fe = mollify(f, Mollifier(0.1, 1), domain=D)
    assert np.isfinite(fe(np.array([0.99])))


# -- Monte Carlo ------------------------------------------------------------


def test_mc_disk():
    mean, se = mc_estimate(parse_scalar("1", XY), Ball((0.0, 0.0), 1.0), 10**6, seed=0)
    assert abs(mean - math.pi) <= 4 * se


def test_mc_box_exact_volume():
    mean, se = mc_estimate(parse_scalar("1", XYZ), Box((0.0, 0.0, 0.0), (1.0, 2.0, 0.5)), 5000, seed=3)
    assert mean == pytest.approx(1.0, abs=1e-12) and se == pytest.approx(0.0, abs=1e-12)


def test_mc_odd_symmetry():
    mean, se = mc_estimate(parse_scalar("x1", XY), Box((-1.0, -1.0), (1.0, 1.0)), 10**5, seed=9)
    assert abs(mean) <= 4 * se


def test_mc_deterministic():
    f = parse_scalar("x1*x2 + 1", XY)
    D = Ball((0.0, 0.0), 1.0)
    assert mc_estimate(f, D, 20000, 42) == mc_estimate(f, D, 20000, 42)
    assert mc_estimate(f, D, 20000, 42) != mc_estimate(f, D, 20000, 43)
    with pytest.raises(ValueError):
        mc_estimate(f, D, 999, 0)


def _shipped_volume_cases():
    root = resources.files("hyperflux") / "scenarios"
    for p in sorted(root.iterdir(), key=lambda p: p.name):
        sc = parse_scenario(json.loads(p.read_text()))
        for dname, D in sc.domains.items():
            fields = [("one", parse_scalar("1", [f"x{i}" for i in range(1, sc.m + 1)]))] + list(sc.exprs.items())
            for fname, f in fields:
                yield pytest.param(f, D, id=f"{sc.name}-{dname}-{fname}")


@pytest.mark.parametrize("f, D", list(_shipped_volume_cases()))
def test_quadrature_agrees_with_mc_on_shipped_domains(f, D):
    q = QuadScheme(gauss_order=12, subdivisions=3)
    exact = integrate_volume(f, D, q)
    mean, se = mc_estimate(f, D, 200_000, seed=7)
    assert abs(exact - mean) <= 4 * se + 1e-12
