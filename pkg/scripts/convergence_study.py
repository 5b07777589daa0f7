"""Error of volume, surface and flux integrals against the Gauss order.

Prints a table for a handful of exact reference integrals so the quadrature
defaults can be judged, and the finite-difference Jacobian error against the
relative step.
"""

import argparse
import math

import numpy as np

from hyperflux.diff import DiffConfig, jacobian
from hyperflux.expr import parse_map, parse_scalar
from hyperflux.geom import Ball, Graph, boundary
from hyperflux.quad import QuadScheme, flux, integrate_surface, integrate_volume

XY = ["x1", "x2"]
XYZ = ["x1", "x2", "x3"]

CASES = [
    ("disk area", lambda q: integrate_volume(parse_scalar("1", XY), Ball((0.0, 0.0), 1.0), q), math.pi),
    ("ball |x|^2", lambda q: integrate_volume(parse_scalar("x1^2+x2^2+x3^2", XYZ), Ball((0.0,) * 3, 1.0), q), 4 * math.pi / 5),
    (
        "graph exp",
        lambda q: integrate_volume(
            parse_scalar("exp(x2)", XY), Graph(2, (0.0,), (1.0,), parse_scalar("0", ["x1"]), parse_scalar("x1^2", ["x1"])), q
        ),
        # int_0^1 (exp(x^2) - 1) dx
        1.4626517459071816 - 1.0,
    ),
    ("sphere area", lambda q: integrate_surface(parse_scalar("1", XYZ), boundary(Ball((0.0,) * 3, 1.0)), q), 4 * math.pi),
    ("S^3 area", lambda q: integrate_surface(parse_scalar("1", ["x1", "x2", "x3", "x4"]), boundary(Ball((0.0,) * 4, 1.0)), q), 2 * math.pi**2),
    ("sphere flux x", lambda q: flux(parse_map(XYZ, XYZ), boundary(Ball((0.0,) * 3, 1.0)), q), 4 * math.pi),
]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--orders", type=int, nargs="+", default=[2, 4, 8, 12, 16, 24])
    ap.add_argument("--subdivisions", type=int, default=4)
    args = ap.parse_args()

    print("relative error by Gauss order (subdivisions=%d)" % args.subdivisions)
    print(f"{'case':16s}" + "".join(f"{g:>10d}" for g in args.orders))
    for label, fn, exact in CASES:
        errs = [abs(fn(QuadScheme(gauss_order=g, subdivisions=args.subdivisions)) - exact) / abs(exact) for g in args.orders]
        print(f"{label:16s}" + "".join(f"{e:10.1e}" for e in errs))

    print("\nJacobian error of (sin(x1) x2, exp(x1 x2)) at (0.7, -0.3) by relative step")
    phi = parse_map(["sin(x1)*x2", "exp(x1*x2)"], XY)
    x = np.array([0.7, -0.3])
    exact = np.array([[math.cos(0.7) * -0.3, math.sin(0.7)], [-0.3 * math.exp(-0.21), 0.7 * math.exp(-0.21)]])
    for step in (1e-2, 1e-3, 1e-4, 6e-6, 1e-7, 1e-9):
        err = np.max(np.abs(jacobian(phi, x, DiffConfig(rel_step=step)) - exact))
        print(f"  h={step:7.0e}  max error {err:.2e}")


if __name__ == "__main__":
    main()
