"""Ball exhaustion of the polar rectangle (0,1) x (0,2pi).

Packs the rectangle with disjoint disks for a sequence of minimum radii and
shows that the sum of per-ball change-of-variables integrals of f = 1
approaches the disk area from below as the coverage goes to one.
"""

import argparse
import math
import time

from hyperflux.expr import parse_map, parse_scalar
from hyperflux.geom import Ball, Box
from hyperflux.packing import coverage, disks_to_balls, exhaust_rectangle
from hyperflux.quad import QuadScheme
from hyperflux.theorems import ball_exhaustion_check


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--radii", type=float, nargs="+", default=[3e-2, 1e-2, 3e-3, 1e-3])
    ap.add_argument("--field", default="1", help="integrand f(x1, x2) on the disk")
    args = ap.parse_args()

    xy = ["x1", "x2"]
    f = parse_scalar(args.field, xy)
    phi = parse_map(["x1*cos(x2)", "x1*sin(x2)"], xy)
    omega = Box((0.0, 0.0), (1.0, 2 * math.pi))
    disk = Ball((0.0, 0.0), 1.0)

    print(f"{'min_radius':>10} {'balls':>7} {'coverage':>9} {'sum over balls':>15} {'int_D f':>12} {'gap/int':>9} {'secs':>6}")
    for r in args.radii:
        t0 = time.perf_counter()
        centers, radii = exhaust_rectangle(omega.lo, omega.hi, min_radius=r)
        balls = disks_to_balls(centers, radii)
        rep = ball_exhaustion_check(f, phi, omega, disk, balls, ball_q=QuadScheme(gauss_order=8, subdivisions=1))
        gap = (rep.rhs - rep.lhs) / abs(rep.rhs)
        print(
            f"{r:10.0e} {len(balls):7d} {coverage(radii, omega.volume()):9.4%} {rep.lhs:15.10f} {rep.rhs:12.10f} "
            f"{gap:9.3%} {time.perf_counter() - t0:6.2f}"
        )


if __name__ == "__main__":
    main()
