"""Disjoint-disk exhaustion of a rectangle.

The rectangle is cut into a row of equal disks tangent to both long sides
plus a leftover rectangle (handled recursively). The curvilinear gaps
between tangent disks and the sides are filled Apollonian style: each gap
bounded by three mutually tangent circles/lines receives its inscribed
circle, which splits it into three smaller gaps. Corners between two
perpendicular sides and a disk get a corner disk first.
"""

from __future__ import annotations

import math

import numpy as np

from .geom import Ball

__all__ = ["exhaust_rectangle", "disks_to_balls", "coverage"]

_CORNER = 3 - 2 * math.sqrt(2)


class _Filler:
    def __init__(self, min_radius, max_disks):
        self.min_radius = min_radius
        self.max_disks = max_disks
        self.disks = []

    def add(self, c, r):
        if len(self.disks) >= self.max_disks:
            raise RuntimeError("disk budget exhausted; raise max_disks or min_radius")
        self.disks.append((complex(c), float(r)))
        return complex(c), float(r)

    # gap between two tangent circles and a line they both touch
    def circle_circle_line(self, A, B, p, nrm, depth=0):
        (ca, ra), (cb, rb) = A, B
        r = 1.0 / (1.0 / math.sqrt(ra) + 1.0 / math.sqrt(rb)) ** 2
        if r < self.min_radius:
            return
        t = nrm * 1j
        sa = ((ca - p) * t.conjugate()).real
        sb = ((cb - p) * t.conjugate()).real
        s = sa + math.copysign(2 * math.sqrt(ra * r), sb - sa)
        C = self.add(p + s * t + r * nrm, r)
        self.circle_circle_circle(A, B, C)
        self.circle_circle_line(A, C, p, nrm)
        self.circle_circle_line(B, C, p, nrm)

    # gap between three mutually tangent circles
    def circle_circle_circle(self, A, B, C):
        (z1, r1), (z2, r2), (z3, r3) = A, B, C
        k1, k2, k3 = 1 / r1, 1 / r2, 1 / r3
        k4 = k1 + k2 + k3 + 2 * math.sqrt(k1 * k2 + k2 * k3 + k3 * k1)
        r = 1 / k4
        if r < self.min_radius:
            return
        root = 2 * np.sqrt(complex(k1 * k2 * z1 * z2 + k2 * k3 * z2 * z3 + k1 * k3 * z1 * z3))
        base = k1 * z1 + k2 * z2 + k3 * z3
        best = None
        for z in ((base + root) / k4, (base - root) / k4):
            err = sum(abs(abs(z - zi) - (ri + r)) for zi, ri in ((z1, r1), (z2, r2), (z3, r3)))
            if best is None or err < best[0]:
                best = (err, z)
        D = self.add(best[1], r)
        self.circle_circle_circle(A, B, D)
        self.circle_circle_circle(B, C, D)
        self.circle_circle_circle(A, C, D)

    # corner at p between walls along unit directions d1, d2 (perpendicular),
    # with circle A tangent to both walls
    def corner(self, A, p, d1, d2):
        ca, ra = A
        r = _CORNER * ra
        if r < self.min_radius:
            return
        C = self.add(p + r * (d1 + d2), r)
        # the wall along d1 has inward normal d2, and vice versa
        self.circle_circle_line(A, C, p, d2)
        self.circle_circle_line(A, C, p, d1)
        self.corner(C, p, d1, d2)

    def rectangle(self, x0, y0, x1, y1):
        w, h = x1 - x0, y1 - y0
        if min(w, h) / 2 < self.min_radius:
            return
        if w >= h:
            d = h
            n = int(w // d)
            along, across = 1 + 0j, 1j
            origin = complex(x0, y0)
        else:
            d = w
            n = int(h // d)
            along, across = 1j, 1 + 0j
            origin = complex(x0, y0)
        R = d / 2
        disks = [self.add(origin + (R + k * d) * along + R * across, R) for k in range(n)]
        far = origin + d * across
        for A, B in zip(disks, disks[1:]):
            self.circle_circle_line(A, B, origin, across)
            self.circle_circle_line(A, B, far, -across)
        end = origin + n * d * along
        self.corner(disks[0], origin, along, across)
        self.corner(disks[0], far, along, -across)
        self.corner(disks[-1], end, -along, across)
        self.corner(disks[-1], end + d * across, -along, -across)
        if w >= h:
            self.rectangle(x0 + n * d, y0, x1, y1)
        else:
            self.rectangle(x0, y0 + n * d, x1, y1)


def exhaust_rectangle(lo, hi, min_radius=1e-3, max_disks=200_000, shrink=1e-9):
    """Disjoint disks inside the rectangle [lo, hi] (2D).

    Returns ``(centers, radii)``. Disks are built mutually tangent and then
    shrunk by the relative factor ``shrink`` so the open disks are strictly
    separated.
    """
    (x0, y0), (x1, y1) = lo, hi
    filler = _Filler(min_radius, max_disks)
    filler.rectangle(float(x0), float(y0), float(x1), float(y1))
    centers = np.array([[c.real, c.imag] for c, _ in filler.disks])
    radii = np.array([r for _, r in filler.disks]) * (1 - shrink)
    return centers, radii


def disks_to_balls(centers, radii):
    return [Ball(tuple(map(float, c)), float(r)) for c, r in zip(centers, radii)]


def coverage(radii, area):
    return float(np.sum(math.pi * np.asarray(radii) ** 2) / area)
