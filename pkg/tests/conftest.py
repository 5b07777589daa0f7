import itertools
import math

import numpy as np
import pytest

from hyperflux.expr import parse_map, parse_scalar
from hyperflux.geom import coord_names


def random_poly_source(rng, names, degree, n_terms=4, integer=False):
    """Random polynomial text over ``names`` with total degree <= degree."""
    monos = [e for e in itertools.product(range(degree + 1), repeat=len(names)) if sum(e) <= degree]
    pick = rng.choice(len(monos), size=min(n_terms, len(monos)), replace=False)
    terms = []
    for k in pick:
        c = int(rng.integers(-3, 4)) if integer else round(float(rng.uniform(-1, 1)), 3)
        factors = [f"{n}^{p}" if p > 1 else n for n, p in zip(names, monos[k]) if p]
        terms.append("*".join([f"({c})"] + factors))
    return " + ".join(terms) if terms else "0"


def random_poly_map(rng, m, degree, n_terms=4):
    names = coord_names(m)
    return parse_map([random_poly_source(rng, names, degree, n_terms) for _ in range(m)], names)


def random_poly(rng, m, degree, n_terms=4):
    names = coord_names(m)
    return parse_scalar(random_poly_source(rng, names, degree, n_terms), names)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def polar():
    return parse_map(["x1*cos(x2)", "x1*sin(x2)"], ["x1", "x2"])


TWO_PI = 2 * math.pi
