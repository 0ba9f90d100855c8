"""Shared helpers and independent oracles for the test suite."""

import numpy as np

from facered import algebra as al

# block kinds exercised across the suites
SYM_SIZES = (2, 3, 5, 8)
SPIN_SIZES = (2, 3, 6)
ORTHANT_SIZES = (1, 4)


def all_block_specs():
    specs = []
    for n in SYM_SIZES:
        specs.append(al.make_spec(al.sym_block(n)))
    for n in SPIN_SIZES:
        specs.append(al.make_spec(al.spin_block(n)))
    for n in ORTHANT_SIZES:
        specs.append(al.make_spec(al.orthant_block(n)))
    return specs


def random_element(spec, rng):
    return al.element(spec, rng.standard_normal(spec.dim))


def random_square(spec, rng):
    x = random_element(spec, rng)
    return al.jordan_product(x, x)


def eig2x2(a, b, c):
    """Characteristic-polynomial eigensystem of [[a, b], [b, c]].

    Independent oracle: the quadratic formula for the eigenvalues and a
    direct null-vector construction for the eigenvectors.
    """
    mean = 0.5 * (a + c)
    disc = np.sqrt(0.25 * (a - c) ** 2 + b * b)
    lam1, lam2 = mean + disc, mean - disc
    if abs(b) > 1e-300:
        v1 = np.array([lam1 - c, b])
        v2 = np.array([lam2 - c, b])
    else:
        v1 = np.array([1.0, 0.0]) if a >= c else np.array([0.0, 1.0])
        v2 = np.array([0.0, 1.0]) if a >= c else np.array([1.0, 0.0])
    v1 = v1 / np.linalg.norm(v1)
    v2 = v2 / np.linalg.norm(v2)
    return (lam1, v1), (lam2, v2)


def bisect_generalized_eigenvalue(spec, d, x, lo=-1e6, hi=1e6, iters=200):
    """Bisection oracle for inf { t : x - t d not in K }."""
    from facered.conegeom import lambda_min

    def inside(t):
        return lambda_min(al.element(spec, x.coords - t * d.coords)) >= -1e-12

    if not inside(lo):
        raise AssertionError("bisection bracket too small")
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if inside(mid):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
