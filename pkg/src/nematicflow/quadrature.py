"""Quadrature rules on reference simplices.

Production assembly uses Grundmann-Moller rules, which exist for every odd
degree in every dimension and are generated from an explicit combinatorial
formula (no hand-typed tables).  Weights are computed with exact rational
arithmetic before conversion to float.  The independent high-order rules used
by the test oracles live in ``testsupport`` and are built by a different
construction (conical Gauss-Jacobi products).
"""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache
from itertools import combinations_with_replacement
from math import factorial

import numpy as np


def _compositions(total: int, parts: int):
    """All tuples of `parts` nonnegative integers summing to `total`."""
    for cuts in combinations_with_replacement(range(total + 1), parts - 1):
        beta = []
        prev = 0
        for c in cuts:
            beta.append(c - prev)
            prev = c
        beta.append(total - prev)
        yield tuple(beta)


@lru_cache(maxsize=None)
def simplex_rule(dim: int, degree: int) -> tuple[np.ndarray, np.ndarray]:
    """Return (points, weights) exact for polynomials up to `degree`.

    Points are barycentric coordinates, shape (npts, dim+1); weights sum to 1
    so that  int_K f dx  ~=  vol(K) * sum_q w_q f(x_q).
    """
    if dim not in (1, 2, 3):
        raise ValueError(f"unsupported simplex dimension {dim}")
    if degree < 0:
        raise ValueError("degree must be nonnegative")
    s = max(0, -(-(degree - 1) // 2))  # smallest s with 2s+1 >= degree
    d = 2 * s + 1
    n = dim

    points = []
    weights = []
    for i in range(s + 1):
        denom = d + n - 2 * i
        coeff = (
            Fraction((-1) ** i)
            * Fraction(denom**d, 4**s)
            / (factorial(i) * factorial(d + n - i))
        )
        # normalize against the unit-simplex volume 1/n!
        coeff *= factorial(n)
        for beta in _compositions(s - i, n + 1):
            points.append([Fraction(2 * b + 1, denom) for b in beta])
            weights.append(coeff)

    pts = np.array([[float(c) for c in p] for p in points])
    wts = np.array([float(w) for w in weights])
    pts.setflags(write=False)
    wts.setflags(write=False)
    return pts, wts


def physical_points(bary: np.ndarray, cell_coords: np.ndarray) -> np.ndarray:
    """Map barycentric points onto cells.

    cell_coords has shape (ncells, dim+1, dim); result (ncells, nq, dim).
    """
    return np.einsum("qv,cvd->cqd", bary, cell_coords)
