"""Small numeric kernels shared by the geometry and quadrature layers.

Determinants are expanded over permutations instead of calling LAPACK:
the matrices involved are tiny (at most the region dimension) and the
expansion keeps every reduction order fixed, which is what makes reports
bit-reproducible and independent of thread counts.

``zw_mul`` is the guarded product used on cube faces: a factor that is
exactly 0.0 wins over a nan/inf partner.  Collapsed bounds produce exact
zeros in the Jacobian columns while the bound derivatives blow up there;
the zero factor is what the limit value actually is, so the product is
pinned to it.  Away from exact zeros nan propagates untouched.
"""

from __future__ import annotations

import itertools
import math
from functools import lru_cache
from typing import Sequence, Union

import numpy as np

ArrayLike = Union[float, np.ndarray]


@lru_cache(maxsize=None)
def gauss_legendre_01(points: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes/weights on (0, 1); nodes strictly interior."""
    nodes, weights = np.polynomial.legendre.leggauss(points)
    nodes = (nodes + 1.0) / 2.0
    weights = weights / 2.0
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


@lru_cache(maxsize=None)
def composite_axis_rule(points: int, cells: int) -> tuple[np.ndarray, np.ndarray]:
    """Composite rule on (0, 1): ``cells`` equal cells, ``points`` nodes each.

    Nodes ascend globally (cell by cell), so lexicographic tensor
    iteration is well defined.
    """
    base_nodes, base_weights = gauss_legendre_01(points)
    width = 1.0 / cells
    nodes = np.concatenate([(i + base_nodes) * width for i in range(cells)])
    weights = np.tile(base_weights * width, cells)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


@lru_cache(maxsize=None)
def signed_permutations(d: int) -> tuple[tuple[tuple[int, ...], float], ...]:
    out = []
    for perm in itertools.permutations(range(d)):
        inversions = sum(
            1 for a in range(d) for b in range(a + 1, d) if perm[a] > perm[b]
        )
        out.append((perm, -1.0 if inversions % 2 else 1.0))
    return tuple(out)


def zw_mul(a: ArrayLike, b: ArrayLike) -> ArrayLike:
    """Product where an exact 0.0 factor annihilates nan/inf in the other."""
    with np.errstate(all="ignore"):
        raw = np.multiply(a, b)
    zero = np.equal(a, 0.0) | np.equal(b, 0.0)
    if np.ndim(raw) == 0:
        return 0.0 if zero else float(raw)
    return np.where(zero, 0.0, raw)


def perm_det(rows: Sequence[Sequence[ArrayLike]], *, guarded: bool = False) -> ArrayLike:
    """Determinant of a small matrix of scalars/arrays (elementwise).

    ``rows[i][j]`` may be a float or an array; arrays are combined
    elementwise.  With ``guarded`` the permutation products use
    :func:`zw_mul`, so terms with an exact-zero factor vanish even if
    another factor is non-finite.
    """
    d = len(rows)
    if d == 0:
        return 1.0
    total: ArrayLike | None = None
    for perm, sign in signed_permutations(d):
        term: ArrayLike = rows[0][perm[0]]
        for i in range(1, d):
            factor = rows[i][perm[i]]
            term = zw_mul(term, factor) if guarded else np.multiply(term, factor)
        term = np.multiply(sign, term)
        total = term if total is None else np.add(total, term)
    return total


def exact_sum(values) -> float:
    """Exactly rounded sum (partition- and order-independent)."""
    if isinstance(values, np.ndarray):
        return math.fsum(values.tolist())
    return math.fsum(values)
