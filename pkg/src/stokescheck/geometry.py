"""Regions built from chained inequalities, and their cube parametrization.

A :class:`NormalSet` in dimension k is the set of points satisfying

    f_1 <= x_1 <= g_1,  f_2(x_1) <= x_2 <= g_2(x_1),  ...,
    f_k(x_1..x_{k-1}) <= x_k <= g_k(x_1..x_{k-1})

with constant first bounds.  Axis order is fixed: callers must pre-order
variables so that each bound only reads earlier coordinates.  The unit
cube maps onto the set through the recursive convex interpolation

    c_j(t_1..t_j) = (1 - t_j) f_j(c_1..c_{j-1}) + t_j g_j(c_1..c_{j-1})

whose Jacobian is lower triangular with (g_j - f_j) on the diagonal.
A :class:`RegularSet` is a finite union of equal-dimension pieces with
pairwise disjoint interiors (checked by sampling only; genuinely the
scenario author's responsibility).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Mapping, Sequence, Union

import numpy as np

from . import expr
from .errors import DomainError, EvaluationError, ScenarioError
from .expr import Expression
from .numeric import zw_mul

__all__ = [
    "NormalSet",
    "RegularSet",
    "Face",
    "cube_param",
    "cube_param_jacobian",
    "face_param",
    "contains",
    "shrink",
    "cube_param_invert",
]

ArrayLike = Union[float, np.ndarray]

_BOUND_SAMPLES = 128
_DERIVATIVE_WARN_THRESHOLD = 1e12


def _xname(i: int) -> str:
    return f"x{i}"


@dataclass(frozen=True)
class Face:
    """One cube face: parameter ``t_axis`` frozen at 0 (bottom) or 1 (top)."""

    axis: int  # 1-based
    side: Literal["top", "bottom"]

    def __post_init__(self):
        if self.axis < 1:
            raise ScenarioError(f"face axis must be >= 1, got {self.axis}")
        if self.side not in ("top", "bottom"):
            raise ScenarioError(f"face side must be 'top' or 'bottom', got {self.side!r}")

    @property
    def t_value(self) -> float:
        return 1.0 if self.side == "top" else 0.0


class NormalSet:
    """Chained-inequality region; immutable after construction.

    Parameters
    ----------
    bounds:
        k pairs ``(lower, upper)`` of expressions; pair i may only read
        variables ``x1 .. x{i-1}`` and the first pair must be constant.
    """

    def __init__(self, bounds: Sequence[tuple[Expression, Expression]]):
        bounds = tuple((lo, hi) for lo, hi in bounds)
        if len(bounds) < 1:
            raise ScenarioError("a normal set needs at least one bound pair")
        self.bounds = bounds
        self.k = len(bounds)
        allowed: set[str] = set()
        for i, (lo, hi) in enumerate(bounds, start=1):
            for which, e in (("lower", lo), ("upper", hi)):
                extra = expr.free_variables(e) - allowed
                if extra:
                    raise ScenarioError(
                        f"{which} bound of axis {i} may only depend on "
                        f"x1..x{i - 1}, found {sorted(extra)}"
                    )
            allowed.add(_xname(i))
        # cached symbolic partials: d bound_j / d x_i for i < j
        self._dlower = tuple(
            tuple(expr.differentiate(lo, _xname(i + 1)) for i in range(j))
            for j, (lo, _) in enumerate(bounds)
        )
        self._dupper = tuple(
            tuple(expr.differentiate(hi, _xname(i + 1)) for i in range(j))
            for j, (_, hi) in enumerate(bounds)
        )
        self.warnings: tuple[str, ...] = tuple(self._sampled_checks())

    def lower(self, j: int) -> Expression:
        """Lower bound of axis j (1-based)."""
        return self.bounds[j - 1][0]

    def upper(self, j: int) -> Expression:
        return self.bounds[j - 1][1]

    def dlower(self, j: int, i: int) -> Expression:
        """d f_j / d x_i, 1-based, i < j."""
        return self._dlower[j - 1][i - 1]

    def dupper(self, j: int, i: int) -> Expression:
        return self._dupper[j - 1][i - 1]

    def _sampled_checks(self) -> list[str]:
        """Sampled f <= g assertion (violation is an error) and a
        bounded-derivative heuristic (warning only)."""
        rng = np.random.default_rng(20259)
        ts = rng.uniform(0.0, 1.0, size=(self.k, _BOUND_SAMPLES))
        warnings: list[str] = []
        env: dict[str, ArrayLike] = {}
        unbounded: set[str] = set()
        for j in range(1, self.k + 1):
            lo = expr.evaluate_array(self.lower(j), env, guarded=True)
            hi = expr.evaluate_array(self.upper(j), env, guarded=True)
            lo_a, hi_a = np.broadcast_arrays(
                np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)
            )
            bad = hi_a - lo_a < -1e-9 * (1.0 + np.abs(hi_a))
            if np.any(bad):
                idx = int(np.argmax(bad))
                raise ScenarioError(
                    f"axis {j}: lower bound exceeds upper bound at a sampled "
                    f"point (lower={lo_a.flat[idx]:.6g}, upper={hi_a.flat[idx]:.6g})"
                )
            for i in range(1, j):
                for name, d in (("lower", self.dlower(j, i)), ("upper", self.dupper(j, i))):
                    vals = np.asarray(
                        expr.evaluate_array(d, env, guarded=True), dtype=float
                    )
                    if np.any(~np.isfinite(vals)) or np.any(
                        np.abs(vals) > _DERIVATIVE_WARN_THRESHOLD
                    ):
                        unbounded.add(f"axis {j} {name} bound w.r.t. x{i}")
            env[_xname(j)] = (1.0 - ts[j - 1]) * lo + ts[j - 1] * hi
        if unbounded:
            warnings.append(
                "bound derivatives look unbounded at sampled interior points "
                f"({', '.join(sorted(unbounded))}); convergence rates are not "
                "guaranteed"
            )
        return warnings

    def __repr__(self):
        pairs = ", ".join(
            f"[{expr.to_string(lo)}, {expr.to_string(hi)}]" for lo, hi in self.bounds
        )
        return f"NormalSet(k={self.k}, {pairs})"


class RegularSet:
    """Finite union of :class:`NormalSet` pieces with equal dimension."""

    def __init__(self, pieces: Sequence[NormalSet]):
        pieces = tuple(pieces)
        if not pieces:
            raise ScenarioError("a regular set needs at least one piece")
        k = pieces[0].k
        for idx, piece in enumerate(pieces):
            if piece.k != k:
                raise ScenarioError(
                    f"piece {idx} has dimension {piece.k}, expected {k}"
                )
        self.pieces = pieces
        self.k = k
        self._check_disjoint_interiors()
        self.warnings = tuple(w for piece in pieces for w in piece.warnings)

    def _check_disjoint_interiors(self, samples: int = 64):
        if len(self.pieces) == 1:
            return
        rng = np.random.default_rng(77003)
        for a, piece in enumerate(self.pieces):
            ts = rng.uniform(0.05, 0.95, size=(samples, piece.k))
            points = [cube_param(piece, t) for t in ts]
            for b, other in enumerate(self.pieces):
                if a == b:
                    continue
                for x in points:
                    if _strictly_inside(other, x):
                        raise ScenarioError(
                            f"pieces {a} and {b} appear to share interior "
                            f"points (sampled {np.array2string(x, precision=6)}); "
                            "normal pieces must have disjoint interiors"
                        )


def _strictly_inside(region: NormalSet, x: Sequence[float]) -> bool:
    env: dict[str, float] = {}
    try:
        for j in range(1, region.k + 1):
            lo = expr.evaluate(region.lower(j), env)
            hi = expr.evaluate(region.upper(j), env)
            xj = float(x[j - 1])
            margin = 1e-12 * (1.0 + abs(xj))
            if not (lo + margin < xj < hi - margin):
                return False
            env[_xname(j)] = xj
    except EvaluationError:
        # bounds undefined there, so the point is outside this piece
        return False
    return True


# ---------------------------------------------------------------------------
# cube parametrization


def chain_values(
    region: NormalSet,
    t: Sequence[ArrayLike],
    *,
    guarded: bool = False,
) -> list[ArrayLike]:
    """Values ``c_1..c_k`` of the cube parametrization at ``t`` (vectorized)."""
    env: dict[str, ArrayLike] = {}
    cs: list[ArrayLike] = []
    for j in range(1, region.k + 1):
        lo = expr.evaluate_array(region.lower(j), env, guarded=guarded)
        hi = expr.evaluate_array(region.upper(j), env, guarded=guarded)
        tj = t[j - 1]
        if guarded:
            cj = np.add(zw_mul(np.subtract(1.0, tj), lo), zw_mul(tj, hi))
        else:
            cj = (1.0 - tj) * lo + tj * hi
        cs.append(cj)
        env[_xname(j)] = cj
    return cs


def chain_jacobian(
    region: NormalSet,
    t: Sequence[ArrayLike],
    columns: Sequence[int] | None = None,
    *,
    guarded: bool = False,
) -> tuple[list[ArrayLike], list[list[ArrayLike]]]:
    """Cube-parametrization values and Jacobian columns.

    Returns ``(c, dc)`` with ``dc[i][m] = d c_{i+1} / d t_{columns[m]}``.
    Structural zeros (entries above the diagonal) stay exact scalars 0.0,
    which is what lets guarded products annihilate non-finite bound
    derivatives on collapsed faces.
    """
    k = region.k
    cols = list(range(1, k + 1)) if columns is None else list(columns)
    env: dict[str, ArrayLike] = {}
    cs: list[ArrayLike] = []
    dcs: list[list[ArrayLike]] = []
    for j in range(1, k + 1):
        lo = expr.evaluate_array(region.lower(j), env, guarded=guarded)
        hi = expr.evaluate_array(region.upper(j), env, guarded=guarded)
        tj = t[j - 1]
        if guarded:
            cj = np.add(zw_mul(np.subtract(1.0, tj), lo), zw_mul(tj, hi))
        else:
            cj = (1.0 - tj) * lo + tj * hi
        row: list[ArrayLike] = []
        for m in cols:
            acc: ArrayLike = 0.0
            for i in range(1, j):
                prev = dcs[i - 1][cols.index(m)]
                if isinstance(prev, float) and prev == 0.0:
                    continue
                dlo = expr.evaluate_array(region.dlower(j, i), env, guarded=guarded)
                dhi = expr.evaluate_array(region.dupper(j, i), env, guarded=guarded)
                if guarded:
                    w = np.add(zw_mul(np.subtract(1.0, tj), dlo), zw_mul(tj, dhi))
                    acc = np.add(acc, zw_mul(w, prev))
                else:
                    acc = acc + ((1.0 - tj) * dlo + tj * dhi) * prev
            if m == j:
                acc = np.add(acc, np.subtract(hi, lo))
            row.append(acc)
        cs.append(cj)
        dcs.append(row)
        env[_xname(j)] = cj
    return cs, dcs


def cube_param(region: NormalSet, t: Sequence[float]) -> np.ndarray:
    """Map a unit-cube point onto the region."""
    t = np.asarray(t, dtype=float)
    if t.shape != (region.k,):
        raise ValueError(f"expected a point in [0,1]^{region.k}, got shape {t.shape}")
    if np.any(t < 0.0) or np.any(t > 1.0):
        raise ValueError("cube parameter components must lie in [0, 1]")
    cs = chain_values(region, list(t))
    return np.array([float(c) for c in cs])


def cube_param_jacobian(region: NormalSet, t: Sequence[float]) -> np.ndarray:
    """k-by-k Jacobian of the cube parametrization at an interior point.

    Entries above the diagonal are exactly zero; diagonal entry j is
    ``(g_j - f_j)`` evaluated at the earlier coordinates.
    """
    t = np.asarray(t, dtype=float)
    _, dcs = chain_jacobian(region, list(t))
    return np.array([[float(v) for v in row] for row in dcs])


def face_param(region: NormalSet, face: Face, s: Sequence[float]) -> np.ndarray:
    """Map a point of the (k-1)-cube onto one face of the region."""
    if not 1 <= face.axis <= region.k:
        raise ScenarioError(f"face axis {face.axis} out of range 1..{region.k}")
    s = np.asarray(s, dtype=float)
    if s.shape != (region.k - 1,):
        raise ValueError(
            f"expected a point in [0,1]^{region.k - 1}, got shape {s.shape}"
        )
    t = np.insert(s, face.axis - 1, face.t_value)
    return cube_param(region, t)


def contains(region: NormalSet, x: Sequence[float]) -> bool:
    """Closed-inequality membership with zero tolerance."""
    x = np.asarray(x, dtype=float)
    if x.shape != (region.k,):
        raise ValueError(f"expected a point in R^{region.k}, got shape {x.shape}")
    env: dict[str, float] = {}
    for j in range(1, region.k + 1):
        lo = expr.evaluate(region.lower(j), env)
        hi = expr.evaluate(region.upper(j), env)
        if not (lo <= x[j - 1] <= hi):
            return False
        env[_xname(j)] = float(x[j - 1])
    return True


def shrink(region: NormalSet, eps: float) -> NormalSet:
    """Inner approximation: bounds pushed inward by ``eps``.

    New bounds are ``min(f_i + eps, g_i)`` and ``max(g_i - eps, that)``,
    so collapsed axes stay collapsed instead of inverting.
    """
    if eps <= 0.0:
        raise ValueError("shrink needs eps > 0")
    e = expr.Const(float(eps))
    new_bounds = []
    for lo, hi in region.bounds:
        lo_eps = expr.minimum(expr.add(lo, e), hi)
        hi_eps = expr.maximum(expr.sub(hi, e), lo_eps)
        new_bounds.append((lo_eps, hi_eps))
    return NormalSet(new_bounds)


def cube_param_invert(
    region: NormalSet, x: Sequence[float], *, degenerate_tol: float = 1e-12
) -> np.ndarray:
    """Recover ``t`` with ``cube_param(region, t) == x``, axis by axis.

    On axes where the bounds have collapsed (``g - f < degenerate_tol``)
    the parameter is arbitrary and set to 0.5.
    """
    x = np.asarray(x, dtype=float)
    env: dict[str, float] = {}
    t = np.empty(region.k)
    for j in range(1, region.k + 1):
        lo = expr.evaluate(region.lower(j), env)
        hi = expr.evaluate(region.upper(j), env)
        span = hi - lo
        t[j - 1] = 0.5 if span < degenerate_tol else (x[j - 1] - lo) / span
        env[_xname(j)] = float(x[j - 1])
    return np.clip(t, 0.0, 1.0)
