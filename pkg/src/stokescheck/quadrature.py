"""Chart maps, tensor-product Gauss cubature and pullback integrands.

Integration over the unit cube uses a composite tensor-product
Gauss-Legendre rule.  Nodes are strictly interior, so bound and chart
derivatives are never sampled on cube faces, where they may only exist
one-sided.  Summation is exactly rounded (``math.fsum`` per block of the
fixed lexicographic node ordering), which makes results independent of
evaluation order and thread count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np

from . import expr
from .errors import EvaluationError, QuadratureError, ScenarioError
from .expr import Expression
from .forms import DifferentialForm, MultiIndex
from .geometry import NormalSet, chain_jacobian, chain_values
from .numeric import composite_axis_rule, exact_sum, perm_det, zw_mul

__all__ = [
    "QuadratureSpec",
    "ChartMap",
    "integrate_unit_cube",
    "chart_jacobian_through_cube",
    "pullback_integrand",
    "det_B_residual",
]

ArrayLike = Union[float, np.ndarray]

_BLOCK = 1 << 18


def _xname(i: int) -> str:
    return f"x{i}"


@dataclass(frozen=True)
class QuadratureSpec:
    """Tensor-product Gauss-Legendre rule: ``points`` nodes per axis in
    each of ``cells`` equal subdivisions per axis."""

    points: int = 12
    cells: int = 1

    def __post_init__(self):
        if self.points < 1:
            raise ScenarioError(f"points per axis must be >= 1, got {self.points}")
        if self.cells < 1:
            raise ScenarioError(f"cells per axis must be >= 1, got {self.cells}")

    @property
    def nodes_per_axis(self) -> int:
        return self.points * self.cells


class ChartMap:
    """Map from a k-dimensional domain into R^n with symbolic Jacobian."""

    def __init__(self, components: Sequence[Expression], domain_dim: int):
        components = tuple(components)
        if domain_dim < 1:
            raise ScenarioError(f"domain dimension must be >= 1, got {domain_dim}")
        n = len(components)
        if n < domain_dim:
            raise ScenarioError(
                f"chart has {n} components but domain dimension {domain_dim}; "
                "the ambient dimension may not be smaller"
            )
        allowed = {_xname(i) for i in range(1, domain_dim + 1)}
        for i, comp in enumerate(components, start=1):
            bad = expr.free_variables(comp) - allowed
            if bad:
                raise ScenarioError(
                    f"chart component {i} uses variables {sorted(bad)}; "
                    f"only x1..x{domain_dim} are allowed"
                )
        self.components = components
        self.k = domain_dim
        self.n = n
        self._partials = tuple(
            tuple(expr.differentiate(comp, _xname(j)) for j in range(1, domain_dim + 1))
            for comp in components
        )

    @classmethod
    def identity(cls, k: int) -> "ChartMap":
        return cls(tuple(expr.Var(_xname(i)) for i in range(1, k + 1)), k)

    def partial(self, i: int, j: int) -> Expression:
        """d component_i / d x_j (1-based)."""
        return self._partials[i - 1][j - 1]

    def values(self, x_env: dict, *, guarded: bool = False) -> list[ArrayLike]:
        return [
            expr.evaluate_array(comp, x_env, guarded=guarded) for comp in self.components
        ]

    def __repr__(self):
        comps = ", ".join(expr.to_string(c) for c in self.components)
        return f"ChartMap(k={self.k}, n={self.n}, [{comps}])"


def _env_from_values(prefix: str, values: Sequence[ArrayLike]) -> dict:
    return {f"{prefix}{i}": v for i, v in enumerate(values, start=1)}


# ---------------------------------------------------------------------------
# cubature


def integrate_unit_cube(
    f: Callable[[np.ndarray], ArrayLike],
    dim: int,
    spec: QuadratureSpec,
    label: str = "integrand",
) -> float:
    """Integrate ``f`` over the open unit cube of dimension ``dim``.

    ``f`` receives nodes as an array of shape ``(dim, m)`` and must
    return the ``m`` values.  Nodes are visited in lexicographic order
    over (cell, node) per axis and accumulated with exactly rounded
    block sums.  A non-finite value at any node is an error naming the
    node.
    """
    if dim < 1:
        raise ScenarioError(f"integration dimension must be >= 1, got {dim}")
    nodes, weights = composite_axis_rule(spec.points, spec.cells)
    per_axis = len(nodes)
    shape = (per_axis,) * dim
    total = per_axis**dim
    partials: list[float] = []
    for start in range(0, total, _BLOCK):
        flat = np.arange(start, min(start + _BLOCK, total))
        multi = np.unravel_index(flat, shape)
        block_t = np.stack([nodes[ix] for ix in multi])
        block_w = math.prod([weights[ix] for ix in multi])
        values = np.broadcast_to(
            np.asarray(f(block_t), dtype=float), (block_t.shape[1],)
        )
        finite = np.isfinite(values)
        if not np.all(finite):
            offender = int(np.argmax(~finite))
            t_bad = block_t[:, offender]
            raise QuadratureError(
                f"{label} is not finite at node t="
                f"{np.array2string(t_bad, precision=12)} "
                f"(flat index {int(flat[offender])})"
            )
        partials.append(exact_sum(values * block_w))
    return exact_sum(partials)


# ---------------------------------------------------------------------------
# pullback machinery


def chart_jacobian_columns(
    chart: ChartMap,
    region: NormalSet,
    t: Sequence[ArrayLike],
    columns: Sequence[int] | None = None,
    *,
    guarded: bool = False,
) -> tuple[list[ArrayLike], list[ArrayLike], list[list[ArrayLike]]]:
    """Values and selected Jacobian columns of the composed map chart∘c.

    Returns ``(c, y, J)`` where ``J[r][m]`` is the derivative of chart
    component r+1 along cube direction ``columns[m]``, of shape
    broadcastable over the node axis.
    """
    if chart.k != region.k:
        raise ScenarioError(
            f"chart domain dimension {chart.k} != region dimension {region.k}"
        )
    cs, dcs = chain_jacobian(region, t, columns, guarded=guarded)
    x_env = _env_from_values("x", cs)
    ys = chart.values(x_env, guarded=guarded)
    ncols = len(dcs[0]) if dcs else 0
    rows: list[list[ArrayLike]] = []
    for r in range(1, chart.n + 1):
        row: list[ArrayLike] = []
        for m in range(ncols):
            acc: ArrayLike = 0.0
            for i in range(1, region.k + 1):
                dci = dcs[i - 1][m]
                if isinstance(dci, float) and dci == 0.0:
                    continue
                dphi = expr.evaluate_array(
                    chart.partial(r, i), x_env, guarded=guarded
                )
                if guarded:
                    acc = np.add(acc, zw_mul(dphi, dci))
                else:
                    acc = acc + dphi * dci
            row.append(acc)
        rows.append(row)
    return cs, ys, rows


def chart_jacobian_through_cube(
    chart: ChartMap, region: NormalSet, t: Sequence[float]
) -> np.ndarray:
    """n-by-k Jacobian of chart∘c at a single cube point (chain rule with
    symbolic partials on both factors)."""
    t = np.asarray(t, dtype=float)
    _, _, rows = chart_jacobian_columns(chart, region, list(t))
    return np.array([[float(v) for v in row] for row in rows])


def pullback_values(
    form: DifferentialForm,
    chart: ChartMap,
    region: NormalSet,
    t: Sequence[ArrayLike],
    *,
    guarded: bool = False,
) -> ArrayLike:
    """Pullback integrand of a degree-k form at cube nodes (vectorized):
    sum over terms of coefficient at chart(c(t)) times the determinant of
    the Jacobian minor selecting the term's index rows."""
    if form.degree != region.k:
        raise ScenarioError(
            f"pullback over a {region.k}-dimensional region needs a "
            f"degree-{region.k} form, got degree {form.degree}"
        )
    if form.n != chart.n:
        raise ScenarioError(
            f"form ambient dimension {form.n} != chart ambient dimension {chart.n}"
        )
    _, ys, rows = chart_jacobian_columns(chart, region, t, guarded=guarded)
    y_env = _env_from_values("y", ys)
    total: ArrayLike = 0.0
    for term in form.terms:
        minor = [rows[i - 1] for i in term.indices]
        det = perm_det(minor, guarded=guarded)
        coeff = expr.evaluate_array(term.coeff, y_env, guarded=guarded)
        if guarded:
            total = np.add(total, zw_mul(coeff, det))
        else:
            total = np.add(total, np.multiply(coeff, det))
    return total


def pullback_integrand(
    form: DifferentialForm,
    chart: ChartMap,
    region: NormalSet,
    t: Sequence[float],
) -> float:
    """Scalar pullback integrand at one cube point."""
    t = np.asarray(t, dtype=float)
    return float(pullback_values(form, chart, region, list(t)))


# ---------------------------------------------------------------------------
# det-B residual


def _minor_det_no_column(
    chart: ChartMap, region: NormalSet, index: MultiIndex, t: np.ndarray, drop_axis: int
) -> float:
    cols = [m for m in range(1, region.k + 1) if m != drop_axis]
    _, _, rows = chart_jacobian_columns(chart, region, list(t), cols)
    minor = [rows[i - 1] for i in index]
    return float(perm_det(minor))


def det_B_residual(
    chart: ChartMap,
    region: NormalSet,
    index: MultiIndex,
    t: Sequence[float],
    h: float,
) -> float:
    """Alternating sum of centered differences of Jacobian-minor
    determinants; vanishes (to finite-difference order) for C^2 data.

    For each cube axis j the determinant of the composed-map Jacobian
    minor with rows ``index`` and column j removed is differenced in
    ``t_j`` with step ``h``, and the signed sum over j is returned in
    absolute value.
    """
    t = np.asarray(t, dtype=float)
    k = region.k
    index = tuple(index)
    if len(index) != k - 1:
        raise ScenarioError(
            f"det-B residual needs a multi-index of length k-1={k - 1}, "
            f"got {len(index)}"
        )
    if h <= 0.0:
        raise ValueError("step h must be positive")
    if np.any(t - h <= 0.0) or np.any(t + h >= 1.0):
        raise ValueError("t and its h-neighborhood must lie in the open cube")
    total = 0.0
    for j in range(1, k + 1):
        sign = -1.0 if (j - 1) % 2 else 1.0
        tp = t.copy()
        tp[j - 1] += h
        tm = t.copy()
        tm[j - 1] -= h
        diff = (
            _minor_det_no_column(chart, region, index, tp, j)
            - _minor_det_no_column(chart, region, index, tm, j)
        ) / (2.0 * h)
        total += sign * diff
    return abs(total)
