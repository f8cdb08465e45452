"""Both sides of the Stokes identity on regular sets, plus residual checks.

The volume side integrates the pullback of the exterior derivative over
the unit cube of every piece.  The boundary side walks the 2k cube faces
of every piece and integrates, for each face, the form coefficients times
the Jacobian minors of the composed map with the face's parameter column
removed, signed ``(-1)^(j-1)`` and top-minus-bottom.  Faces shared by two
pieces are integrated on both and cancel numerically.

Face values are computed in guarded mode: bound derivatives may blow up
exactly where bounds collapse, and there the Jacobian carries exact zero
factors that annihilate them (the collapsed directions contribute
nothing).  A non-finite value that survives is reported as an error.

``face_integral_W`` recomputes each face contribution from an outward
normal vector determinant; it is a cross-check oracle for the face path,
not part of it.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence, Union

import numpy as np

from . import expr
from .errors import PreconditionError, ScenarioError, StokescheckError
from .expr import Expression
from .forms import DifferentialForm, exterior_derivative
from .geometry import Face, NormalSet, RegularSet, chain_values
from .numeric import exact_sum, perm_det, zw_mul
from .quadrature import (
    ChartMap,
    QuadratureSpec,
    chart_jacobian_columns,
    integrate_unit_cube,
    pullback_values,
)

__all__ = [
    "Scenario",
    "FaceContribution",
    "VerificationReport",
    "ConvergenceRow",
    "volume_integral",
    "boundary_integral",
    "face_integral_W",
    "outward_vector",
    "verify",
    "reparam_residual",
    "ibp_residual",
    "convergence_study",
]

ArrayLike = Union[float, np.ndarray]

_INJECTIVITY_SAMPLES = 96


def _xname(i: int) -> str:
    return f"x{i}"


@dataclass(frozen=True)
class Scenario:
    """One verification problem: region, chart, form, rule, tolerance."""

    region: RegularSet
    chart: ChartMap
    form: DifferentialForm
    quadrature: QuadratureSpec = QuadratureSpec()
    tolerance: float = 1e-6
    name: str = ""
    smoothness: str = "smooth"
    warnings: tuple[str, ...] = field(init=False, default=())

    def __post_init__(self):
        k = self.region.k
        if k < 2:
            raise ScenarioError(f"verification needs dimension k >= 2, got k={k}")
        if self.chart.k != k:
            raise ScenarioError(
                f"chart domain dimension {self.chart.k} != region dimension {k}"
            )
        if self.form.n != self.chart.n:
            raise ScenarioError(
                f"form ambient dimension {self.form.n} != chart ambient "
                f"dimension {self.chart.n}"
            )
        if self.form.degree != k - 1:
            raise ScenarioError(
                f"form degree {self.form.degree} != k-1 = {k - 1}"
            )
        if not self.tolerance > 0.0:
            raise ScenarioError(f"tolerance must be positive, got {self.tolerance}")
        if self.smoothness not in ("smooth", "nonsmooth"):
            raise ScenarioError(
                f"smoothness must be 'smooth' or 'nonsmooth', got {self.smoothness!r}"
            )
        warnings = list(self.region.warnings)
        warnings.extend(_injectivity_heuristic(self.region, self.chart))
        object.__setattr__(self, "warnings", tuple(warnings))

    @property
    def k(self) -> int:
        return self.region.k

    @property
    def n(self) -> int:
        return self.chart.n

    def with_quadrature(self, spec: QuadratureSpec) -> "Scenario":
        return replace(self, quadrature=spec)


def _injectivity_heuristic(region: RegularSet, chart: ChartMap) -> list[str]:
    """Sampled collision search; a warning, never a proof either way."""
    rng = np.random.default_rng(41117)
    points = []
    params = []
    for p, piece in enumerate(region.pieces):
        ts = rng.uniform(0.02, 0.98, size=(_INJECTIVITY_SAMPLES, piece.k))
        for t in ts:
            cs = chain_values(piece, list(t), guarded=True)
            x_env = {_xname(i): v for i, v in enumerate(cs, start=1)}
            y = np.array([float(v) for v in chart.values(x_env, guarded=True)])
            if np.all(np.isfinite(y)):
                points.append(y)
                params.append((p, t))
    if len(points) < 2:
        return []
    ys = np.array(points)
    scale = 1.0 + float(np.max(np.abs(ys)))
    diff = np.linalg.norm(ys[:, None, :] - ys[None, :, :], axis=2)
    close = diff < 1e-8 * scale
    for a in range(len(points)):
        for b in range(a + 1, len(points)):
            if not close[a, b]:
                continue
            pa, ta = params[a]
            pb, tb = params[b]
            if pa != pb or np.linalg.norm(ta - tb) > 1e-3:
                return [
                    "chart may not be one-to-one: distinct sampled parameters "
                    "map to nearly identical points"
                ]
    return []


@dataclass(frozen=True)
class FaceContribution:
    piece: int
    axis: int
    side: str
    value: float  # already signed; boundary integral is the plain sum

    def to_dict(self) -> dict:
        return {
            "piece": self.piece,
            "axis": self.axis,
            "side": self.side,
            "value": self.value,
        }


@dataclass(frozen=True)
class VerificationReport:
    """Both sides of the identity plus residuals and breakdowns."""

    lhs: float | None
    rhs: float | None
    abs_residual: float | None
    rel_residual: float | None
    passed: bool
    tolerance: float
    quadrature: QuadratureSpec
    piece_volumes: tuple[float, ...] = ()
    face_contributions: tuple[FaceContribution, ...] = ()
    warnings: tuple[str, ...] = ()
    error: str | None = None
    scenario_name: str = ""

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario_name,
            "quadrature": {
                "points": self.quadrature.points,
                "cells": self.quadrature.cells,
            },
            "tolerance": self.tolerance,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "abs_residual": self.abs_residual,
            "rel_residual": self.rel_residual,
            "pass": self.passed,
            "piece_volumes": list(self.piece_volumes),
            "face_contributions": [fc.to_dict() for fc in self.face_contributions],
            "warnings": list(self.warnings),
            "error": self.error,
        }


def relative_residual(lhs: float, rhs: float) -> float:
    """Residual normalized by ``1 + max(|lhs|, |rhs|)``; stable near zero."""
    return abs(lhs - rhs) / (1.0 + max(abs(lhs), abs(rhs)))


# ---------------------------------------------------------------------------
# volume side


def _piece_volume(
    dform: DifferentialForm, chart: ChartMap, piece: NormalSet, spec: QuadratureSpec
) -> float:
    def integrand(t_block: np.ndarray) -> ArrayLike:
        return pullback_values(dform, chart, piece, list(t_block))

    return integrate_unit_cube(integrand, piece.k, spec, label="volume integrand")


def volume_parts(scenario: Scenario) -> list[float]:
    dform = exterior_derivative(scenario.form)
    parts = []
    for idx, piece in enumerate(scenario.region.pieces):
        try:
            parts.append(
                _piece_volume(dform, scenario.chart, piece, scenario.quadrature)
            )
        except StokescheckError as e:
            raise type(e)(f"piece {idx}: {e}") from e
    return parts


def volume_integral(scenario: Scenario) -> float:
    """Integral of the exterior derivative over the mapped region,
    computed in cube coordinates piece by piece."""
    return exact_sum(volume_parts(scenario))


# ---------------------------------------------------------------------------
# boundary side


def _face_values(
    form: DifferentialForm,
    chart: ChartMap,
    piece: NormalSet,
    face: Face,
    s_block: np.ndarray,
) -> ArrayLike:
    """Unsigned face integrand at (k-1)-cube nodes, guarded."""
    k = piece.k
    j = face.axis
    cols = [m for m in range(1, k + 1) if m != j]
    t: list[ArrayLike] = []
    row = 0
    for m in range(1, k + 1):
        if m == j:
            t.append(face.t_value)
        else:
            t.append(s_block[row])
            row += 1
    _, ys, rows = chart_jacobian_columns(chart, piece, t, cols, guarded=True)
    y_env = {f"y{i}": v for i, v in enumerate(ys, start=1)}
    total: ArrayLike = 0.0
    for term in form.terms:
        minor = [rows[i - 1] for i in term.indices]
        det = perm_det(minor, guarded=True)
        if isinstance(det, float) and det == 0.0:
            continue
        coeff = expr.evaluate_array(term.coeff, y_env, guarded=True)
        total = np.add(total, zw_mul(coeff, det))
    return total


def _face_integral(
    form: DifferentialForm,
    chart: ChartMap,
    piece: NormalSet,
    face: Face,
    spec: QuadratureSpec,
    label: str,
) -> float:
    def integrand(s_block: np.ndarray) -> ArrayLike:
        return _face_values(form, chart, piece, face, s_block)

    return integrate_unit_cube(integrand, piece.k - 1, spec, label=label)


def boundary_parts(scenario: Scenario) -> list[FaceContribution]:
    contributions = []
    for idx, piece in enumerate(scenario.region.pieces):
        for j in range(1, piece.k + 1):
            sign = -1.0 if (j - 1) % 2 else 1.0
            for side, side_sign in (("top", 1.0), ("bottom", -1.0)):
                face = Face(j, side)
                label = f"piece {idx} face (axis {j}, {side})"
                value = _face_integral(
                    scenario.form, scenario.chart, piece, face, scenario.quadrature, label
                )
                contributions.append(
                    FaceContribution(idx, j, side, sign * side_sign * value)
                )
    return contributions


def boundary_integral(scenario: Scenario) -> float:
    """Integral of the form over the mapped boundary: signed top-minus-
    bottom face integrals in cube coordinates, summed over pieces.
    Internal faces of adjacent pieces cancel numerically, not symbolically."""
    return exact_sum(c.value for c in boundary_parts(scenario))


# ---------------------------------------------------------------------------
# W-determinant cross-check


def _outward_rows(
    piece: NormalSet, face: Face, x_env: dict, *, guarded: bool
) -> list[ArrayLike]:
    """Unnormalized outward vector on a graph face: gradient slots for
    earlier axes, +-1 in the face slot, zeros after (bounds never read
    later axes).  Top faces use -grad(g_j), bottom faces +grad(f_j)."""
    k = piece.k
    j = face.axis
    entries: list[ArrayLike] = []
    for s in range(1, k + 1):
        if s == j:
            entries.append(1.0 if face.side == "top" else -1.0)
        elif s < j:
            if face.side == "top":
                d = expr.evaluate_array(piece.dupper(j, s), x_env, guarded=guarded)
                entries.append(np.multiply(-1.0, d))
            else:
                entries.append(
                    expr.evaluate_array(piece.dlower(j, s), x_env, guarded=guarded)
                )
        else:
            entries.append(0.0)
    return entries


def outward_vector(piece: NormalSet, face: Face, s: Sequence[float]) -> np.ndarray:
    """Outward vector at the face point parametrized by ``s`` (scalar API)."""
    s = np.asarray(s, dtype=float)
    t: list[ArrayLike] = list(np.insert(s, face.axis - 1, face.t_value))
    cs = chain_values(piece, t, guarded=True)
    x_env = {_xname(i): v for i, v in enumerate(cs, start=1)}
    rows = _outward_rows(piece, face, x_env, guarded=True)
    return np.array([float(v) for v in rows])


def face_integral_W(scenario: Scenario, piece_index: int, face: Face) -> float:
    """Face contribution via the outward-normal determinant.

    Integrates, over the face parameters, the form coefficients at the
    mapped point times ``det [N; rows I of the chart Jacobian]`` times
    the Jacobian determinant of the remaining cube coordinates.  The
    outward vector is unnormalized, which absorbs the surface measure;
    the result equals the corresponding signed face term of
    :func:`boundary_integral` and serves as its independent cross-check.
    """
    if scenario.k < 2:
        raise ScenarioError("face integrals need k >= 2")
    piece = scenario.region.pieces[piece_index]
    k = piece.k
    j = face.axis

    def integrand(s_block: np.ndarray) -> ArrayLike:
        t: list[ArrayLike] = []
        row = 0
        for m in range(1, k + 1):
            if m == j:
                t.append(face.t_value)
            else:
                t.append(s_block[row])
                row += 1
        cs = chain_values(piece, t, guarded=True)
        x_env = {_xname(i): v for i, v in enumerate(cs, start=1)}
        # det of the cube Jacobian with row/column j removed: the matrix is
        # lower triangular, so it is the product of the remaining diagonal
        detc: ArrayLike = 1.0
        for i in range(1, k + 1):
            if i == j:
                continue
            lo = expr.evaluate_array(piece.lower(i), x_env, guarded=True)
            hi = expr.evaluate_array(piece.upper(i), x_env, guarded=True)
            detc = zw_mul(detc, np.subtract(hi, lo))
        normal = _outward_rows(piece, face, x_env, guarded=True)
        ys = scenario.chart.values(x_env, guarded=True)
        y_env = {f"y{i}": v for i, v in enumerate(ys, start=1)}
        total: ArrayLike = 0.0
        for term in scenario.form.terms:
            rows = [normal]
            for i in term.indices:
                rows.append(
                    [
                        expr.evaluate_array(
                            scenario.chart.partial(i, m), x_env, guarded=True
                        )
                        for m in range(1, k + 1)
                    ]
                )
            wdet = perm_det(rows, guarded=True)
            coeff = expr.evaluate_array(term.coeff, y_env, guarded=True)
            total = np.add(total, zw_mul(coeff, zw_mul(wdet, detc)))
        return total

    label = f"piece {piece_index} W-face (axis {j}, {face.side})"
    return integrate_unit_cube(integrand, k - 1, scenario.quadrature, label=label)


# ---------------------------------------------------------------------------
# verification


def verify(scenario: Scenario) -> VerificationReport:
    """Compute both sides and report residuals; upstream errors come back
    as a failed report, not an exception."""
    try:
        pieces = volume_parts(scenario)
        lhs = exact_sum(pieces)
        contributions = boundary_parts(scenario)
        rhs = exact_sum(c.value for c in contributions)
    except StokescheckError as e:
        return VerificationReport(
            lhs=None,
            rhs=None,
            abs_residual=None,
            rel_residual=None,
            passed=False,
            tolerance=scenario.tolerance,
            quadrature=scenario.quadrature,
            warnings=scenario.warnings,
            error=str(e),
            scenario_name=scenario.name,
        )
    abs_res = abs(lhs - rhs)
    rel_res = relative_residual(lhs, rhs)
    return VerificationReport(
        lhs=lhs,
        rhs=rhs,
        abs_residual=abs_res,
        rel_residual=rel_res,
        passed=rel_res <= scenario.tolerance,
        tolerance=scenario.tolerance,
        quadrature=scenario.quadrature,
        piece_volumes=tuple(pieces),
        face_contributions=tuple(contributions),
        warnings=scenario.warnings,
        scenario_name=scenario.name,
    )


# ---------------------------------------------------------------------------
# reparametrization independence


def _rho_jacobian_rows(rho: ChartMap, x_env: dict) -> list[list[ArrayLike]]:
    return [
        [expr.evaluate_array(rho.partial(r, m), x_env) for m in range(1, rho.k + 1)]
        for r in range(1, rho.n + 1)
    ]


def _check_rho(rho: ChartMap, k: int):
    if rho.k != k or rho.n != k:
        raise PreconditionError(
            f"reparametrization must map the {k}-cube to itself, got "
            f"{rho.k} -> {rho.n}"
        )
    rng = np.random.default_rng(90210)
    ts = rng.uniform(0.0, 1.0, size=(256, k))
    x_env = {_xname(i): ts[:, i - 1] for i in range(1, k + 1)}
    values = np.array(
        [np.broadcast_to(v, (len(ts),)) for v in rho.values(x_env)]
    )
    if np.any(values < -1e-12) or np.any(values > 1.0 + 1e-12):
        raise PreconditionError(
            "reparametrization leaves the unit cube at sampled points"
        )
    dets = np.broadcast_to(
        np.asarray(perm_det(_rho_jacobian_rows(rho, x_env))), (len(ts),)
    )
    if np.any(dets <= 0.0):
        raise PreconditionError(
            "reparametrization Jacobian determinant is not positive at "
            "sampled interior points (orientation hypothesis)"
        )


def reparam_residual(scenario: Scenario, rho: ChartMap) -> float:
    """Quadrature gap between the direct pullback integrals and the same
    integrals driven through an orientation-preserving cube bijection.

    The volume side substitutes the cube parameter through ``rho`` and
    multiplies by its Jacobian determinant.  The boundary side does the
    same per face, which requires ``rho`` to act componentwise (each
    component reads only its own variable).  Returns the larger of the
    two residuals.
    """
    k = scenario.k
    _check_rho(rho, k)
    dform = exterior_derivative(scenario.form)
    spec = scenario.quadrature

    vol_direct = []
    vol_mapped = []
    for idx, piece in enumerate(scenario.region.pieces):
        def direct(t_block: np.ndarray) -> ArrayLike:
            return pullback_values(dform, scenario.chart, piece, list(t_block))

        def mapped(t_block: np.ndarray) -> ArrayLike:
            x_env = {_xname(i): t_block[i - 1] for i in range(1, k + 1)}
            image = [
                np.broadcast_to(np.asarray(v, dtype=float), (t_block.shape[1],))
                for v in rho.values(x_env)
            ]
            det = perm_det(_rho_jacobian_rows(rho, x_env))
            return np.multiply(
                pullback_values(dform, scenario.chart, piece, image), det
            )

        vol_direct.append(
            integrate_unit_cube(direct, k, spec, label=f"piece {idx} volume")
        )
        vol_mapped.append(
            integrate_unit_cube(mapped, k, spec, label=f"piece {idx} mapped volume")
        )
    vol_residual = abs(exact_sum(vol_direct) - exact_sum(vol_mapped))

    for i, comp in enumerate(rho.components, start=1):
        extra = expr.free_variables(comp) - {_xname(i)}
        if extra:
            raise PreconditionError(
                "boundary reparametrization needs a componentwise map; "
                f"component {i} also reads {sorted(extra)}"
            )
    direct_total = boundary_integral(scenario)
    mapped_parts = []
    for idx, piece in enumerate(scenario.region.pieces):
        for j in range(1, k + 1):
            sign = -1.0 if (j - 1) % 2 else 1.0
            retained = [m for m in range(1, k + 1) if m != j]
            for side, side_sign in (("top", 1.0), ("bottom", -1.0)):
                face = Face(j, side)

                def mapped_face(s_block: np.ndarray) -> ArrayLike:
                    mapped_rows = []
                    det: ArrayLike = 1.0
                    for row, m in enumerate(retained):
                        env = {_xname(m): s_block[row]}
                        mapped_rows.append(
                            np.broadcast_to(
                                np.asarray(
                                    expr.evaluate_array(
                                        rho.components[m - 1], env
                                    ),
                                    dtype=float,
                                ),
                                (s_block.shape[1],),
                            )
                        )
                        det = np.multiply(
                            det,
                            expr.evaluate_array(rho.partial(m, m), env),
                        )
                    mapped_block = np.stack(mapped_rows)
                    return np.multiply(
                        _face_values(
                            scenario.form, scenario.chart, piece, face, mapped_block
                        ),
                        det,
                    )

                value = integrate_unit_cube(
                    mapped_face,
                    k - 1,
                    spec,
                    label=f"piece {idx} mapped face (axis {j}, {side})",
                )
                mapped_parts.append(sign * side_sign * value)
    boundary_residual = abs(direct_total - exact_sum(mapped_parts))
    return max(vol_residual, boundary_residual)


# ---------------------------------------------------------------------------
# integration by parts


def ibp_residual(
    f: Expression,
    g: Expression,
    bounds: Sequence[tuple[float, float]] | tuple[float, float],
    spec: QuadratureSpec = QuadratureSpec(),
    axis: int = 1,
) -> float:
    """Residual of integration by parts on a box.

    Univariate (``bounds`` a single interval): |int f'g - [fg] + int fg'|.
    Multivariate: the derivative runs along ``axis`` and the bracket
    becomes an integral over the remaining axes of the top-minus-bottom
    values.  Functions use variables ``x1..xk``.
    """
    if isinstance(bounds, tuple) and len(bounds) == 2 and np.isscalar(bounds[0]):
        box = [(float(bounds[0]), float(bounds[1]))]
    else:
        box = [(float(a), float(b)) for a, b in bounds]
    k = len(box)
    if not 1 <= axis <= k:
        raise PreconditionError(f"axis {axis} out of range 1..{k}")
    for a, b in box:
        if not b > a:
            raise PreconditionError(f"empty interval ({a}, {b})")
    allowed = {_xname(i) for i in range(1, k + 1)}
    for label, e in (("f", f), ("g", g)):
        bad = expr.free_variables(e) - allowed
        if bad:
            raise PreconditionError(
                f"{label} uses variables {sorted(bad)}; only x1..x{k} allowed"
            )
    df = expr.differentiate(f, _xname(axis))
    dg = expr.differentiate(g, _xname(axis))
    widths = [b - a for a, b in box]
    volume = float(np.prod(widths))

    def box_env(u_block: np.ndarray) -> dict:
        return {
            _xname(i + 1): box[i][0] + widths[i] * u_block[i] for i in range(k)
        }

    def integrand(product_terms):
        def fn(u_block: np.ndarray) -> ArrayLike:
            env = box_env(u_block)
            out: ArrayLike = volume
            for term in product_terms:
                out = np.multiply(out, expr.evaluate_array(term, env))
            return out

        return fn

    int_dfg = integrate_unit_cube(integrand((df, g)), k, spec, label="f' g")
    int_fdg = integrate_unit_cube(integrand((f, dg)), k, spec, label="f g'")

    fg = expr.mul(f, g)
    a_ax, b_ax = box[axis - 1]
    if k == 1:
        bracket = expr.evaluate(fg, {_xname(1): b_ax}) - expr.evaluate(
            fg, {_xname(1): a_ax}
        )
    else:
        others = [i for i in range(k) if i != axis - 1]
        face_volume = float(np.prod([widths[i] for i in others]))

        def bracket_fn(u_block: np.ndarray) -> ArrayLike:
            env = {}
            for row, i in enumerate(others):
                env[_xname(i + 1)] = box[i][0] + widths[i] * u_block[row]
            env[_xname(axis)] = b_ax
            top = expr.evaluate_array(fg, env)
            env[_xname(axis)] = a_ax
            bottom = expr.evaluate_array(fg, env)
            return np.multiply(face_volume, np.subtract(top, bottom))

        bracket = integrate_unit_cube(bracket_fn, k - 1, spec, label="[fg]")
    return abs(int_dfg - bracket + int_fdg)


# ---------------------------------------------------------------------------
# convergence studies


@dataclass(frozen=True)
class ConvergenceRow:
    quadrature: QuadratureSpec
    lhs: float
    rhs: float
    abs_residual: float
    rel_residual: float
    order: float | None

    def to_dict(self) -> dict:
        return {
            "points": self.quadrature.points,
            "cells": self.quadrature.cells,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "abs_residual": self.abs_residual,
            "rel_residual": self.rel_residual,
            "order": self.order,
        }


def convergence_study(
    scenario: Scenario, levels: Sequence[QuadratureSpec]
) -> list[ConvergenceRow]:
    """Residuals over a refinement ladder with estimated order between
    consecutive levels (h taken as 1/(points*cells))."""
    levels = list(levels)
    if len(levels) < 3:
        raise PreconditionError("a convergence study needs at least 3 levels")
    rows: list[ConvergenceRow] = []
    prev: ConvergenceRow | None = None
    for spec in levels:
        s = scenario.with_quadrature(spec)
        lhs = volume_integral(s)
        rhs = boundary_integral(s)
        abs_res = abs(lhs - rhs)
        rel_res = relative_residual(lhs, rhs)
        order = None
        if prev is not None and prev.rel_residual > 0.0 and rel_res > 0.0:
            h_prev = 1.0 / prev.quadrature.nodes_per_axis
            h_cur = 1.0 / spec.nodes_per_axis
            if h_prev != h_cur:
                order = float(
                    np.log(prev.rel_residual / rel_res) / np.log(h_prev / h_cur)
                )
        row = ConvergenceRow(spec, lhs, rhs, abs_res, rel_res, order)
        rows.append(row)
        prev = row
    return rows
