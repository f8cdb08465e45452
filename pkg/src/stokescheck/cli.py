"""Command-line front end.

Subcommands::

    verify       both sides of the identity for a scenario, pass/fail
    convergence  residuals over a quadrature refinement ladder
    ddzero       d(d(form)) = 0 spot check (random forms or a scenario's)
    detb         alternating minor-determinant derivative residual
    ibp          integration-by-parts residual on an interval or box
    reparam      parametrization-independence residual
    builtin      list/show/export the shipped scenarios

Exit codes: 0 pass, 1 residual over tolerance, 2 input/validation error.
``--json`` switches stdout to a single machine-readable document.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import sampling
from .errors import ScenarioError, StokescheckError
from .expr import evaluate_array, parse, to_string
from .forms import exterior_derivative
from .geometry import chain_values
from .quadrature import ChartMap, QuadratureSpec, det_B_residual
from .scenarios import builtin_names, builtin_text, resolve_scenario
from .stokes import (
    Scenario,
    convergence_study,
    ibp_residual,
    reparam_residual,
    verify,
)

_PASS, _FAIL, _ERROR = 0, 1, 2


def _emit_json(payload: dict) -> None:
    print(json.dumps(payload, indent=2, sort_keys=False))


def _apply_overrides(scenario: Scenario, args) -> Scenario:
    spec = scenario.quadrature
    points = getattr(args, "points", None) or spec.points
    cells = getattr(args, "cells", None) or spec.cells
    scenario = scenario.with_quadrature(QuadratureSpec(points=points, cells=cells))
    tolerance = getattr(args, "tolerance", None)
    if tolerance is not None:
        from dataclasses import replace

        scenario = replace(scenario, tolerance=tolerance)
    return scenario


# ---------------------------------------------------------------------------
# verify


def _cmd_verify(args) -> int:
    scenario = _apply_overrides(resolve_scenario(args.scenario), args)
    report = verify(scenario)
    if args.json:
        _emit_json(report.to_dict())
    else:
        if report.error is not None:
            print(f"error: {report.error}", file=sys.stderr)
        else:
            name = report.scenario_name or args.scenario
            print(
                f"scenario   {name} (k={scenario.k}, n={scenario.n}, "
                f"{len(scenario.region.pieces)} piece(s), {scenario.smoothness})"
            )
            print(
                f"quadrature {report.quadrature.points} points/axis, "
                f"{report.quadrature.cells} cell(s)/axis"
            )
            for w in report.warnings:
                print(f"warning    {w}")
            print(f"volume     {report.lhs:.15g}")
            print(f"boundary   {report.rhs:.15g}")
            print(
                f"residual   abs={report.abs_residual:.6g} "
                f"rel={report.rel_residual:.6g} tolerance={report.tolerance:.6g}"
            )
            print(
                f"lhs={report.lhs:.6f} rhs={report.rhs:.6f} "
                f"{'PASS' if report.passed else 'FAIL'}"
            )
    if report.error is not None:
        return _ERROR
    return _PASS if report.passed else _FAIL


# ---------------------------------------------------------------------------
# convergence


def _cmd_convergence(args) -> int:
    scenario = resolve_scenario(args.scenario)
    points = args.points or scenario.quadrature.points
    try:
        cells = [int(c) for c in args.levels.split(",") if c.strip()]
    except ValueError:
        raise ScenarioError(f"--levels must be a comma list of integers, got {args.levels!r}")
    levels = [QuadratureSpec(points=points, cells=c) for c in cells]
    rows = convergence_study(scenario, levels)
    if args.json:
        _emit_json(
            {
                "scenario": scenario.name or args.scenario,
                "levels": [row.to_dict() for row in rows],
            }
        )
    else:
        print(f"{'points':>7} {'cells':>6} {'lhs':>20} {'rhs':>20} {'rel_resid':>11} {'order':>7}")
        for row in rows:
            order = f"{row.order:7.2f}" if row.order is not None else "      -"
            print(
                f"{row.quadrature.points:>7} {row.quadrature.cells:>6} "
                f"{row.lhs:>20.12g} {row.rhs:>20.12g} {row.rel_residual:>11.3e} {order}"
            )
    return _PASS


# ---------------------------------------------------------------------------
# d(d(form)) = 0


def _dd_check(form, n, samples, rng, tolerance):
    """Max normalized coefficient of d(d(form)) over sampled points."""
    dd = exterior_derivative(exterior_derivative(form))
    ys = rng.uniform(-1.0, 1.0, size=(samples, n))
    env = {f"y{i}": ys[:, i - 1] for i in range(1, n + 1)}
    worst = 0.0
    for term in dd.terms:
        total = np.broadcast_to(
            np.asarray(evaluate_array(term.coeff, env), dtype=float), (samples,)
        )
        scale = np.zeros(samples)
        for part in sampling.summands(term.coeff):
            scale = np.maximum(
                scale,
                np.abs(
                    np.broadcast_to(
                        np.asarray(evaluate_array(part, env), dtype=float), (samples,)
                    )
                ),
            )
        normalized = np.abs(total) / (1.0 + scale)
        worst = max(worst, float(np.max(normalized)))
    return worst


def _cmd_ddzero(args) -> int:
    rng = np.random.default_rng(args.seed)
    results = []
    if args.scenario is not None:
        scenario = resolve_scenario(args.scenario)
        if scenario.form.degree + 2 > scenario.n:
            raise ScenarioError(
                f"d(d(form)) needs degree+2 <= n; scenario has degree "
                f"{scenario.form.degree} in ambient dimension {scenario.n} "
                "(run without a scenario for the random-form check)"
            )
        worst = _dd_check(scenario.form, scenario.n, args.samples, rng, args.tolerance)
        results.append({"form": scenario.name or args.scenario, "max_normalized": worst})
    else:
        for index in range(args.forms):
            n = int(rng.integers(2, args.dimension + 1))
            degree = int(rng.integers(1, min(args.max_degree, n - 2) + 1)) if n > 2 else 0
            form = sampling.random_smooth_form(rng, n, degree)
            worst = _dd_check(form, n, args.samples, rng, args.tolerance)
            results.append({"form": f"random-{index}", "n": n, "degree": degree,
                            "max_normalized": worst})
    overall = max(r["max_normalized"] for r in results)
    passed = overall <= args.tolerance
    if args.json:
        _emit_json(
            {
                "tolerance": args.tolerance,
                "samples": args.samples,
                "max_normalized": overall,
                "pass": passed,
                "forms": results,
            }
        )
    else:
        print(f"checked {len(results)} form(s) at {args.samples} points each")
        print(f"max |d(d(form))| / (1 + scale) = {overall:.3e}")
        print("PASS" if passed else "FAIL")
    return _PASS if passed else _FAIL


# ---------------------------------------------------------------------------
# det-B residual


def _cmd_detb(args) -> int:
    scenario = resolve_scenario(args.scenario)
    rng = np.random.default_rng(args.seed)
    k = scenario.k
    margin = max(2.0 * args.h, 0.02)
    rows = []
    worst = 0.0
    for piece_index, piece in enumerate(scenario.region.pieces):
        for term in scenario.form.terms:
            residuals_h = []
            residuals_h2 = []
            for _ in range(args.samples):
                t = rng.uniform(margin, 1.0 - margin, size=k)
                residuals_h.append(
                    det_B_residual(scenario.chart, piece, term.indices, t, args.h)
                )
                residuals_h2.append(
                    det_B_residual(scenario.chart, piece, term.indices, t, args.h / 2.0)
                )
            orders = [
                float(np.log2(a / b))
                for a, b in zip(residuals_h, residuals_h2)
                if a > 0.0 and b > 0.0
            ]
            max_h = max(residuals_h)
            worst = max(worst, max_h)
            rows.append(
                {
                    "piece": piece_index,
                    "index": list(term.indices),
                    "max_residual_h": max_h,
                    "max_residual_h_over_2": max(residuals_h2),
                    "median_order": float(np.median(orders)) if orders else None,
                }
            )
    passed = args.tolerance is None or worst <= args.tolerance
    if args.json:
        _emit_json(
            {
                "scenario": scenario.name or args.scenario,
                "h": args.h,
                "samples": args.samples,
                "tolerance": args.tolerance,
                "max_residual": worst,
                "pass": passed,
                "indices": rows,
            }
        )
    else:
        print(f"{'piece':>5} {'index':>10} {'resid(h)':>12} {'resid(h/2)':>12} {'order':>7}")
        for row in rows:
            order = (
                f"{row['median_order']:7.2f}" if row["median_order"] is not None else "      -"
            )
            print(
                f"{row['piece']:>5} {str(row['index']):>10} "
                f"{row['max_residual_h']:>12.3e} {row['max_residual_h_over_2']:>12.3e} {order}"
            )
        print(f"max residual(h={args.h:g}) = {worst:.3e}")
        if args.tolerance is not None:
            print("PASS" if passed else "FAIL")
    return _PASS if passed else _FAIL


# ---------------------------------------------------------------------------
# integration by parts


def _parse_bounds(text: str) -> list[tuple[float, float]]:
    box = []
    for chunk in text.split(";"):
        parts = chunk.split(",")
        if len(parts) != 2:
            raise ScenarioError(
                f"--bounds expects 'a,b' pairs separated by ';', got {text!r}"
            )
        box.append((float(parts[0]), float(parts[1])))
    return box


def _cmd_ibp(args) -> int:
    f = parse(args.f)
    g = parse(args.g)
    box = _parse_bounds(args.bounds)
    spec = QuadratureSpec(points=args.points, cells=args.cells)
    bounds = box[0] if len(box) == 1 else box
    residual = ibp_residual(f, g, bounds, spec, axis=args.axis)
    passed = residual <= args.tolerance
    if args.json:
        _emit_json(
            {
                "f": to_string(f),
                "g": to_string(g),
                "bounds": [list(b) for b in box],
                "axis": args.axis,
                "quadrature": {"points": spec.points, "cells": spec.cells},
                "residual": residual,
                "tolerance": args.tolerance,
                "pass": passed,
            }
        )
    else:
        print(f"f = {to_string(f)}; g = {to_string(g)}; axis {args.axis}")
        print(f"residual = {residual:.6e} (tolerance {args.tolerance:g})")
        print("PASS" if passed else "FAIL")
    return _PASS if passed else _FAIL


# ---------------------------------------------------------------------------
# reparametrization


def _cmd_reparam(args) -> int:
    scenario = _apply_overrides(resolve_scenario(args.scenario), args)
    if args.rho is None:
        components = [parse(f"x{i}^2") for i in range(1, scenario.k + 1)]
    else:
        components = [parse(chunk) for chunk in args.rho.split(",")]
    rho = ChartMap(components, scenario.k)
    residual = reparam_residual(scenario, rho)
    tolerance = args.tolerance if args.tolerance is not None else 1e-8
    passed = residual <= tolerance
    if args.json:
        _emit_json(
            {
                "scenario": scenario.name or args.scenario,
                "rho": [to_string(c) for c in rho.components],
                "quadrature": {
                    "points": scenario.quadrature.points,
                    "cells": scenario.quadrature.cells,
                },
                "residual": residual,
                "tolerance": tolerance,
                "pass": passed,
            }
        )
    else:
        rho_text = ", ".join(to_string(c) for c in rho.components)
        print(f"rho = ({rho_text})")
        print(f"residual = {residual:.6e} (tolerance {tolerance:g})")
        print("PASS" if passed else "FAIL")
    return _PASS if passed else _FAIL


# ---------------------------------------------------------------------------
# builtins


def _cmd_builtin(args) -> int:
    if args.action == "list":
        if args.json:
            _emit_json({"builtins": builtin_names()})
        else:
            for name in builtin_names():
                print(name)
        return _PASS
    if args.name is None:
        raise ScenarioError(f"'builtin {args.action}' needs a scenario name")
    text = builtin_text(args.name)
    if args.action == "show":
        print(text, end="")
        return _PASS
    dest = Path(args.dest or f"{args.name}.json")
    if dest.is_dir():
        dest = dest / f"{args.name}.json"
    dest.write_text(text, encoding="utf-8")
    print(f"wrote {dest}")
    return _PASS


# ---------------------------------------------------------------------------
# parser wiring


def _add_quadrature_flags(p: argparse.ArgumentParser):
    p.add_argument("--points", type=int, default=None, help="Gauss points per axis")
    p.add_argument("--cells", type=int, default=None, help="composite cells per axis")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stokescheck",
        description="Numerical verification of the Stokes identity on "
        "regions assembled from chained-inequality pieces.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="compute both sides and compare")
    p.add_argument("scenario", help="scenario file or builtin name")
    _add_quadrature_flags(p)
    p.add_argument("--tolerance", type=float, default=None)
    p.add_argument("--json", action="store_true")
    p.set_defaults(handler=_cmd_verify)

    p = sub.add_parser("convergence", help="residuals over a refinement ladder")
    p.add_argument("scenario")
    p.add_argument("--levels", default="2,4,8", help="comma list of cells per axis")
    p.add_argument("--points", type=int, default=None)
    p.add_argument("--json", action="store_true")
    p.set_defaults(handler=_cmd_convergence)

    p = sub.add_parser("ddzero", help="check d(d(form)) = 0 numerically")
    p.add_argument("scenario", nargs="?", default=None,
                   help="optional scenario whose form is checked (needs degree+2 <= n)")
    p.add_argument("--forms", type=int, default=50, help="random forms to generate")
    p.add_argument("--dimension", type=int, default=4, help="max ambient dimension")
    p.add_argument("--max-degree", type=int, default=2)
    p.add_argument("--samples", type=int, default=100, help="evaluation points per form")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tolerance", type=float, default=1e-9)
    p.add_argument("--json", action="store_true")
    p.set_defaults(handler=_cmd_ddzero)

    p = sub.add_parser("detb", help="minor-determinant derivative residual")
    p.add_argument("scenario")
    p.add_argument("--h", type=float, default=1e-3, help="finite-difference step")
    p.add_argument("--samples", type=int, default=20, help="interior points per index")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tolerance", type=float, default=None,
                   help="fail when the max residual at h exceeds this")
    p.add_argument("--json", action="store_true")
    p.set_defaults(handler=_cmd_detb)

    p = sub.add_parser("ibp", help="integration-by-parts residual")
    p.add_argument("--f", default="x1", help="expression in x1..xk")
    p.add_argument("--g", default="x1")
    p.add_argument("--bounds", default="0,1", help="'a,b' pairs separated by ';'")
    p.add_argument("--axis", type=int, default=1)
    p.add_argument("--points", type=int, default=12)
    p.add_argument("--cells", type=int, default=4)
    p.add_argument("--tolerance", type=float, default=1e-10)
    p.add_argument("--json", action="store_true")
    p.set_defaults(handler=_cmd_ibp)

    p = sub.add_parser("reparam", help="parametrization-independence residual")
    p.add_argument("scenario")
    p.add_argument("--rho", default=None,
                   help="comma list of k components in x1..xk (default: x_i^2)")
    _add_quadrature_flags(p)
    p.add_argument("--tolerance", type=float, default=None)
    p.add_argument("--json", action="store_true")
    p.set_defaults(handler=_cmd_reparam)

    p = sub.add_parser("builtin", help="list/show/export shipped scenarios")
    p.add_argument("action", choices=["list", "show", "export"])
    p.add_argument("name", nargs="?", default=None)
    p.add_argument("--dest", default=None, help="export destination")
    p.add_argument("--json", action="store_true")
    p.set_defaults(handler=_cmd_builtin)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if e.code else 0
    try:
        return args.handler(args)
    except StokescheckError as e:
        print(f"error: {e}", file=sys.stderr)
        return _ERROR


if __name__ == "__main__":
    sys.exit(main())
