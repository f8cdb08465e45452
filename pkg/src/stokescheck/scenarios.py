"""Scenario files: JSON schema, loading, serialization, builtin catalog.

A scenario file is data, not code: expressions are strings in the
documented grammar.  Layout::

    {
      "version": 1,
      "name": "green-square",            // optional
      "description": "...",              // optional
      "smoothness": "smooth",            // optional, "smooth" | "nonsmooth"
      "k": 2,
      "n": 2,
      "region": [                        // one entry per normal piece
        [ {"lower": "0", "upper": "1"},  // k bound pairs, axis order
          {"lower": "0", "upper": "1"} ]
      ],
      "chart": ["x1", "x2"],             // n expressions in x1..xk
      "form": [                          // degree k-1 terms
        {"indices": [2], "coeff": "y1"}  // coeff in y1..yn
      ],
      "quadrature": {"points": 12, "cells": 4},   // optional
      "tolerance": 1e-6                  // optional
    }
"""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

import jsonschema

from .errors import ExpressionSyntaxError, ScenarioError, StokescheckError
from .expr import parse, to_string
from .forms import DifferentialForm, FormTerm
from .geometry import NormalSet, RegularSet
from .quadrature import ChartMap, QuadratureSpec
from .stokes import Scenario

__all__ = [
    "SCENARIO_SCHEMA",
    "load_scenario",
    "load_scenario_data",
    "scenario_to_dict",
    "builtin_names",
    "load_builtin",
    "resolve_scenario",
]

SCENARIO_SCHEMA = {
    "type": "object",
    "required": ["version", "k", "n", "region", "chart", "form"],
    "additionalProperties": False,
    "properties": {
        "version": {"const": 1},
        "name": {"type": "string"},
        "description": {"type": "string"},
        "smoothness": {"enum": ["smooth", "nonsmooth"]},
        "k": {"type": "integer", "minimum": 2},
        "n": {"type": "integer", "minimum": 1},
        "region": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "array",
                "minItems": 1,
                "items": {
                    "type": "object",
                    "required": ["lower", "upper"],
                    "additionalProperties": False,
                    "properties": {
                        "lower": {"type": "string"},
                        "upper": {"type": "string"},
                    },
                },
            },
        },
        "chart": {"type": "array", "minItems": 1, "items": {"type": "string"}},
        "form": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["indices", "coeff"],
                "additionalProperties": False,
                "properties": {
                    "indices": {
                        "type": "array",
                        "items": {"type": "integer", "minimum": 1},
                    },
                    "coeff": {"type": "string"},
                },
            },
        },
        "quadrature": {
            "type": "object",
            "required": ["points", "cells"],
            "additionalProperties": False,
            "properties": {
                "points": {"type": "integer", "minimum": 1},
                "cells": {"type": "integer", "minimum": 1},
            },
        },
        "tolerance": {"type": "number", "exclusiveMinimum": 0},
    },
}


def _parse_field(text: str, where: str):
    try:
        return parse(text)
    except ExpressionSyntaxError as e:
        raise ScenarioError(f"{where}: {e}") from e


def load_scenario_data(data: dict, name_hint: str = "") -> Scenario:
    """Validate a parsed JSON document and build the scenario."""
    try:
        jsonschema.validate(data, SCENARIO_SCHEMA)
    except jsonschema.ValidationError as e:
        raise ScenarioError(f"schema violation at {e.json_path}: {e.message}") from None
    k = data["k"]
    n = data["n"]
    pieces = []
    for p, bound_list in enumerate(data["region"]):
        if len(bound_list) != k:
            raise ScenarioError(
                f"region[{p}] has {len(bound_list)} bound pairs, expected k={k}"
            )
        bounds = []
        for i, pair in enumerate(bound_list, start=1):
            lo = _parse_field(pair["lower"], f"region[{p}][{i - 1}].lower")
            hi = _parse_field(pair["upper"], f"region[{p}][{i - 1}].upper")
            bounds.append((lo, hi))
        try:
            pieces.append(NormalSet(bounds))
        except ScenarioError as e:
            raise ScenarioError(f"region[{p}]: {e}") from e
    region = RegularSet(pieces)

    if len(data["chart"]) != n:
        raise ScenarioError(
            f"chart has {len(data['chart'])} components, expected n={n}"
        )
    chart = ChartMap(
        [
            _parse_field(text, f"chart[{i}]")
            for i, text in enumerate(data["chart"])
        ],
        k,
    )

    terms = []
    for i, item in enumerate(data["form"]):
        if len(item["indices"]) != k - 1:
            raise ScenarioError(
                f"form[{i}].indices has length {len(item['indices'])}, "
                f"expected degree k-1 = {k - 1}"
            )
        coeff = _parse_field(item["coeff"], f"form[{i}].coeff")
        terms.append(FormTerm(tuple(item["indices"]), coeff))
    form = DifferentialForm(k - 1, n, terms)

    quad = data.get("quadrature", {"points": 12, "cells": 4})
    spec = QuadratureSpec(points=quad["points"], cells=quad["cells"])
    return Scenario(
        region=region,
        chart=chart,
        form=form,
        quadrature=spec,
        tolerance=float(data.get("tolerance", 1e-6)),
        name=data.get("name", name_hint),
        smoothness=data.get("smoothness", "smooth"),
    )


def load_scenario(path: str | Path) -> Scenario:
    """Load and validate a scenario file."""
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise ScenarioError(f"cannot read scenario file {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ScenarioError(f"{path} is not valid JSON: {e}") from e
    if not isinstance(data, dict):
        raise ScenarioError(f"{path}: top level must be an object")
    return load_scenario_data(data, name_hint=path.stem)


def scenario_to_dict(scenario: Scenario) -> dict:
    """Serialize back to the file layout (expressions in canonical form)."""
    return {
        "version": 1,
        "name": scenario.name,
        "smoothness": scenario.smoothness,
        "k": scenario.k,
        "n": scenario.n,
        "region": [
            [
                {"lower": to_string(lo), "upper": to_string(hi)}
                for lo, hi in piece.bounds
            ]
            for piece in scenario.region.pieces
        ],
        "chart": [to_string(c) for c in scenario.chart.components],
        "form": [
            {"indices": list(t.indices), "coeff": to_string(t.coeff)}
            for t in scenario.form.terms
        ],
        "quadrature": {
            "points": scenario.quadrature.points,
            "cells": scenario.quadrature.cells,
        },
        "tolerance": scenario.tolerance,
    }


# ---------------------------------------------------------------------------
# builtin catalog


def _builtin_dir():
    return resources.files("stokescheck").joinpath("scenarios")


def builtin_names() -> list[str]:
    names = [
        entry.name[: -len(".json")]
        for entry in _builtin_dir().iterdir()
        if entry.name.endswith(".json")
    ]
    return sorted(names)


def builtin_text(name: str) -> str:
    entry = _builtin_dir().joinpath(f"{name}.json")
    if not entry.is_file():
        raise ScenarioError(
            f"no builtin scenario '{name}'; available: {', '.join(builtin_names())}"
        )
    return entry.read_text(encoding="utf-8")


def load_builtin(name: str) -> Scenario:
    data = json.loads(builtin_text(name))
    return load_scenario_data(data, name_hint=name)


def resolve_scenario(ref: str) -> Scenario:
    """Accept a file path or a builtin name (with or without .json)."""
    path = Path(ref)
    if path.is_file():
        return load_scenario(path)
    name = ref[: -len(".json")] if ref.endswith(".json") else ref
    try:
        return load_builtin(name)
    except StokescheckError:
        raise ScenarioError(
            f"'{ref}' is neither a readable file nor a builtin scenario; "
            f"builtins: {', '.join(builtin_names())}"
        ) from None
