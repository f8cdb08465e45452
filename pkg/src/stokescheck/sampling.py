"""Seeded generators for smooth random expressions and forms.

Used by the d(d(form)) = 0 self-check and by the property-test suite.
Everything generated here is built from polynomials, sin/cos and exp of
bounded arguments, so the results are smooth on all of R^n and safe to
differentiate twice.
"""

from __future__ import annotations

import numpy as np

from . import expr
from .expr import Const, Expression, Var
from .forms import DifferentialForm, FormTerm

__all__ = [
    "random_smooth_expression",
    "random_smooth_form",
    "summands",
]


def random_smooth_expression(
    rng: np.random.Generator, variables: list[str], depth: int = 2
) -> Expression:
    """A random expression that is smooth everywhere."""
    if depth <= 0 or rng.random() < 0.25:
        if rng.random() < 0.35:
            return Const(float(np.round(rng.uniform(-1.5, 1.5), 3)))
        return Var(variables[int(rng.integers(len(variables)))])
    kind = rng.choice(["add", "mul", "sin", "cos", "exp", "poly"])
    if kind == "add":
        return expr.add(
            random_smooth_expression(rng, variables, depth - 1),
            random_smooth_expression(rng, variables, depth - 1),
        )
    if kind == "mul":
        return expr.mul(
            random_smooth_expression(rng, variables, depth - 1),
            random_smooth_expression(rng, variables, depth - 1),
        )
    if kind in ("sin", "cos"):
        return expr.call(kind, random_smooth_expression(rng, variables, depth - 1))
    if kind == "exp":
        # bounded argument keeps values and derivatives tame
        inner = random_smooth_expression(rng, variables, depth - 1)
        return expr.call("exp", expr.mul(Const(0.5), expr.call("sin", inner)))
    v = Var(variables[int(rng.integers(len(variables)))])
    return expr.pow_const(v, float(rng.integers(2, 4)))


def random_smooth_form(
    rng: np.random.Generator, n: int, degree: int, terms: int = 2
) -> DifferentialForm:
    """A random smooth form with the requested degree in R^n."""
    variables = [f"y{i}" for i in range(1, n + 1)]
    built = []
    for _ in range(terms):
        indices = tuple(
            sorted(rng.choice(np.arange(1, n + 1), size=degree, replace=False))
        )
        built.append(
            FormTerm(indices, random_smooth_expression(rng, variables, depth=2))
        )
    return DifferentialForm(degree, n, built)


def summands(e: Expression) -> list[Expression]:
    """Flatten nested sums into their top-level summands (used to size the
    cancellation scale when checking that a sum vanishes)."""
    if isinstance(e, expr.Add):
        return summands(e.left) + summands(e.right)
    if isinstance(e, expr.Sub):
        return summands(e.left) + [expr.mul(Const(-1.0), e.right)]
    return [e]
