"""Differential forms as canonicalized sums of coefficient-wedge terms.

A degree-p form in ambient dimension n is stored as a list of terms,
one per strictly increasing multi-index of length p, each carrying a
coefficient expression in ``y1..yn``.  User input with repeated or
unsorted indices is canonicalized on construction: repeats vanish and
reordering multiplies the coefficient by the permutation sign.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from . import expr
from .errors import ScenarioError
from .expr import Const, Expression

__all__ = [
    "MultiIndex",
    "FormTerm",
    "DifferentialForm",
    "canonicalize",
    "exterior_derivative",
    "add",
    "scale",
]

MultiIndex = tuple[int, ...]


def _yname(i: int) -> str:
    return f"y{i}"


def _sort_with_sign(indices: Sequence[int]) -> tuple[MultiIndex, float]:
    """Insertion sort counting swaps; assumes no repeats."""
    items = list(indices)
    sign = 1.0
    for a in range(1, len(items)):
        b = a
        while b > 0 and items[b - 1] > items[b]:
            items[b - 1], items[b] = items[b], items[b - 1]
            sign = -sign
            b -= 1
    return tuple(items), sign


@dataclass(frozen=True)
class FormTerm:
    indices: MultiIndex
    coeff: Expression


def canonicalize(indices: Sequence[int], coeff: Expression, n: int) -> FormTerm | None:
    """Sort a wedge monomial into canonical order.

    Returns ``None`` when the term vanishes: a repeated index, or a
    coefficient that folds to the zero constant.
    """
    indices = tuple(int(i) for i in indices)
    for i in indices:
        if not 1 <= i <= n:
            raise ScenarioError(f"form index {i} out of range 1..{n}")
    if len(set(indices)) != len(indices):
        return None
    sorted_indices, sign = _sort_with_sign(indices)
    if sign < 0:
        coeff = expr.mul(Const(-1.0), coeff)
    if isinstance(coeff, Const) and coeff.value == 0.0:
        return None
    return FormTerm(sorted_indices, coeff)


class DifferentialForm:
    """Canonical sum of wedge terms of a single degree.

    Degrees above the ambient dimension are rejected outright: every
    wedge monomial would repeat an index and vanish.
    """

    def __init__(self, degree: int, n: int, terms: Sequence[FormTerm] = ()):
        if n < 1:
            raise ScenarioError(f"ambient dimension must be >= 1, got {n}")
        if not 0 <= degree <= n:
            raise ScenarioError(
                f"form degree {degree} invalid for ambient dimension {n} "
                "(degrees above n vanish identically)"
            )
        merged: dict[MultiIndex, Expression] = {}
        for term in terms:
            if len(term.indices) != degree:
                raise ScenarioError(
                    f"term {term.indices} has length {len(term.indices)}, "
                    f"expected degree {degree}"
                )
            canon = canonicalize(term.indices, term.coeff, n)
            if canon is None:
                continue
            bad = expr.free_variables(canon.coeff) - {_yname(i) for i in range(1, n + 1)}
            if bad:
                raise ScenarioError(
                    f"coefficient of {canon.indices} uses variables {sorted(bad)}; "
                    f"only y1..y{n} are allowed"
                )
            if canon.indices in merged:
                merged[canon.indices] = expr.add(merged[canon.indices], canon.coeff)
            else:
                merged[canon.indices] = canon.coeff
        self.degree = degree
        self.n = n
        self.terms = tuple(
            FormTerm(idx, coeff)
            for idx, coeff in sorted(merged.items())
            if not (isinstance(coeff, Const) and coeff.value == 0.0)
        )

    def is_zero(self) -> bool:
        return not self.terms

    def __eq__(self, other):
        return (
            isinstance(other, DifferentialForm)
            and self.degree == other.degree
            and self.n == other.n
            and self.terms == other.terms
        )

    def __repr__(self):
        if not self.terms:
            return f"DifferentialForm(degree={self.degree}, n={self.n}, 0)"
        parts = " + ".join(
            f"({expr.to_string(t.coeff)}) dy{'^dy'.join(str(i) for i in t.indices)}"
            for t in self.terms
        )
        return f"DifferentialForm(degree={self.degree}, n={self.n}, {parts})"


def exterior_derivative(form: DifferentialForm) -> DifferentialForm:
    """Degree-raising derivative: wedge each coefficient's differential
    in front of its monomial and re-canonicalize."""
    if form.degree >= form.n:
        raise ScenarioError(
            f"cannot take the exterior derivative of a degree-{form.degree} "
            f"form in ambient dimension {form.n}"
        )
    out_terms: list[FormTerm] = []
    for term in form.terms:
        for i in range(1, form.n + 1):
            dcoeff = expr.differentiate(term.coeff, _yname(i))
            if isinstance(dcoeff, Const) and dcoeff.value == 0.0:
                continue
            canon = canonicalize((i, *term.indices), dcoeff, form.n)
            if canon is not None:
                out_terms.append(canon)
    return DifferentialForm(form.degree + 1, form.n, out_terms)


def add(a: DifferentialForm, b: DifferentialForm) -> DifferentialForm:
    if a.degree != b.degree or a.n != b.n:
        raise ScenarioError(
            f"cannot add a degree-{a.degree} form in R^{a.n} to a "
            f"degree-{b.degree} form in R^{b.n}"
        )
    return DifferentialForm(a.degree, a.n, a.terms + b.terms)


def scale(form: DifferentialForm, factor: float) -> DifferentialForm:
    scaled = [
        FormTerm(t.indices, expr.mul(Const(float(factor)), t.coeff)) for t in form.terms
    ]
    return DifferentialForm(form.degree, form.n, scaled)
