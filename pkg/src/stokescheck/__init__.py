"""Numerical engine for verifying the Stokes identity on regions built
from chained-inequality pieces, with symbolic-expression plumbing for
bounds, chart components and form coefficients."""

from .errors import (
    DomainError,
    EvaluationError,
    ExpressionSyntaxError,
    PreconditionError,
    QuadratureError,
    ScenarioError,
    StokescheckError,
    UnboundVariableError,
)
from .expr import (
    Expression,
    differentiate,
    evaluate,
    evaluate_array,
    free_variables,
    parse,
    to_string,
)
from .forms import DifferentialForm, FormTerm, canonicalize, exterior_derivative
from .forms import add as add_forms
from .forms import scale as scale_form
from .geometry import (
    Face,
    NormalSet,
    RegularSet,
    contains,
    cube_param,
    cube_param_invert,
    cube_param_jacobian,
    face_param,
    shrink,
)
from .quadrature import (
    ChartMap,
    QuadratureSpec,
    chart_jacobian_through_cube,
    det_B_residual,
    integrate_unit_cube,
    pullback_integrand,
)
from .scenarios import (
    builtin_names,
    load_builtin,
    load_scenario,
    resolve_scenario,
    scenario_to_dict,
)
from .stokes import (
    ConvergenceRow,
    FaceContribution,
    Scenario,
    VerificationReport,
    boundary_integral,
    convergence_study,
    face_integral_W,
    ibp_residual,
    outward_vector,
    reparam_residual,
    verify,
    volume_integral,
)

__version__ = "0.1.0"

__all__ = [
    "StokescheckError",
    "ExpressionSyntaxError",
    "EvaluationError",
    "UnboundVariableError",
    "DomainError",
    "ScenarioError",
    "PreconditionError",
    "QuadratureError",
    "Expression",
    "parse",
    "evaluate",
    "evaluate_array",
    "differentiate",
    "to_string",
    "free_variables",
    "DifferentialForm",
    "FormTerm",
    "canonicalize",
    "exterior_derivative",
    "add_forms",
    "scale_form",
    "NormalSet",
    "RegularSet",
    "Face",
    "cube_param",
    "cube_param_jacobian",
    "cube_param_invert",
    "face_param",
    "contains",
    "shrink",
    "ChartMap",
    "QuadratureSpec",
    "integrate_unit_cube",
    "chart_jacobian_through_cube",
    "pullback_integrand",
    "det_B_residual",
    "Scenario",
    "VerificationReport",
    "FaceContribution",
    "ConvergenceRow",
    "volume_integral",
    "boundary_integral",
    "face_integral_W",
    "outward_vector",
    "verify",
    "reparam_residual",
    "ibp_residual",
    "convergence_study",
    "load_scenario",
    "load_builtin",
    "resolve_scenario",
    "builtin_names",
    "scenario_to_dict",
]
