"""dilstruct: metric spaces with dilations, at desk scale.

Finite-space Gromov-Hausdorff calculus, dilation structures and their
tangent groups, Carnot group arithmetic, Carnot-Caratheodory distances via
horizontal control optimization, metric profiles and curvature estimation,
and coherent projections with generalized Chow connectivity.
"""
from dilstruct.kernels import BACKEND
from dilstruct.limits import ConvergenceReport, default_grid, extract_limit
from dilstruct.metric import (
    FiniteMetricSpace,
    PolylineCurve,
    TrivialGroupoidView,
    groupoid_fiber_distance,
    metric_derivative,
    reparameterize_unit_speed,
    validate_metric,
    variation_length,
)
from dilstruct.dilation import (
    DilationStructure,
    TangentSpaceModel,
    approx_difference,
    approx_inverse,
    approx_sum,
    build_tangent_model,
    derivative_and_rnp_scan,
    equivalence_probe,
    pansu_differential_check,
    tangent_distance,
    verify_axioms,
)
from dilstruct.gh import (
    GHResult,
    Relation,
    RelationStats,
    bar_generalize,
    gh_exact_small,
    gh_pointed,
    gh_upper_bound,
    relation_stats,
)
from dilstruct.spaces import construct_space
from dilstruct import coherent, length, profiles  # noqa: F401  (submodule access)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "ConvergenceReport",
    "DilationStructure",
    "FiniteMetricSpace",
    "GHResult",
    "PolylineCurve",
    "Relation",
    "RelationStats",
    "TangentSpaceModel",
    "TrivialGroupoidView",
    "approx_difference",
    "approx_inverse",
    "approx_sum",
    "bar_generalize",
    "build_tangent_model",
    "construct_space",
    "default_grid",
    "derivative_and_rnp_scan",
    "equivalence_probe",
    "extract_limit",
    "gh_exact_small",
    "gh_pointed",
    "gh_upper_bound",
    "groupoid_fiber_distance",
    "metric_derivative",
    "pansu_differential_check",
    "relation_stats",
    "reparameterize_unit_speed",
    "tangent_distance",
    "validate_metric",
    "variation_length",
    "verify_axioms",
]
