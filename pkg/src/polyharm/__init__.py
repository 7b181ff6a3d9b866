"""Numerical laboratory for polyharmonic Dirichlet systems on the unit ball.

Exact Green-function evaluation, weighted a priori estimate studies, the
exponent bootstrap of the boundedness theorem, and the constructive
singular solution family that shows the exponent condition is sharp.
"""

from .errors import (
    ConvergenceError,
    DomainError,
    InvariantViolation,
    NotApplicableError,
    ParameterError,
    PolyharmError,
    ResolutionError,
    SingularPointError,
)
from .exponents import (
    BootstrapTrace,
    ExponentParams,
    classify_regime,
    compute_exponents,
    run_bootstrap,
    validate_trace,
)
from .geometry import (
    BallProblem,
    ConeRegion,
    GradingSpec,
    QuadratureGrid,
    build_grid,
    cone_contains,
    default_cone,
    distance_to_boundary,
    weighted_norm,
)
from .green import GreenKernel, build_kernel, eval_green, verify_green_lower_bound
from .potential import (
    EstimateReport,
    SampledField,
    apply_green_operator,
    falsify_estimate,
    verify_estimate,
    verify_lemma_x,
)
from .singular import (
    SingularSystem,
    build_singular_rhs,
    construct_counterexample,
    verify_pointwise_lower_bound,
    verify_system_residual,
)
from .spectral import EigenPair, eigen_moment, principal_eigenpair, verify_sandwich

__version__ = "1.0.0"
