"""Numerical certification toolkit for two-point modulus inequalities in
weighted Sobolev spaces on the half-space."""

from .modulus import (
    HalfSpacePoint,
    Params,
    ThetaParams,
    conf_square_bounds,
    hyperbolic_distance,
    hyperbolic_modulus,
    theta,
    theta0,
    theta_params,
)
from .quadrature import (
    Box,
    EnergyReport,
    GridSpec,
    NonIntegrableError,
    ScalarField,
    SeminormDivergenceError,
    cone_volume,
    cone_volume_check,
    finite_difference_gradient_check,
    gagliardo_seminorm,
    weighted_energy,
)
from .extremals import (
    QUINTIC_PROFILE,
    BumpProfile,
    bump,
    bump_energy_envelope,
    log_bump,
    oned_log_bump,
    oned_sharp_profile,
)
from .certify import (
    CertRecord,
    CertReport,
    StructuralViolationError,
    case_ordering_audit,
    check_pointwise_bound,
    lower_bound_omega,
    run_certification,
    sample_pairs,
    standard_corpus,
)
from .omega_star import (
    OmegaEstimate,
    SolverConfig,
    distance_axiom_audit,
    oned_exact,
    sandwich_report,
    solve,
)

__version__ = "0.1.0"
