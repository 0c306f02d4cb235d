"""Numerical laboratory for Lyapunov spectra of discrete linear
time-varying systems: exponent estimation, angle-density (splitness)
analysis, and constructive synthesis of small multiplicative
perturbations with prescribed spectrum shifts."""

from .errors import (
    BracketError,
    BudgetError,
    InadmissiblePerturbationError,
    InvalidInputError,
    LtvLabError,
    NotLyapunovSequenceError,
    ParseError,
    PreconditionError,
    PropagationError,
    SingularMatrixError,
)
from .expressions import Expression, parse_expression
from .linalg import (
    angle_between,
    angle_to_subspace,
    condition_number,
    cosine_to_subspace,
    oblique_projections,
    spectral_norm,
)
from .perturb import (
    PerturbationOutcome,
    PerturbationPlan,
    SynthesisConstants,
    build_plan,
    calibrate,
    execute_plan,
    instability_experiment,
    lambda_mu,
    openness_experiment,
    perturbation_at,
    plan_r_sequence,
    solve_mu,
    synthesis_constants,
)
from .spectrum import (
    ExponentProfile,
    IncompressibilityVerdict,
    SpectrumEstimate,
    exponent_profile,
    incompressibility_test,
    limsup_estimate,
    spectrum_estimate,
)
from .splitness import (
    BrokenAwayVerdict,
    FSSRecord,
    GammaStatistics,
    LyapunovTransformation,
    SplitnessReport,
    angle_profile,
    apply_lyapunov_transformation,
    broken_away_scan,
    gamma_statistics,
    sigma_invariance_check,
    splitness_report,
)
from .system import (
    CoefficientSequence,
    ScaledMatrix,
    TrajectoryLog,
    additive_to_multiplicative,
    lyapunov_bound_estimate,
    multiplicative_to_additive,
    parse_generator_spec,
    perturbed_sequence,
    propagate,
    read_matrix_sequence,
    transition,
    write_matrix_sequence,
)

__version__ = "0.1.0"
