"""Inverse-iteration schemes for the 1D Gross-Pitaevskii ground state."""
from .errors import (
    ConfigError,
    GPEError,
    InsufficientDataError,
    InvalidDomainError,
    MaxIterError,
    MeshMismatchError,
    NearSingularError,
    NegativePotentialError,
    NoConvergenceError,
    NonPositiveGammaError,
    NotNormalizedError,
    ShiftEqualsLambdaError,
)
from .fem1d import (
    BandedSymMatrix,
    Field,
    Mesh1D,
    assemble_mass,
    assemble_stiffness,
    assemble_weighted_mass,
    build_mesh,
    h1_norm,
    l2_inner,
    l2_norm,
    linf_nodal,
    solve_banded,
    solve_guarded,
)
from .harness import (
    ExperimentResult,
    contraction_rates,
    model_problem_1,
    model_problem_2,
    reference_solve,
    run_experiment,
    sweep,
)
from .iterate import IterationTrace, SchemeConfig, random_initial, run
from .model import (
    GpeProblem,
    GroundState,
    Potential,
    assemble_A,
    energy,
    eval_potential,
    rayleigh_lambda,
    theta_linf,
    theta_weight,
)
from .spectral import (
    SpectralReport,
    linearized_pair,
    predict_rates,
    shift_diagnostic,
    spectral_report,
    weighted_mu1,
)

__version__ = "0.1.0"
