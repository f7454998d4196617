"""Numerical laboratory for the Robin problem -lap(u) = u^p + f(x).

The package assembles finite-difference Robin Laplacians on intervals
and rectangles, computes torsion functions and the admissibility bound
for the source term, runs the monotone sweep for minimal solutions,
brackets the critical boundary parameter, extracts the bottom
eigenvalue of the linearization, finds a second solution at the
mountain-pass level, and drives the companion parabolic flow with
energy bookkeeping and a sharpness experiment for the threshold datum.
"""

from .grid import (
    Grid,
    GridError,
    Interval,
    ProblemSpec,
    Rectangle,
    ScalarField,
    constant_field,
    field_from_csv,
    field_from_function,
    field_to_csv,
    make_grid,
)
from .operators import (
    LinearSolveError,
    RobinOperator,
    SingularOperatorError,
    assemble_dirichlet,
    assemble_robin,
    boundary_integral,
    domain_integral,
    robin_apply,
    solve_linear,
    symmetrized,
)
from .elliptic import (
    AdmissibilityVerdict,
    BracketError,
    CONVERGED,
    CriticalBetaResult,
    DIVERGED,
    EigenReport,
    InconclusiveProbeError,
    IterationParams,
    MAX_ITER,
    MountainPassError,
    MountainPassReport,
    SingularJacobianError,
    SolveReport,
    TorsionReport,
    VerdictOrderError,
    check_source_admissibility,
    find_critical_beta,
    linearized_eigenpair,
    linearized_matrix,
    monotone_iterate,
    mountain_pass_solution,
    newton_refine,
    pass_functional,
    pass_gradient,
    stationary_residual,
    torsion_report,
)
from .orderings import (
    build_threshold_datum,
    convexity_gap,
    intersection_identity_residual,
    power_difference_quotient,
)
from .parabolic import (
    BLOWUP,
    EnergyFloorError,
    EnergyTrace,
    EvolutionConfig,
    GLOBAL_BOUNDED,
    STEADY,
    StiffnessFailure,
    ThresholdVerdict,
    TraceSample,
    boundedness_probe,
    energy,
    energy_floor,
    evolve,
    homogeneous_threshold,
    threshold_experiment,
    trace_from_csv,
    trace_to_csv,
)
from .config import ConfigError, ExperimentConfig, build_field, parse_config, parse_field_spec

__version__ = "0.1.0"

__all__ = [
    "Grid", "GridError", "Interval", "ProblemSpec", "Rectangle", "ScalarField",
    "constant_field", "field_from_csv", "field_from_function", "field_to_csv",
    "make_grid",
    "LinearSolveError", "RobinOperator", "SingularOperatorError",
    "assemble_dirichlet", "assemble_robin", "boundary_integral",
    "domain_integral", "robin_apply", "solve_linear", "symmetrized",
    "AdmissibilityVerdict", "BracketError", "CONVERGED", "CriticalBetaResult",
    "DIVERGED", "EigenReport", "InconclusiveProbeError", "IterationParams",
    "MAX_ITER", "MountainPassError", "MountainPassReport",
    "SingularJacobianError", "SolveReport", "TorsionReport", "VerdictOrderError",
    "check_source_admissibility", "find_critical_beta", "linearized_eigenpair",
    "linearized_matrix", "monotone_iterate", "mountain_pass_solution",
    "newton_refine", "pass_functional", "pass_gradient", "stationary_residual",
    "torsion_report",
    "build_threshold_datum", "convexity_gap",
    "intersection_identity_residual", "power_difference_quotient",
    "BLOWUP", "EnergyFloorError", "EnergyTrace", "EvolutionConfig",
    "GLOBAL_BOUNDED", "STEADY", "StiffnessFailure", "ThresholdVerdict",
    "TraceSample", "boundedness_probe", "energy", "energy_floor", "evolve",
    "homogeneous_threshold", "threshold_experiment", "trace_from_csv",
    "trace_to_csv",
    "ConfigError", "ExperimentConfig", "build_field", "parse_config",
    "parse_field_spec",
    "__version__",
]
