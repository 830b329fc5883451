"""Hybrid multilevel Monte Carlo for 1-D steady-state particle transport.

Monte Carlo histories estimate quasidiffusion closures (cell Eddington
factors and boundary factors); a finite-volume low-order solver turns each
closure realization into a scalar-flux sample; a multilevel driver allocates
samples across a nested grid hierarchy to meet a target tolerance at minimal
cost and reports the standard convergence diagnostics.
"""

from .errors import (
    AlignmentError,
    AssemblyError,
    ConfigurationError,
    DimensionError,
    FitError,
    InsufficientSamplesError,
    NumericalError,
    SingularSystemError,
)
from .experiment import (
    CaseResult,
    OutputBundle,
    RunConfig,
    emit_outputs,
    load_config,
    run_experiment,
    serialize_config,
    three_material_problem,
    two_material_problem,
)
from .grids import Grid, GridHierarchy, RegionSpec, build_hierarchy, integrate_flux, restrict_tallies
from .loqd import (
    Closures,
    FluxSolution,
    TridiagonalSystem,
    assemble_system,
    balance_residual,
    closures_from_tallies,
    isotropic_closures,
    solve_loqd,
    solve_tridiagonal,
)
from .mlmc import (
    HybridSample,
    LevelStats,
    MlmcConfig,
    MlmcReport,
    RateFit,
    combine_estimator,
    consistency_check,
    deterministic_sampler,
    draw_level_sample,
    fit_rates,
    level_stats,
    optimal_samples,
    run_mlmc,
    theory_optimal_cost,
    weak_convergence,
)
from .tallies import ClosureTallies, estimate_boundary_factors, estimate_eddington
from .transport import (
    HistoryStream,
    Particle,
    Region,
    SampleSeed,
    SlabProblem,
    TransportSettings,
    sample_source,
    simulate_sample,
    track_history,
)

__all__ = [
    "AlignmentError",
    "AssemblyError",
    "ConfigurationError",
    "DimensionError",
    "FitError",
    "InsufficientSamplesError",
    "NumericalError",
    "SingularSystemError",
    "CaseResult",
    "OutputBundle",
    "RunConfig",
    "emit_outputs",
    "load_config",
    "run_experiment",
    "serialize_config",
    "three_material_problem",
    "two_material_problem",
    "Grid",
    "GridHierarchy",
    "RegionSpec",
    "build_hierarchy",
    "integrate_flux",
    "restrict_tallies",
    "Closures",
    "FluxSolution",
    "TridiagonalSystem",
    "assemble_system",
    "balance_residual",
    "closures_from_tallies",
    "isotropic_closures",
    "solve_loqd",
    "solve_tridiagonal",
    "HybridSample",
    "LevelStats",
    "MlmcConfig",
    "MlmcReport",
    "RateFit",
    "combine_estimator",
    "consistency_check",
    "deterministic_sampler",
    "draw_level_sample",
    "fit_rates",
    "level_stats",
    "optimal_samples",
    "run_mlmc",
    "theory_optimal_cost",
    "weak_convergence",
    "ClosureTallies",
    "estimate_boundary_factors",
    "estimate_eddington",
    "HistoryStream",
    "Particle",
    "Region",
    "SampleSeed",
    "SlabProblem",
    "TransportSettings",
    "sample_source",
    "simulate_sample",
    "track_history",
]
