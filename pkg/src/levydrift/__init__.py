"""Drift-diffusion with Lévy operators on the periodic torus.

Spectral solvers for ``d_t theta = div(v theta) - L theta + eps Lap theta`` and
its backward dual, Lévy kernels and their symbols, molecule evolution, and
numerical checks of the associated inequalities.
"""
from .exceptions import (ArgumentError, ConfigError, DomainError, LevyDriftError, NumericalError,
                         PreconditionError, QuadratureError, ResolutionError)
from .field import (ScalarField, TorusGrid, VelocityField, besov_seminorm, bmo_norm_estimate, holder_seminorm,
                    lp_norm, make_divfree_velocity, random_field, random_stream, sobolev_seminorm, truncate_clamp)
from .kernel import (Case, Family, KernelSpec, SymbolTable, compute_symbol, eval_kernel, levy_integrability,
                     levy_symbol, symbol_bound_margins, validate_bounds)
from .molecules import (MoleculeParams, build_molecule, check_molecule, choose_K, evolve_center, holder_by_duality,
                        iterate_molecule, track_envelopes, transfer_check)
from .solver import (Scheme, SolverConfig, Trajectory, contraction_budget, heat_levy_l1_norm, picard_iterate,
                     picard_solve, solve_backward_dual, solve_forward)
from .verify import (InequalityReport, besov_regularity_check, commutator_scaling_check,
                     fractional_identity_check, strook_varopoulos_check)

__version__ = "0.1.0"

__all__ = [
    "LevyDriftError", "ArgumentError", "DomainError", "PreconditionError", "ResolutionError",
    "NumericalError", "QuadratureError", "ConfigError",
    "TorusGrid", "ScalarField", "VelocityField", "lp_norm", "holder_seminorm", "besov_seminorm",
    "sobolev_seminorm", "bmo_norm_estimate", "truncate_clamp", "make_divfree_velocity", "random_field",
    "random_stream",
    "Case", "Family", "KernelSpec", "SymbolTable", "eval_kernel", "validate_bounds", "levy_integrability",
    "levy_symbol", "compute_symbol", "symbol_bound_margins",
    "Scheme", "SolverConfig", "Trajectory", "solve_forward", "solve_backward_dual", "picard_iterate",
    "picard_solve", "contraction_budget", "heat_levy_l1_norm",
    "MoleculeParams", "choose_K", "build_molecule", "check_molecule", "evolve_center", "track_envelopes",
    "iterate_molecule", "transfer_check", "holder_by_duality",
    "InequalityReport", "strook_varopoulos_check", "besov_regularity_check", "commutator_scaling_check",
    "fractional_identity_check",
]
