"""Spectral transforms of finite two-dimensional lattice Schrödinger operators.

The package computes polynomial solution tables and boundary spectral data of
a reference operator, applies prescribed modifications of the spectral
measure (bound-state insertion, weight redistribution), solves the resulting
orthogonalization problem on two independent routes, reconstructs the new
potential, and verifies every construction against exact finite-dimensional
linear algebra.
"""

from .darboux import (bargmann_potentials, complete_last_level, darboux_single,
                      darboux_solution_transform, reconstruct_potentials_from_K)
from .errors import (Darboux2dError, NumericError, ReconstructionError,
                     SingularTransformError, SpectralInadmissibilityError,
                     StructuralInconsistencyError, ValidationError)
from .gelfand_levitan import (QKernel, SpectralModification, TransformKernel,
                              build_Q, completeness_defect,
                              factor_shift_modification, factorized_terms,
                              jacobi_from_measure, modified_atoms,
                              separable_factors, solve_gl_degenerate,
                              solve_gl_dense, transformed_solutions,
                              weight_transfer_modification)
from .lattice import ConeDomain, GridSpec, Potential, cone_sites, make_potential, potentials_equal
from .operator import (BlockJacobi, Field, SpectralDecomposition, apply_hamiltonian,
                       assemble_dense, block_matrices, eigendecompose)
from .polysolve import (PolyTable, degree_map, eval_polytable, leading_coefficients,
                        propagate_polynomials, table_from_csv, table_to_csv)
from .spectral import SpectralData, check_orthogonality, spectral_data, synthesize_state
from .verify import (CheckResult, VerificationReport, compare_potentials,
                     equation_residual, isospectral_check, residual_lambdas)
from .cli import (DEFAULT_TOLERANCES, PipelineResult, RunConfig, main,
                  run_transform_pipeline)

__version__ = "0.1.0"

__all__ = [
    "BlockJacobi", "CheckResult", "ConeDomain", "Darboux2dError",
    "DEFAULT_TOLERANCES", "Field", "GridSpec", "NumericError", "PipelineResult",
    "PolyTable", "Potential", "QKernel", "ReconstructionError", "RunConfig",
    "SingularTransformError", "SpectralData", "SpectralDecomposition",
    "SpectralInadmissibilityError", "SpectralModification",
    "StructuralInconsistencyError", "TransformKernel", "ValidationError",
    "VerificationReport", "apply_hamiltonian", "assemble_dense",
    "bargmann_potentials", "block_matrices", "build_Q", "check_orthogonality",
    "compare_potentials", "complete_last_level", "completeness_defect",
    "cone_sites", "darboux_single", "darboux_solution_transform", "degree_map",
    "eigendecompose", "equation_residual", "eval_polytable",
    "factor_shift_modification", "factorized_terms", "isospectral_check",
    "jacobi_from_measure", "leading_coefficients", "main", "make_potential",
    "modified_atoms", "potentials_equal", "propagate_polynomials",
    "reconstruct_potentials_from_K", "residual_lambdas",
    "run_transform_pipeline", "separable_factors", "solve_gl_degenerate",
    "solve_gl_dense", "spectral_data", "synthesize_state", "table_from_csv",
    "table_to_csv", "transformed_solutions", "weight_transfer_modification",
]
