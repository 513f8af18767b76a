"""Numerical laboratory for Orlicz norms, degenerate elliptic Dirichlet
problems, subunit metrics, DeGiorgi truncation bounds, and sharpness
threshold studies."""

from . import degiorgi, geometry, sharpness, sobolev, solver, svgplot, young
from .geometry import (
    DomainMask,
    Grid,
    MatrixField,
    a_gradient,
    factor_matrix_field,
    subunit_ball,
    subunit_distance,
    w12a_norm,
)
from .solver import (
    SolveReport,
    StiffnessOperator,
    WeakProblem,
    assemble,
    lax_milgram_constants,
    poincare_constant,
    solve_dirichlet,
    weak_residual,
)
from .young import (
    BumpFamilyParams,
    NormalizedMeasure,
    NormResult,
    YoungFunction,
    bump_phi,
    compose_square,
    conjugate,
    holder_defect,
    inverse_young,
    luxembourg_norm,
    orlicz_norm_dual,
    power_young,
    scale_embedding_check,
    square_composition_check,
    young_from_config,
)

__version__ = "0.1.0"
