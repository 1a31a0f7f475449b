"""Galilei-covariant phase-space POVMs on a truncated oscillator basis."""

from .fockspace import (
    DensityMatrix,
    FockSpace,
    ValidationError,
    build_space,
    number_operator,
    position_momentum,
    projector,
    pure_state,
    vacuum,
    validate_density,
)
from .galilei import (
    CentralExtElement,
    GalileiElement,
    PhasePoint,
    act,
    compose,
    compose_ext,
    compressed_rep,
    displacement,
    inverse,
    multiplier,
    projective_residual,
    rep_operator,
    weyl_matrix,
)
from .povm import (
    covariance_panel,
    covariance_residual,
    marginal_position,
    measure_region,
    outcome_probability,
    povm_density,
    prob_density,
    prob_density_grid,
    sample,
)
from .regions import Ball, Box, QuadratureRule, Union, transform_region
from .rotinv import (
    InvariantBlocks,
    angular_blocks,
    angular_momentum,
    build_invariant,
    extract_blocks,
    group_average,
    invariance_residual,
    rotation_operator,
)
from .verify import (
    SuiteConfig,
    VerificationReport,
    formal_degree_integral,
    povm_axioms_report,
    round_trip,
    theorem_suite,
)

__all__ = [name for name in dir() if not name.startswith("_")]
