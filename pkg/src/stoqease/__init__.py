"""Measure and ease the sign problem of real spin Hamiltonians."""

__version__ = "0.1.0"

from .hamiltonian import (  # noqa: E402
    ChainSpec,
    CoefficientGraph,
    DenseOperator,
    LadderParams,
    OrthogonalPoint,
    TwoSiteTerm,
    alpha_family,
    build_chain,
    build_coefficient_hamiltonian,
    build_ladder,
    conjugate_onsite,
    example_fine_tuned,
    example_sign_free,
    haar_random_orthogonal,
    pauli_embed,
    random_stoquastic_instance,
)
from .measures import (  # noqa: E402
    EstimatorBudget,
    MeasureSpec,
    effective_local_nu1,
    nu1_closed_form_2local,
    nu1_xz_vertex_sampled,
    nu_p_dense,
    smooth_nu1,
)
from .optimizer import ObjectiveSpec, OptimizerConfig, OptimizerTrace, optimize  # noqa: E402
from .qmc import QmcParams, average_sign, negative_path_gap, transfer_matrix  # noqa: E402

__all__ = [
    "ChainSpec",
    "CoefficientGraph",
    "DenseOperator",
    "EstimatorBudget",
    "LadderParams",
    "MeasureSpec",
    "ObjectiveSpec",
    "OptimizerConfig",
    "OptimizerTrace",
    "OrthogonalPoint",
    "QmcParams",
    "TwoSiteTerm",
    "alpha_family",
    "average_sign",
    "build_chain",
    "build_coefficient_hamiltonian",
    "build_ladder",
    "conjugate_onsite",
    "effective_local_nu1",
    "example_fine_tuned",
    "example_sign_free",
    "haar_random_orthogonal",
    "negative_path_gap",
    "nu1_closed_form_2local",
    "nu1_xz_vertex_sampled",
    "nu_p_dense",
    "optimize",
    "pauli_embed",
    "random_stoquastic_instance",
    "smooth_nu1",
    "transfer_matrix",
]
