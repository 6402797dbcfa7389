"""Low-parametric SimRank approximation for sparse graphs.

Compressed forms S ~ I + U V^T and S ~ I + off(U U^T) computed by
alternating minimization, Newton quadratic minimization, or
randomized-SVD fixed-point iterations, with a dense fixed-point oracle
and top-N conservation metrics for verification.
"""

from .altmin import AltMinConfig, run_altmin
from .dense import (
    DenseSimilarity,
    fixed_point_step,
    off_part,
    singular_spectrum,
    solve_fixed_point,
    truncated_svd_error,
)
from .graph_io import (
    EdgeList,
    EdgeListParseError,
    NormalizedAdjacency,
    build_adjacency,
    load_graph_file,
    parse_edge_list,
)
from .kernels import (
    FactorPair,
    ShiftMatrix,
    SymmetricFactor,
    apply_phi,
    apply_phi_star_sparse,
    bilinear_diag,
    build_shift,
    dmmp,
    ffmp,
)
from .limits import DenseCapExceeded, SolverDivergenceError, SparsityGuardError
from .metrics import EvalReport, chebyshev_error, frobenius_residual, psi, top_n_sets
from .quadmin import (
    LinearOperatorHandle,
    QuadMinConfig,
    gmres_solve,
    gradient,
    jacobian_apply,
    residual_f,
    run_quadmin,
)
from .rsvd import SpectralFactor, run_rsvd, sketch_apply

__version__ = "0.1.0"

__all__ = [
    "AltMinConfig",
    "DenseCapExceeded",
    "DenseSimilarity",
    "EdgeList",
    "EdgeListParseError",
    "EvalReport",
    "FactorPair",
    "LinearOperatorHandle",
    "NormalizedAdjacency",
    "QuadMinConfig",
    "ShiftMatrix",
    "SolverDivergenceError",
    "SparsityGuardError",
    "SpectralFactor",
    "SymmetricFactor",
    "apply_phi",
    "apply_phi_star_sparse",
    "bilinear_diag",
    "build_adjacency",
    "build_shift",
    "chebyshev_error",
    "dmmp",
    "ffmp",
    "fixed_point_step",
    "frobenius_residual",
    "gmres_solve",
    "gradient",
    "jacobian_apply",
    "load_graph_file",
    "off_part",
    "parse_edge_list",
    "psi",
    "residual_f",
    "run_altmin",
    "run_quadmin",
    "run_rsvd",
    "singular_spectrum",
    "sketch_apply",
    "solve_fixed_point",
    "top_n_sets",
    "truncated_svd_error",
]
