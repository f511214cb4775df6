"""Stochastic sum-of-squares hierarchy for polynomial optimization under uncertainty."""
from .basis import ClusterStructure, MonomialBasis, cluster_basis, lasserre_basis, lasserre_size, product_index_table
from .errors import (
    DimensionError,
    DivergenceError,
    ExtractionError,
    GenerationError,
    InfeasibleAssemblyError,
    ParameterError,
    SsosError,
    StructureError,
)
from .extract import (
    LowerBoundFn,
    MomentSummary,
    convergence_study,
    extract_lower_bound,
    extract_moments,
    mahalanobis,
    piecewise_lower_bound,
)
from .mcpo import McpoResult, local_minimize, mcpo_run
from .noise import NoiseDistribution, expected_value, gauss_legendre, moment
from .poly import Polynomial, differentiate, evaluate, gradient, multiply
from .problems import P_STAR, c_star, simple_quadratic, x_star
from .sdp import (
    HardConstraintSet,
    SdpProblem,
    assemble_dual,
    assemble_primal,
    eliminate_hard,
    export_sdpa,
    import_sdpa,
)
from .snl import (
    SnlInstance,
    SnlProblemType,
    SnlResult,
    build_potential,
    generate_instance,
    kmeans_partition,
    prune_potential,
    restrict_edges,
    snl_basis,
    solve_instance,
)
from .solver import SdpSolution, SolverOptions, kkt_residuals, solve

__version__ = "0.1.0"
