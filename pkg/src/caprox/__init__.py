"""Sparse-vector and low-rank-matrix recovery with a capped quadratic penalty.

The penalty sum_i (mu - max(sqrt(mu) - |x_i|, 0)^2) leaves entries above
sqrt(mu) unpenalized, avoiding the shrinkage of l1 / nuclear-norm
relaxations. The package provides closed-form proximal operators (element
wise and on singular values), a proximal-linearization solver with an
adaptive trust weight, an interval-exclusion certificate that verifies a
stationary point is well separated from all others under a two-sided
isometry bound, instance generators with exactly calibrated constants, and
reproducible experiment drivers with a CLI.
"""
from .certificate import (
    CertificateReport,
    MissingDeltaError,
    NotStationaryError,
    check_certificate,
    compute_z,
    forbidden_interval,
    stationarity_residual,
    verified_fraction,
)
from .experiments import GridSpec, GridResult, emit_results, run_nrsfm_study, run_phase_grid
from .instances import (
    Instance,
    gen_gaussian_dense,
    gen_rip_dense,
    load_instance,
    make_lowrank_instance,
    make_nrsfm_instance,
    make_sparse_instance,
    save_instance,
)
from .kernels import BACKEND as KERNEL_BACKEND
from .operators import (
    DenseOp,
    DifferenceOp,
    LinOp,
    ProjectionOp,
    StackedOp,
    random_rotations,
    stack_to_wide,
    wide_to_stack,
)
from .penalties import (
    RegKind,
    Regularizer,
    SubgradientInterval,
    capped_penalty,
    hard_threshold,
    hard_threshold_singvals,
    penalty_plus_square,
    penalty_plus_square_subgrad,
    prox_capped,
    prox_capped_scalar,
    prox_capped_singvals,
    soft_threshold,
    soft_threshold_singvals,
)
from .solver import (
    SolveResult,
    SolverConfig,
    Status,
    gist_step,
    numerical_rank,
    objective,
    prox_target,
    solution_cardinality,
    solve,
    stationary_points_1d,
    tau_update,
    write_trace,
)

__version__ = "0.1.0"
