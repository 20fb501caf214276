"""Mini-batch proximal Gaussian-process collocation solver for nonlinear PDEs."""

from .batching import Batch, SpatialIndex, build_index, sample_batch, uniform_batch
from .kernels import (
    IDENTITY,
    LAPLACIAN,
    DiffOp,
    Functional,
    KernelSpec,
    UnsupportedOperatorError,
    cross_gram,
    cross_row,
    eval_k,
    eval_op_k,
    first_deriv,
    gram,
    second_deriv,
)
from .problems import (
    CollocationSet,
    DomainBox,
    ProblemSpec,
    ResidualMap,
    build_functionals,
    burgers_problem,
    eliminate,
    elliptic_problem,
    latent_layout,
    linear_problem,
    residual,
    residual_jacobian,
    residual_map,
    sample_collocation,
)
from .reference import (
    ErrorReport,
    EvalGrid,
    burgers_true,
    elliptic_forcing,
    elliptic_laplacian_true,
    elliptic_true,
    error_report,
)
from .solver import (
    BatchSystem,
    ConditioningError,
    DiagnosticsConfig,
    LatentState,
    RunHistory,
    Solver,
    SolverConfig,
    StepRecord,
    elliptic_weak_convexity_constants,
    gauss_newton,
    stability_probe,
)

__version__ = "0.1.0"
