"""Adaptive collocation PDE solver with stagewise network basis growth."""

from .activation import Activation, MAX_ORDER, activation_derivative, tanh_derivative
from .basis import (
    AdaptiveInit,
    BasisFunction,
    BasisSet,
    ClosedFormBasis,
    CompositeBasis,
    CornerSingularBasis,
    LocalizedDictionary,
    MemberDictionary,
    NeuronDictionary,
    SLFN,
    adaptive_init,
    eval_combination,
    eval_partial,
    hyperplane_density,
    make_localized_basis,
)
from .geometry import (
    Box2D,
    Disk,
    Domain,
    Interval,
    LShape,
    child_rng,
    rejection_sample,
)
from .linalg import DEFAULT_RCOND, LsqResult, lstsq
from .metrics import ErrorPair, error_metrics, evaluation_grid
from .operators import (
    AdvectionDiffusion,
    Biharmonic,
    BoundarySpec,
    Dirichlet,
    DirichletAndNormal,
    Identity,
    LinearizedAC,
    NegLaplacian,
    Neumann,
    OperatorSpec,
    RadialPointLoad,
    RobinPair,
    apply_operator,
    assemble_block,
    loss_param_gradient,
)
from .problems import ProblemSpec, builtin, preset_names
from .solver import (
    IterationReport,
    SolveResult,
    SolverConfig,
    StageReport,
    solve,
    solve_nonlinear_ac,
    triple_norm,
)
from .training import (
    AdamState,
    TrainConfig,
    adam_step,
    adaptive_basis_training,
    collo_lsq,
    loss_value,
)

__version__ = "0.1.0"
