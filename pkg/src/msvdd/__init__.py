"""Multisphere support vector data description.

Joint sphere placement, point assignment, and outlier scoring for multimodal
data: an exact branch-and-bound solver over assignments, a location-allocation
heuristic baseline, kernelized geometry throughout, and an evaluation pipeline
(AUC-ROC, grid cross-validation, incumbent-gap studies).
"""

from .data import (
    Dataset,
    SyntheticSpec,
    generate_synthetic,
    parse_libsvm,
    scale_to_unit_box,
    serialize_libsvm,
    split_real,
)
from .detection import (
    DetectionModel,
    Label,
    RocResult,
    anomaly_score,
    auc_roc,
    classify,
    score_points,
)
from .errors import (
    ConvergenceError,
    InfeasibleSubproblemError,
    InputError,
    MsvddError,
    ParseError,
    SolverFailure,
    UndefinedMetricError,
)
from .exact import (
    MsvddProblem,
    branch,
    compute_delta_dual,
    compute_delta_primal,
    incumbent_gap_rows,
    lower_bound,
    solve_exact,
    verify_bigM_feasibility,
)
from .experiments import (
    ExperimentConfig,
    emit_plot_data,
    run_cross_validation,
    run_gap_study,
)
from .heuristic import HeuristicConfig, reassign, solve_heuristic
from .kernels import (
    GramMatrix,
    KernelKind,
    KernelSpec,
    eval_kernel,
    feature_distance_sq,
    gram,
)
from .solution import (
    Assignment,
    IncumbentRecord,
    MsvddSolution,
    SolveStatus,
    evaluate_assignment,
)
from .svdd import (
    DEFAULT_TOLS,
    SolverTolerances,
    SvddSolution,
    project_capped_simplex,
    recover_radius,
    solve_svdd,
    svdd_objective_monotone_check,
)

__version__ = "0.1.0"
