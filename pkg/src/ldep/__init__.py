"""Piecewise-linear dilation-erosion classifiers for binary data.

The package trains a two-sided maxout classifier (score = maximum of
affine pieces voting +1 minus maximum of pieces voting -1) with a
penalty convex-concave procedure whose convex subproblems are solved by
a built-in operator-splitting QP solver.
"""

from .errors import (
    DataFormatError,
    DimensionMismatch,
    LdepError,
    ModelFormatError,
    SingleClassError,
)
from .model import (
    DepModel,
    LDepModel,
    affine_max,
    decision_function,
    decision_values,
    dep_decision,
    dilation,
    erosion,
    predict,
    predict_many,
)
from .problem import (
    CcpSchedule,
    Dataset,
    TrainConfig,
    dc_residual,
    elastic_net,
    hinge_sum,
    model_objective,
    objective,
    residuals_at_zero_slack,
)
from .qp import (
    ConvexSubproblem,
    Solution,
    SolverConfig,
    SolveStatus,
    dump_subproblem,
    kkt_residuals,
    solve,
)
from .train import (
    CcpIterate,
    IterationRecord,
    Side,
    SubproblemLayout,
    TrainReport,
    TrainStatus,
    build_subproblem,
    initialize,
    linearize_concave,
    train,
    train_best,
)
from .data import (
    MixtureParams,
    accuracy,
    confusion_counts,
    export_grid,
    generate_datasets,
    grid_rows,
    load_csv,
    load_model,
    save_model,
    write_csv,
)

__version__ = "0.1.0"

__all__ = [
    "LdepError",
    "DimensionMismatch",
    "DataFormatError",
    "ModelFormatError",
    "SingleClassError",
    "DepModel",
    "LDepModel",
    "dilation",
    "erosion",
    "affine_max",
    "dep_decision",
    "decision_function",
    "decision_values",
    "predict",
    "predict_many",
    "CcpSchedule",
    "TrainConfig",
    "Dataset",
    "hinge_sum",
    "elastic_net",
    "dc_residual",
    "objective",
    "model_objective",
    "residuals_at_zero_slack",
    "SolverConfig",
    "SolveStatus",
    "ConvexSubproblem",
    "Solution",
    "solve",
    "kkt_residuals",
    "dump_subproblem",
    "Side",
    "TrainStatus",
    "IterationRecord",
    "CcpIterate",
    "TrainReport",
    "SubproblemLayout",
    "initialize",
    "linearize_concave",
    "build_subproblem",
    "train",
    "train_best",
    "MixtureParams",
    "load_csv",
    "write_csv",
    "generate_datasets",
    "accuracy",
    "confusion_counts",
    "grid_rows",
    "export_grid",
    "save_model",
    "load_model",
    "__version__",
]
