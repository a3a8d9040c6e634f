"""Global optimization of analytic functions over box domains.

A sample-driven search tree guided by interval lower bounds, box
log-volumes, and regionally averaged first/second-order information,
with bounded local refinement at every node.
"""

from .expr import (
    CompiledObjective,
    DimensionMismatch,
    Expression,
    ExpressionError,
    GradientVector,
    HessianDiagonal,
    ParseError,
    ReluNetWeights,
    as_objective,
    compile_function,
    differentiate,
    evaluate,
    gradient,
    hessian_diagonal,
    parse,
    relu_net_to_expression,
    structurally_equal,
    unparse,
)
from .interval import (
    BoxDomain,
    Interval,
    eval_interval,
    log_volume,
    lower_bound,
    partition,
)
from .localopt import LocalOptReport, local_opt
from .tree import (
    SearchConfig,
    SearchResult,
    SearchStats,
    TraceRecord,
    TreeNode,
    backup,
    classical_uct,
    expand,
    learn,
    optimize,
    prune_root,
    select,
    uct_value,
)
from .bench import (
    AggregateCurve,
    BenchmarkProblem,
    aggregate_traces,
    load_expression_file,
    load_nn_weights,
    make_ackley,
    make_levy,
    make_michalewicz,
    nn_problem,
    run_suite,
    table_defaults,
)

__version__ = "0.1.0"

__all__ = [
    "AggregateCurve",
    "BenchmarkProblem",
    "BoxDomain",
    "CompiledObjective",
    "DimensionMismatch",
    "Expression",
    "ExpressionError",
    "GradientVector",
    "HessianDiagonal",
    "Interval",
    "LocalOptReport",
    "ParseError",
    "ReluNetWeights",
    "SearchConfig",
    "SearchResult",
    "SearchStats",
    "TraceRecord",
    "TreeNode",
    "aggregate_traces",
    "as_objective",
    "backup",
    "classical_uct",
    "compile_function",
    "differentiate",
    "eval_interval",
    "evaluate",
    "expand",
    "gradient",
    "hessian_diagonal",
    "learn",
    "load_expression_file",
    "load_nn_weights",
    "local_opt",
    "log_volume",
    "lower_bound",
    "make_ackley",
    "make_levy",
    "make_michalewicz",
    "nn_problem",
    "optimize",
    "parse",
    "partition",
    "prune_root",
    "relu_net_to_expression",
    "run_suite",
    "select",
    "structurally_equal",
    "table_defaults",
    "uct_value",
    "unparse",
]
