"""ivdag: causal DAG discovery and inference under hidden confounding.

Additive interventions with unknown targets serve as instrumental variables:
leaf peeling of the sparse reduced form recovers ancestral relations and
candidate instruments, a working-response regression estimates each direct
effect free of mediation and confounding bias, and a precision-weighted
likelihood ratio tests arbitrary sets of directed edges.
"""

from .benchmark import Battery, BenchmarkReport, naive_direct_effects, run_benchmark, standard_batteries
from .config import PIPELINE_DEFAULTS, Hyperparams
from .effects import EdgeFit, FittedModel, estimate_effects, fit_edge, impute_yk
from .graphs import (
    BipartiteEdges,
    CycleError,
    Digraph,
    HypothesisSet,
    ancestors,
    descendants,
    has_cycle,
    is_regular,
    longest_path_length,
    mediators,
    non_mediators,
    nondegenerate_set,
    transitive_closure,
    unmediated_parents,
)
from .inference import (
    Reference,
    TestReport,
    classify,
    constrained_mle,
    lr_statistic,
    p_value,
    sub_dag_reduce,
    test_edges,
)
from .metrics import GraphMetrics, estimation_metrics, graph_metrics
from .peeling import (
    ArgEstimate,
    DegenerateColumnError,
    OrphanVariablesError,
    VMatrix,
    arg_from_v,
    estimate_v,
    identify_cross_edges,
    identify_leaves,
    peel,
)
from .precision import PrecisionEstimate, estimate_precision, neighborhood_select, refit_precision
from .simulate import DagSpec, Dataset, gen_hub, gen_random, sample, true_ancestral_arg
from .sparse import BlockProblem, DesignBlock, SparseFit, bic_tune, block_l0_regression

__version__ = "0.1.0"
