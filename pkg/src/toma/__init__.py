"""Token merging at desk scale.

Submodular destination selection, attention-based merge/unmerge as linear
maps, locality-aware partitioning, cross-step reuse scheduling, synthetic
spatially-correlated token fields, and an analytic cost model, with a CLI
front end (`toma`).
"""

from .costmodel import CostParams, FlopReport, analytic_bound, cost_report, speedup_limit_check
from .errors import DataError, LayoutError, NumericalError, TomaError
from .locality import (
    PartitionLayout,
    gather_regions,
    local_pipeline,
    make_layout,
    scatter_regions,
)
from .merge import (
    HardAssignment,
    MergeConfig,
    MergeWeights,
    apply_merge,
    attention_merge_weights,
    hard_assignment,
    hard_merge_weights,
)
from .reuse import (
    ReuseLog,
    ReuseSchedule,
    StepRecord,
    destination_overlap,
    selection_overlap_by_gap,
    should_recompute,
    stepwise_pipeline,
)
from .select import (
    DestinationSet,
    GreedyState,
    brute_force_select,
    facility_location_value,
    greedy_select,
    marginal_gain,
)
from .synth import SynthConfig, drift_sequence, generate_field
from .tensorfile import read_tensor_file, write_tensor_file
from .tensors import (
    SimilarityMatrix,
    TokenMatrix,
    cosine_similarity,
    deterministic_mode,
    l2_normalize_rows,
    matmul,
    sdpa,
    softmax_columns,
)
from .unmerge import OrthoDiagnostics, ortho_diagnostics, unmerge_pinv, unmerge_transpose

__version__ = "0.1.0"

__all__ = [
    "CostParams",
    "DataError",
    "DestinationSet",
    "FlopReport",
    "GreedyState",
    "HardAssignment",
    "LayoutError",
    "MergeConfig",
    "MergeWeights",
    "NumericalError",
    "OrthoDiagnostics",
    "PartitionLayout",
    "ReuseLog",
    "ReuseSchedule",
    "SimilarityMatrix",
    "StepRecord",
    "SynthConfig",
    "TokenMatrix",
    "TomaError",
    "analytic_bound",
    "apply_merge",
    "attention_merge_weights",
    "brute_force_select",
    "cosine_similarity",
    "cost_report",
    "destination_overlap",
    "deterministic_mode",
    "drift_sequence",
    "facility_location_value",
    "gather_regions",
    "generate_field",
    "greedy_select",
    "hard_assignment",
    "hard_merge_weights",
    "l2_normalize_rows",
    "local_pipeline",
    "make_layout",
    "marginal_gain",
    "matmul",
    "ortho_diagnostics",
    "read_tensor_file",
    "scatter_regions",
    "sdpa",
    "selection_overlap_by_gap",
    "should_recompute",
    "softmax_columns",
    "speedup_limit_check",
    "stepwise_pipeline",
    "unmerge_pinv",
    "unmerge_transpose",
    "write_tensor_file",
]
