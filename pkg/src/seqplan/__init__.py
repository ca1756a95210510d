"""seqplan: heterogeneous sequence-parallelism planning for variable-length batches.

Given a cluster description, fitted cost coefficients, and a batch of
sequence lengths, the solver chunks the batch into micro-batches, buckets
each micro-batch's lengths, and picks the makespan-optimal set of
sequence-parallel groups plus the sequence-to-group assignment. Homogeneous
baselines and a cost-model simulator quantify the predicted gains.
"""

__version__ = "0.1.0"

from ._kernels import BACKEND as KERNEL_BACKEND
from .baselines import bfd_pack, plan_batch_ada, plan_static
from .blaster import MicroBatchSplit, blast, blast_bruteforce, min_microbatch_count
from .bucketing import bucket_bruteforce, bucket_dp, bucket_naive
from .cost_model import (
    FitResult,
    GroupLoad,
    ProfileRecord,
    UnderdeterminedError,
    comm_time,
    comp_time,
    fit_coefficients,
    group_time,
    memory_bytes,
)
from .domain import (
    BucketSet,
    ClusterSpec,
    CostCoefficients,
    GroupDispatch,
    InfeasibleError,
    MicroBatchPlan,
    Plan,
    SeqplanError,
    SequenceBatch,
    ValidationError,
    VirtualGroupCatalog,
    build_virtual_catalog,
    exact_buckets,
)
from .planner import (
    MilpInstance,
    MilpSolution,
    PlannerOptions,
    build_instance,
    extract_plan,
    solve,
    solve_bruteforce,
    verify_solution,
)
from .simulator import SimConfig, SimReport, gen_longtail, run_sim
from .workflow import SolveConfig, solve_batch, solve_stream

__all__ = [
    "KERNEL_BACKEND",
    "__version__",
    "BucketSet",
    "ClusterSpec",
    "CostCoefficients",
    "FitResult",
    "GroupDispatch",
    "GroupLoad",
    "InfeasibleError",
    "MicroBatchPlan",
    "MicroBatchSplit",
    "MilpInstance",
    "MilpSolution",
    "Plan",
    "PlannerOptions",
    "ProfileRecord",
    "SeqplanError",
    "SequenceBatch",
    "SimConfig",
    "SimReport",
    "SolveConfig",
    "UnderdeterminedError",
    "ValidationError",
    "VirtualGroupCatalog",
    "bfd_pack",
    "blast",
    "blast_bruteforce",
    "bucket_bruteforce",
    "bucket_dp",
    "bucket_naive",
    "build_instance",
    "build_virtual_catalog",
    "comm_time",
    "comp_time",
    "exact_buckets",
    "extract_plan",
    "fit_coefficients",
    "gen_longtail",
    "group_time",
    "memory_bytes",
    "min_microbatch_count",
    "plan_batch_ada",
    "plan_static",
    "run_sim",
    "solve",
    "solve_batch",
    "solve_bruteforce",
    "solve_stream",
    "verify_solution",
]
