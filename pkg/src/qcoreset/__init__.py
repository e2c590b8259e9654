"""Coreset construction for (k, z)-clustering under a simulated quantum query model."""

from .bicriteria import BicriteriaResult, run_bicriteria
from .core import (
    DEGENERATE,
    ClusteringParams,
    ContractViolation,
    Coreset,
    Dataset,
    cost,
    cost_tau,
    coreset_distortion,
    dist,
    jl_project,
)
from .coreset import Decomposition, GroupKind, RingKind, build_coreset, decompose, default_sample_size
from .lsh import AnnIndex, ann_query, build_index, tau_map
from .mqc import PartitionOracle, mqc_count, mqc_sum
from .pipeline import PipelineConfig, PipelineResult, run_pipeline
from .qsim import (
    Noise,
    OracleMode,
    QueryCost,
    QueryLedger,
    SubroutineConfig,
    SubroutineFailure,
    qcount,
    qsample,
    qsearch_all,
    qsum,
)

__all__ = [name for name in dir() if not name.startswith("_")]
