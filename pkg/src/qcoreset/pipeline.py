"""End-to-end construction: optional JL projection, bicriteria, tau oracle, decomposition, sampling."""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import lsh
from .bicriteria import BicriteriaResult, run_bicriteria
from .core import ClusteringParams, Coreset, Dataset, jl_project, nearest
from .coreset import Decomposition, build_coreset, decompose, default_sample_size
from .qsim import QueryCost, QueryLedger, SubroutineConfig, SubroutineFailure


@dataclass(frozen=True)
class PipelineConfig:
    """Knobs that are not part of the clustering problem itself.

    ``t_sample`` overrides the per-group sample size; otherwise it is
    ``default_sample_size`` with constants ``C_t`` and ``c_z``, capped at n.
    """

    jl_dim: int | None = None
    t_sample: int | None = None
    C_t: float = 1.0
    c_z: float = 1.0
    c_tau: float = lsh.DEFAULT_C
    est_factor: float = 4.0
    max_retries: int = 3

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class PipelineResult:
    coreset: Coreset
    bicriteria: BicriteriaResult
    decomposition: Decomposition
    tau_index: lsh.AnnIndex | None
    t_sample: int
    ledger: QueryLedger
    stage_ledger: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)

    def metrics(self) -> dict:
        dec = self.decomposition
        glab = dec.group_label()
        return {
            "coreset_size": len(self.coreset),
            "coreset_total_weight": self.coreset.total_weight,
            "bicriteria": {k: v for k, v in self.bicriteria.to_dict().items() if k != "trace"},
            "centers": int(self.bicriteria.indices.size),
            "t_sample": self.t_sample,
            "groups": int(np.unique(glab[glab >= 0]).size),
            "sampled_groups": len(self.coreset.meta.get("groups", [])),
            "skipped_groups": self.coreset.meta.get("skipped", []),
            "tau_fallbacks": 0 if self.tau_index is None else self.tau_index.fallbacks,
            "ledger": self.ledger.snapshot(),
            "stage_ledger": self.stage_ledger,
            "failures": self.ledger.failures,
            "timings": self.timings,
        }


def run_pipeline(D: Dataset, params: ClusteringParams, cfg: SubroutineConfig,
                 ledger: QueryLedger | None = None, pcfg: PipelineConfig = PipelineConfig()) -> PipelineResult:
    """Build a coreset of ``D``; coreset points live in the original space even after JL."""
    ledger = ledger if ledger is not None else QueryLedger()
    params.check(D.n)
    timings, stages = {}, {}
    t0 = time.perf_counter()
    work = D if pcfg.jl_dim is None else jl_project(D, pcfg.jl_dim, int(cfg.rng("jl").integers(2**31)))
    X = work.points
    timings["jl"] = time.perf_counter() - t0

    def stage(name, fn):
        # accumulates, so charges of a discarded attempt stay attributed to its stage
        before = ledger.snapshot()
        t = time.perf_counter()
        try:
            return fn()
        finally:
            timings[name] = timings.get(name, 0.0) + time.perf_counter() - t
            delta = QueryLedger.diff(ledger.snapshot(), before)
            prev = stages.get(name, dict.fromkeys(delta, 0))
            stages[name] = {k: prev[k] + delta[k] for k in delta}

    bic = stage("bicriteria", lambda: run_bicriteria(work, params, cfg, ledger, c_tau=pcfg.c_tau,
                                                     max_retries=pcfg.max_retries))
    A = X[bic.indices]

    def tau_stage():
        if cfg.exact or A.shape[0] == 1:
            return None, nearest(X, A)[0], QueryCost(partition_oracle=1)
        index = lsh.build_index(A, c_target=pcfg.c_tau, seed=int(cfg.rng("tau").integers(2**31)), n=D.n)
        return index, lsh.query_many(index, X)[0], index.query_cost

    index, tau, tau_cost = stage("tau", tau_stage)
    t_sample = pcfg.t_sample or default_sample_size(params, A.shape[0], X.shape[1], D.n,
                                                    C_t=pcfg.C_t, c_z=pcfg.c_z, cap=D.n)

    def attempt(name, fn):
        # a flagged failure discards the stage; a fresh sub-seed gives an independent repetition
        for k in range(pcfg.max_retries + 1):
            try:
                return stage(name, lambda: fn(cfg if k == 0 else cfg.with_(seed=cfg.seed + 1_000_003 * k)))
            except SubroutineFailure:
                if k == pcfg.max_retries:
                    raise

    dec = attempt("decompose", lambda c: decompose(X, A, tau, params, c, ledger, tau_cost=tau_cost,
                                                   est_factor=pcfg.est_factor))
    S = attempt("sample", lambda c: build_coreset(X, A, tau, params, t_sample, c, ledger, dec=dec))
    if pcfg.jl_dim is not None:
        # map back: centers and samples are dataset points, so reuse their coordinates
        src = S.source
        orig = np.where(src[:, None] >= 0, D.points[np.maximum(src, 0)],
                        D.points[bic.indices[np.maximum(-1 - src, 0)]])
        S = Coreset(orig, S.weights, src, S.meta)
    timings["total"] = time.perf_counter() - t0
    return PipelineResult(S, bic, dec, index, t_sample, ledger, stages, timings)
