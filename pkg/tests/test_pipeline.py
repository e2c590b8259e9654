import numpy as np

from qcoreset.core import ClusteringParams, Dataset, coreset_distortion
from qcoreset.eval import BenchSpec, generate
from qcoreset.pipeline import PipelineConfig, run_pipeline
from qcoreset.qsim import KINDS, Noise, OracleMode, QueryLedger, SubroutineConfig


def small():
    return generate(BenchSpec("blobs", n=3000, d=4, k=3), 0)


def test_pipeline_metrics_and_quality():
    D, mu = small()
    res = run_pipeline(D, ClusteringParams(3, 2.0, 0.2), SubroutineConfig(noise=Noise.ADVERSARIAL, seed=1))
    m = res.metrics()
    assert set(m["ledger"]) == {*KINDS, "total"}
    assert set(m["stage_ledger"]) == {"bicriteria", "tau", "decompose", "sample"}
    assert sum(v["total"] for v in m["stage_ledger"].values()) == m["ledger"]["total"]
    assert m["coreset_size"] == len(res.coreset)
    assert coreset_distortion(D, res.coreset, mu, 2) <= 0.8


def test_pipeline_deterministic():
    D, _ = small()
    c = SubroutineConfig(noise=Noise.UNIFORM, seed=4)
    a = run_pipeline(D, ClusteringParams(3), c)
    b = run_pipeline(D, ClusteringParams(3), c)
    assert np.array_equal(a.coreset.points, b.coreset.points)
    assert np.array_equal(a.coreset.weights, b.coreset.weights)
    assert a.ledger.snapshot() == b.ledger.snapshot()


def test_pipeline_classical_exact_and_small_t():
    D, mu = small()
    res = run_pipeline(D, ClusteringParams(3), SubroutineConfig(mode=OracleMode.CLASSICAL_EXACT),
                       pcfg=PipelineConfig(t_sample=50))
    assert res.tau_index is None and res.t_sample == 50
    assert coreset_distortion(D, res.coreset, mu, 2) <= 0.8


def test_pipeline_jl_keeps_original_coordinates():
    D, mu = generate(BenchSpec("blobs", n=3000, d=30, k=3), 1)
    res = run_pipeline(D, ClusteringParams(3), SubroutineConfig(seed=2), pcfg=PipelineConfig(jl_dim=8))
    S = res.coreset
    assert S.points.shape[1] == 30
    samp = S.source >= 0
    assert np.array_equal(S.points[samp], D.points[S.source[samp]])
    assert coreset_distortion(D, S, mu, 2) <= 0.8


def test_pipeline_degenerate_small_input():
    D = Dataset(np.random.default_rng(0).normal(size=(50, 2)))
    res = run_pipeline(D, ClusteringParams(2), SubroutineConfig())
    assert res.bicriteria.trace[0]["exit"] == "degenerate"
    assert res.coreset.total_weight == 50
