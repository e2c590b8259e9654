import json

import numpy as np
import pytest

from qcoreset.core import ClusteringParams, ContractViolation, Coreset, Dataset, cost, coreset_distortion
from qcoreset.eval import (
    BenchSpec,
    benchmark_seed,
    fit_slope,
    gen_dataset,
    generate,
    kmeanspp_lloyd,
    mqc_scaling,
    plot_distortions,
    plot_scaling,
    probe_distortion,
    scaling_experiment,
    write_json,
    write_rows_csv,
)
from qcoreset.qsim import Noise, SubroutineConfig


def test_uniform_cube():
    D = gen_dataset(BenchSpec("uniform", n=10, d=2), 0)
    assert D.n == 10 and np.all((D.points >= 0) & (D.points <= 1))


def test_zero_variance_blobs():
    D = gen_dataset(BenchSpec("blobs", n=4, d=3, k=2, sigma=0.0), 1)
    uniq = np.unique(D.points, axis=0)
    assert uniq.shape[0] == 2


@pytest.mark.parametrize("gen", ["blobs", "skewed"])
def test_means_separated_and_deterministic(gen):
    spec = BenchSpec(gen, n=500, d=3, k=6, separation=4.0)
    D, mu = generate(spec, 2)
    pd = np.sqrt(((mu[:, None] - mu[None]) ** 2).sum(-1))
    assert pd[np.triu_indices(6, 1)].min() >= 4.0
    assert D.n == 500
    assert np.array_equal(D.points, gen_dataset(spec, 2).points)


def test_infeasible_separation():
    with pytest.raises(ContractViolation):
        gen_dataset(BenchSpec("blobs", n=10, d=1, k=5, separation=10.0, spread=20.0), 0)
    with pytest.raises(ContractViolation):
        gen_dataset(BenchSpec("blobs", n=10, d=2, k=50, separation=10.0, spread=20.0), 0)


def test_spec_validation():
    with pytest.raises(ContractViolation):
        BenchSpec("nope")
    with pytest.raises(ContractViolation):
        BenchSpec(center_probes=0)


def test_kmeans_distinct_points():
    X = np.array([[0.0, 0], [5, 5], [9, 1]])
    C = kmeanspp_lloyd(Dataset(X), ClusteringParams(3), 0)
    assert cost(X, C, 2) == 0
    assert sorted(map(tuple, C)) == sorted(map(tuple, X))


@pytest.mark.parametrize("z", [1.0, 2.0])
def test_kmeans_blobs_near_truth(z):
    spec = BenchSpec("blobs", n=2000, d=4, k=4, z=z, separation=8.0)
    D, mu = generate(spec, 3)
    C = kmeanspp_lloyd(D, spec.params, 1)
    assert cost(D, C, z) <= 2 * cost(D, mu, z)
    assert np.array_equal(C, kmeanspp_lloyd(D, spec.params, 1))


def test_kmeans_weighted_matches_duplicated():
    r = np.random.default_rng(0)
    X = r.normal(size=(40, 2))
    w = r.integers(1, 4, 40).astype(float)
    C = kmeanspp_lloyd(Coreset(X, w), ClusteringParams(2), 0)
    assert C.shape == (2, 2)
    # weighted Lloyd fixed point: each center is the weighted mean of its cell
    from qcoreset.core import nearest

    lab, _ = nearest(X, C)
    for i in range(2):
        sel = lab == i
        assert np.allclose(C[i], (w[sel, None] * X[sel]).sum(0) / w[sel].sum(), atol=1e-6)


def test_probe_identity_zero():
    D, mu = generate(BenchSpec("blobs", n=300, d=2, k=3), 0)
    rep = probe_distortion(D, Coreset.from_dataset(D), ClusteringParams(3), 25, 0, true_means=mu)
    assert rep.max_distortion == 0 and len(rep.distortions) == 25 + 3
    assert rep.coreset_size == 300


def test_probe_uniform_sample_matches_recomputation():
    D = gen_dataset(BenchSpec("uniform", n=1000, d=2), 1)
    idx = np.random.default_rng(0).choice(1000, 100, replace=False)
    S = Coreset(D.points[idx], np.full(100, 10.0))
    rep = probe_distortion(D, S, ClusteringParams(2), 10, 4)
    lo, hi = D.points.min(0), D.points.max(0)
    r = np.random.default_rng([4, 7])
    first = r.uniform(lo, hi, size=(2, 2))
    assert rep.distortions[0]["distortion"] == pytest.approx(coreset_distortion(D, S, first, 2), rel=1e-12)
    assert all(row["distortion"] >= 0 for row in rep.distortions)


def test_probe_skips_degenerate():
    X = np.zeros((5, 1))
    rep = probe_distortion(Dataset(X), Coreset.from_dataset(Dataset(X)), ClusteringParams(1), 1, 0,
                           true_means=[[0.0]])
    assert any("zero cost" in n for n in rep.notes)


def test_probe_report_reproducible(tmp_path):
    D, mu = generate(BenchSpec("blobs", n=400, d=2, k=2), 0)
    S = Coreset(D.points[::2], np.full(200, 2.0))
    a = probe_distortion(D, S, ClusteringParams(2), 10, 5, true_means=mu).to_dict(timings=False)
    b = probe_distortion(D, S, ClusteringParams(2), 10, 5, true_means=mu).to_dict(timings=False)
    write_json(a, tmp_path / "a.json")
    write_json(b, tmp_path / "b.json")
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


def test_fit_slope():
    x = np.array([1, 2, 4, 8.0])
    assert fit_slope(x, 3 * x**0.5) == pytest.approx(0.5)
    with pytest.raises(ContractViolation):
        fit_slope([1], [1])


def test_scaling_experiment_rows_and_outputs(tmp_path):
    specs = [BenchSpec("blobs", n=n, d=3, k=2) for n in (300, 600)]
    table = scaling_experiment(specs, SubroutineConfig(noise=Noise.UNIFORM), "n")
    assert [r["n"] for r in table.rows] == [300, 600]
    assert all(r["total"] > 0 for r in table.rows)
    write_rows_csv(table.rows, tmp_path / "t.csv")
    assert (tmp_path / "t.csv").read_text().count("\n") == 3
    plot_scaling(table, tmp_path / "t.svg")
    assert (tmp_path / "t.svg").read_text().lstrip().startswith("<?xml")
    with pytest.raises(ContractViolation):
        scaling_experiment([], SubroutineConfig())


def test_mqc_scaling_slope():
    t = mqc_scaling([2**e for e in range(10, 17)], 4, 0.25, SubroutineConfig(noise=Noise.ADVERSARIAL))
    assert abs(t.slope - 0.5) <= 0.1


def test_mqc_scaling_over_parts():
    t = mqc_scaling(2**12, [2, 4, 8], 0.25, SubroutineConfig())
    assert t.axis == "m" and [r["m"] for r in t.rows] == [2, 4, 8]
    assert all(r["n"] == 2**12 for r in t.rows)
    # more parts never get cheaper to count
    assert all(a["total"] <= b["total"] for a, b in zip(t.rows, t.rows[1:]))


def test_benchmark_seed_row():
    r = benchmark_seed(BenchSpec("blobs", n=600, d=3, k=2, center_probes=5), 0, SubroutineConfig())
    assert r["size_ok"] and r["centers"] <= r["center_bound"]
    assert r["cost_ratio"] == pytest.approx(r["bicriteria_cost"] / r["baseline_cost"])
    assert r["distortion_ok"] == (r["max_distortion"] <= 4 * 0.2)


def test_distortion_plot(tmp_path):
    D, _ = generate(BenchSpec("blobs", n=100, d=2, k=2), 0)
    rep = probe_distortion(D, Coreset.from_dataset(D), ClusteringParams(2), 5, 0)
    plot_distortions(rep, tmp_path / "h.svg")
    json.dumps(rep.to_dict())
    assert (tmp_path / "h.svg").exists()
