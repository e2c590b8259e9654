"""Acceptance criteria, each at its stated tolerance; one PASS/FAIL line per criterion."""

import math
import time

import numpy as np
import pytest

from qcoreset.core import ClusteringParams, nearest
from qcoreset.coreset import build_coreset, decompose
from qcoreset.eval import BenchSpec, benchmark_seed, mqc_scaling, scaling_experiment
from qcoreset.lsh import build_index, query_many
from qcoreset.mqc import PartitionOracle, mqc_count, mqc_sum
from qcoreset.qsim import Noise, OracleMode, QueryLedger, SubroutineConfig, SubroutineFailure

from reference import reference_decomposition
from verdicts import record

ADV = SubroutineConfig(noise=Noise.ADVERSARIAL)
EXACT = SubroutineConfig(mode=OracleMode.CLASSICAL_EXACT)
BLOBS = BenchSpec("blobs", n=10_000, d=10, k=5, z=2.0, eps=0.2, seeds=tuple(range(10)))
EPS_GRID = (0.05, 0.1, 0.33)


@pytest.fixture(scope="module")
def blob_runs():
    return [benchmark_seed(BLOBS, s, ADV) for s in BLOBS.seeds]


def test_coreset_guarantee_on_blobs(blob_runs, capsys):
    hits = sum(r["distortion_ok"] for r in blob_runs)
    slow = max(r["seconds"] for r in blob_runs)
    worst = max(r["max_distortion"] for r in blob_runs)
    ok = hits >= 9 and slow <= 60
    assert record(capsys, 1, "coreset distortion <= 4 eps in >= 9/10 seeds, <= 60 s per seed", ok,
                  f"{hits}/10 seeds within 0.8, worst distortion {worst:.4g}, slowest seed {slow:.1f} s")


def test_bicriteria_guarantee_on_blobs(blob_runs, capsys):
    k, n = BLOBS.k, BLOBS.n
    lg = math.ceil(math.log2(n))
    bound = 13 * k * lg * 3 * lg * 3 + 6 * 39 * k * lg
    sizes = [r["centers"] for r in blob_runs]
    cost_hits = sum(r["bicriteria_cost"] <= 2 ** (BLOBS.z + 3) * r["baseline_cost"] for r in blob_runs)
    ok = max(sizes) <= bound and cost_hits >= 8
    ratios = [r["cost_ratio"] for r in blob_runs]
    assert record(capsys, 2, "|A| within bound always, cost(D,A) <= 2^(z+3) x k-means++ in >= 8/10", ok,
                  f"max |A| {max(sizes)} of bound {bound}, cost within slack in {cost_hits}/10, "
                  f"ratio range [{min(ratios):.3g}, {max(ratios):.3g}]")


def _random_partition(rng, n, m):
    alpha = rng.choice([0.1, 1.0, 10.0])
    p = rng.dirichlet(np.full(m, alpha))
    labels = rng.choice(m, size=n, p=p)
    # a few parts left empty on purpose
    empty = rng.random(m) < 0.1
    return np.where(empty[labels], (labels + 1) % m, labels) if not empty.all() else labels


def test_multidimensional_counting(capsys):
    rng = np.random.default_rng(3)
    cfg = ADV.with_(delta=0.01, inject_failures=True)
    flagged, bad, worst = 0, 0, 0.0
    for r in range(50):
        n = 2 ** int(rng.integers(10, 15))
        m = int(rng.integers(2, 65))
        eps = float(rng.choice(EPS_GRID))
        oracle = PartitionOracle(_random_partition(rng, n, m), m)
        try:
            est = mqc_count(oracle, eps, cfg.delta, cfg.with_(seed=r), QueryLedger())
        except SubroutineFailure:
            flagged += 1
            continue
        true = oracle.histogram()
        err = np.abs(est - true)
        bad += int(np.any(err > eps * true + 1e-9))
        worst = max(worst, float(np.max(err / np.maximum(eps * true, 1e-300), initial=0.0)))
    ok = bad == 0 and flagged < 50
    assert record(capsys, 3, "every n_j within eps n_j, 100% of non-flagged runs", ok,
                  f"{50 - flagged - bad}/{50 - flagged} non-flagged runs within, {flagged} flagged, "
                  f"worst error/eps n_j {worst:.3f}")


def test_multidimensional_summation(capsys):
    rng = np.random.default_rng(4)
    cfg = ADV.with_(delta=0.01, inject_failures=True)
    runs, flagged, bad = 30, 0, 0
    for r in range(runs):
        n = 2 ** int(rng.integers(10, 14))
        m = int(rng.integers(2, 33))
        eps = float(rng.choice(EPS_GRID))
        M = float(rng.choice([1.0, 16.0, 1000.0]))
        f = rng.uniform(0, M, n) * (rng.random(n) < 0.8)
        oracle = PartitionOracle(_random_partition(rng, n, m), m, values=f, M=M)
        try:
            est = mqc_sum(oracle, eps, cfg.delta, cfg.with_(seed=r), QueryLedger())
        except SubroutineFailure:
            flagged += 1
            continue
        s = oracle.sums()
        bad += int(np.any(np.abs(est - s) > eps * s + n * 2.0**-20))
    ok = bad == 0 and flagged < runs
    assert record(capsys, 4, "per-label sums within eps s_j + n 2^-20, 100% of non-flagged runs", ok,
                  f"{runs - flagged - bad}/{runs - flagged} non-flagged runs within, {flagged} flagged")


def test_query_scaling(capsys):
    t0 = time.perf_counter()
    ns = [2**e for e in range(10, 17)]
    iso_n = mqc_scaling(ns, 4, 0.25, ADV).slope
    e2e_n = scaling_experiment([BenchSpec("blobs", n=n, d=5, k=4, eps=0.25) for n in ns], ADV, "n").slope
    iso_k = mqc_scaling(2**14, [2, 4, 8, 16], 0.25, ADV).slope
    e2e_k = scaling_experiment([BenchSpec("blobs", n=2**14, d=5, k=k, eps=0.25) for k in (2, 4, 8, 16)],
                               ADV, "k").slope
    seconds = time.perf_counter() - t0
    checks = {"mqc_count vs n": (iso_n, 0.15), "pipeline vs n": (e2e_n, 0.15),
              "mqc_count vs k": (iso_k, 0.2), "pipeline vs k": (e2e_k, 0.2)}
    ok = all(abs(s - 0.5) <= tol for s, tol in checks.values()) and seconds <= 600
    detail = ", ".join(f"{name} {s:.3f} ({'ok' if abs(s - 0.5) <= tol else 'out'})"
                       for name, (s, tol) in checks.items())
    assert record(capsys, 5, "ledger slopes 0.5 +- 0.15 vs n and 0.5 +- 0.2 vs k, <= 10 min", ok,
                  f"{detail}, {seconds:.0f} s")


def test_ann_contract(capsys):
    rng = np.random.default_rng(6)
    d = 10
    A = rng.uniform(0, 1, (200, d))
    Q = rng.uniform(-0.25, 1.25, (10_000, d))
    index = build_index(A, c_target=2.6, seed=6)
    got, _ = query_many(index, Q)
    d_got = np.linalg.norm(Q - A[got], axis=1)
    all_d = np.linalg.norm(Q[:, None, :] - A[None, :, :], axis=2)
    d_min = all_d.min(axis=1)
    within = float(np.mean(d_got <= 2.6 * d_min))
    better = int(np.sum(d_got < d_min))
    ok = within >= 0.99 and better == 0
    assert record(capsys, 6, "ANN within c_tau for >= 99% of 10^4 queries, never below exact", ok,
                  f"{100 * within:.2f}% within c_tau, {better} answers below exact, "
                  f"max ratio {float(np.max(d_got / d_min)):.3f}")


def _equivalence_instances():
    rng = np.random.default_rng(7)
    for i in range(24):
        n = int(rng.integers(20, 2001))
        m = int(rng.integers(1, 13))
        d = int(rng.integers(1, 6))
        z = float(rng.choice([1.0, 2.0, 3.0]))
        eps = float(rng.choice([0.1, 0.2, 0.33]))
        A = rng.uniform(-10, 10, (m, d))
        X = A[rng.integers(0, m, n)] + rng.standard_normal((n, d)) * rng.exponential(1, (n, 1)) ** 2
        X[rng.random(n) < 0.05] = A[0]
        tau = nearest(X, A)[0] if i % 3 else rng.integers(0, m, n)
        yield X, A, tau, ClusteringParams(max(1, m), z, eps)


def test_oracle_equivalence(capsys):
    count, mismatches = 0, []
    for X, A, tau, p in _equivalence_instances():
        count += 1
        ref, _, size = reference_decomposition(X, A, tau, p.z, p.eps)
        dec = decompose(X, A, tau, p, EXACT, QueryLedger())
        same = dec.assignments() == ref
        S = build_coreset(X, A, tau, p, 7, EXACT, QueryLedger(), dec=dec)
        first = np.array([r[1] == "I" or r[2] == "min" for r in ref])
        weights = np.bincount(tau[first], minlength=A.shape[0])
        same &= S.meta["center_weights"] == weights.tolist()
        key = [None if f else (r[1], r[2]) for f, r in zip(first, ref)]
        members = {}
        for s, kk in enumerate(key):
            if kk is not None:
                members.setdefault(kk, set()).add(s)
        sampled = {(g["j"], g["b"]): g for g in S.meta["groups"]}
        same &= set(sampled) == set(members) and not S.meta["skipped"]
        for kk, g in sampled.items():
            same &= g["size"] == len(members.get(kk, ())) and set(g["indices"].tolist()) <= members.get(kk, set())
        if not same:
            mismatches.append(count)
    ok = not mismatches
    assert record(capsys, 7, "exact-mode rings, groups and center weights equal the loop reference (n <= 2000)",
                  ok, f"{count - len(mismatches)}/{count} instances identical"
                  + (f", mismatches at {mismatches}" if mismatches else ""))


def test_unbiased_group_costs(capsys):
    rng = np.random.default_rng(8)
    n, m, d = 500, 4, 3
    A = rng.uniform(-8, 8, (m, d))
    X = A[rng.integers(0, m, n)] + rng.standard_normal((n, d)) * rng.exponential(1, (n, 1))
    tau = nearest(X, A)[0]
    p = ClusteringParams(3, 2.0, 0.2)
    dec = decompose(X, A, tau, p, EXACT, QueryLedger())
    lab = dec.group_label()
    probes = [rng.uniform(-10, 10, (p.k, d)) for _ in range(5)]
    est = {}
    for s in range(200):
        S = build_coreset(X, A, tau, p, 5, EXACT.with_(seed=s), QueryLedger(), dec=dec)
        for g in S.meta["groups"]:
            pts = X[g["indices"]]
            for c, C in enumerate(probes):
                dz = nearest(pts, C)[1] ** p.z
                est.setdefault((g["label"], c), []).append(float(np.sum(g["weights"] * dz)))
    worst, bad = 0.0, 0
    for (g, c), vals in est.items():
        truth = float(np.sum(nearest(X[lab == g], probes[c])[1] ** p.z))
        se = np.std(vals, ddof=1) / math.sqrt(len(vals))
        gap = abs(np.mean(vals) - truth)
        # single-member groups have zero spread; they must then be exact up to rounding
        bad += int(gap > 5 * se + 1e-9 * truth)
        if 5 * se > 1e-9 * truth:
            worst = max(worst, gap / se)
    groups = len({g for g, _ in est})
    ok = bad == 0 and groups > 0 and all(len(v) == 200 for v in est.values())
    assert record(capsys, 8, "sampled group costs unbiased within 5 SE for 5 probe sets over 200 seeds", ok,
                  f"{groups} groups x 5 probes, {bad} outside, worst gap {worst:.2f} SE")
