"""Bicriteria approximation: O(log^2 n) k centers with cost 2^O(z) OPT.

Each trial repeatedly samples 13k*ceil(log n) points uniformly from the alive set
D_t plus one pivot s_t, maps every point to an approximate nearest sampled
center, and deletes every alive point no farther from its center than the pivot.
The alive set is never materialized for charging purposes: membership of x in
D_t is the nested predicate over all previous rounds, and every oracle call
that consumes it pays one data query plus one tau query per retained round.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import lsh
from .core import ClusteringParams, Dataset, nearest
from .qsim import (
    QueryCost,
    QueryLedger,
    SubroutineConfig,
    SubroutineFailure,
    qcount,
    qsample,
    qsearch_all,
)

SAMPLE_FACTOR = 13
STOP_FACTOR = 39
TRIALS = 3


def log2n(n: int) -> int:
    return max(1, math.ceil(math.log2(n))) if n > 1 else 1


@dataclass
class Round:
    """Deletion record of one round: tau distances of every point and the pivot threshold."""

    tau_dist: np.ndarray
    threshold: float
    cost: QueryCost
    centers: np.ndarray | None = None


@dataclass
class BicriteriaResult:
    A: np.ndarray
    indices: np.ndarray
    rounds: int
    trials: int
    trace: list = field(default_factory=list)
    failed_trials: int = 0
    round_log: list = field(default_factory=list, repr=False)

    def size_bound(self, k: int, n: int) -> int:
        lg = log2n(n)
        return SAMPLE_FACTOR * k * lg * 3 * lg * TRIALS + TRIALS * 2 * STOP_FACTOR * k * lg

    def to_dict(self) -> dict:
        return {"size": int(self.indices.size), "rounds": self.rounds, "trials": self.trials,
                "failed_trials": self.failed_trials, "trace": self.trace}


def alive_cost(rounds: list[Round]) -> QueryCost:
    """Cost of one evaluation of the membership oracle of D_t."""
    c = QueryCost(data_oracle=1, membership=1)
    for r in rounds:
        c = c + r.cost
    return c


def alive_predicate(rounds: list[Round], x_index: int, ledger: QueryLedger | None = None) -> bool:
    """x in D_t iff dist(x, tau_r(x)) > d_r for every round r so far."""
    if ledger is not None:
        ledger.charge(1, alive_cost(rounds))
    return all(r.tau_dist[x_index] > r.threshold for r in rounds)


def alive_mask(rounds: list[Round], n: int) -> np.ndarray:
    """Vectorized :func:`alive_predicate` over all of [n]; charges nothing."""
    mask = np.ones(n, dtype=bool)
    for r in rounds:
        mask &= r.tau_dist > r.threshold
    return mask


def _trial(X: np.ndarray, params: ClusteringParams, cfg: SubroutineConfig, ledger: QueryLedger,
           tag: str, ann: dict) -> tuple[np.ndarray, list, list]:
    n = X.shape[0]
    lg = log2n(n)
    k = params.k
    draws = SAMPLE_FACTOR * k * lg
    rounds: list[Round] = []
    A_idx = np.zeros(0, dtype=np.int64)
    trace = []
    t = 0
    r_est = float(n)
    while True:
        before = ledger.snapshot()
        alive = alive_mask(rounds, n)
        cost = alive_cost(rounds)
        got = qsample(alive.astype(np.float64), min(draws + 1, n), cfg, ledger, cost=cost,
                      label=f"{tag}/t{t}/sample")
        sample, pivot = got[:-1], int(got[-1])
        A_idx = np.union1d(A_idx, sample)
        index = lsh.build_index(X[A_idx], seed=int(cfg.rng(f"{tag}/t{t}/lsh").integers(2**31)), n=n, **ann)
        if cfg.exact:
            _, tdist = nearest(X, X[A_idx])
        else:
            _, tdist = lsh.query_many(index, X)
        threshold = float(tdist[pivot])
        rounds.append(Round(tdist, threshold, index.query_cost, A_idx))
        t += 1
        alive_next = alive_mask(rounds, n)
        r_est = qcount(n, alive_next, 0.5, cfg, ledger, cost=alive_cost(rounds), label=f"{tag}/t{t}/count")
        trace.append({
            "round": t, "sample_size": int(sample.size), "centers": int(A_idx.size), "pivot": pivot,
            "d_threshold": threshold, "survivors": int(alive_next.sum()), "r_estimate": r_est,
            "ledger": QueryLedger.diff(ledger.snapshot(), before),
        })
        if r_est <= STOP_FACTOR * k * lg:
            trace[-1]["exit"] = "small"
            break
        if t >= 3 * lg:
            trace[-1]["exit"] = "timeout"
            break
    rest = qsearch_all(n, alive_mask(rounds, n), cfg, ledger, cost=alive_cost(rounds), label=f"{tag}/all")
    return np.union1d(A_idx, rest), trace, rounds


def run_bicriteria(D: Dataset, params: ClusteringParams, cfg: SubroutineConfig, ledger: QueryLedger,
                   c_tau: float = lsh.DEFAULT_C, max_retries: int = 3,
                   keep_rounds: bool = False) -> BicriteriaResult:
    """Union of three independent trials of the deletion loop.

    A trial hit by a simulated subroutine failure is discarded and re-run, up
    to ``max_retries`` times per trial slot. ``keep_rounds`` retains every
    trial's per-round deletion records in ``round_log``.
    """
    n = D.n
    params.check(n)
    X = D.points
    lg = log2n(n)
    if n <= STOP_FACTOR * params.k * lg:
        # the stopping rule fires before the first round; enumerate D
        idx = qsearch_all(n, np.ones(n, dtype=bool), cfg, ledger, label="bicriteria/degenerate")
        return BicriteriaResult(X[idx], idx, 0, 0, [{"exit": "degenerate"}])
    ann = {"c_target": c_tau}
    chosen = np.zeros(0, dtype=np.int64)
    trace, total_rounds, failed, log = [], 0, 0, []
    for trial in range(TRIALS):
        for attempt in range(max_retries + 1):
            try:
                idx, tr, rounds = _trial(X, params, cfg, ledger, f"bicriteria/trial{trial}/a{attempt}", ann)
            except SubroutineFailure:
                failed += 1
                continue
            break
        else:
            continue
        chosen = np.union1d(chosen, idx)
        trace.append({"trial": trial, "rounds": tr})
        total_rounds += len(rounds)
        if keep_rounds:
            log.append(rounds)
    if chosen.size == 0:
        raise SubroutineFailure("bicriteria: every trial failed")
    return BicriteriaResult(X[chosen], chosen, total_rounds, len(trace), trace, failed, log)
