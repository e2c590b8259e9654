"""c-approximate nearest-neighbour index over a center set (the tau oracle).

Random-projection bucketing h(x) = floor((<g, x> + b) / w) with Gaussian g and
uniform b, K hashes concatenated per table and L tables per width level. Widths
double from the finest center spacing up to a multiple of the center diameter.
A query walks the levels from fine to coarse, scans its buckets exactly and
stops at the first level whose width is at least ``gamma`` times the best
distance seen; at that width the true neighbour collides with high probability.
Queries with no candidate at any level fall back to an exact scan.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .core import ContractViolation, as_centers, nearest
from .qsim import QueryCost, QueryLedger

log = logging.getLogger(__name__)

DEFAULT_C = 2.6
_MAX_L = 64


@dataclass
class _Table:
    proj: np.ndarray      # (d, K)
    offset: np.ndarray    # (K,)
    sorted_hash: np.ndarray
    order: np.ndarray     # center indices sorted by hash


@dataclass
class AnnIndex:
    centers: np.ndarray
    c_target: float
    delta_fail: float
    seed: int
    K: int
    L: int
    widths: np.ndarray
    gamma: float
    n: int
    cap: int
    levels: list = field(default_factory=list, repr=False)
    exact: bool = False
    self_check_failure: float = 0.0
    fallbacks: int = 0

    @property
    def m(self) -> int:
        return self.centers.shape[0]

    @property
    def d(self) -> int:
        return self.centers.shape[1]

    @property
    def qram_per_query(self) -> int:
        """QRAM reads per tau query: d * ceil(log2(m n / delta))^2."""
        lg = math.ceil(math.log2(self.m * self.n / self.delta_fail))
        return self.d * lg * lg

    @property
    def query_cost(self) -> QueryCost:
        return QueryCost(partition_oracle=1, qram=self.qram_per_query)


def _multipliers(rng, K):
    return rng.integers(1, 2**62, size=K, dtype=np.int64) | 1


_MULT = _multipliers(np.random.default_rng(12345), 16)


def _hash(X, proj, offset, width, mult):
    keys = np.floor((X @ proj + offset) / width).astype(np.int64)
    # int64 wraparound is the intended mixing
    with np.errstate(over="ignore"):
        return (keys * mult).sum(1)


def _collision_prob(u: float) -> float:
    """p-stable single-hash collision probability at distance/width ratio u."""
    from scipy.stats import norm

    if u <= 0:
        return 1.0
    return float(1 - 2 * norm.cdf(-1 / u) - 2 * u / math.sqrt(2 * math.pi) * (1 - math.exp(-1 / (2 * u * u))))


def choose_params(m: int, c_target: float, delta_fail: float) -> tuple[int, int, float]:
    """(K, L, gamma) from the rho = 1/c heuristic, with hard caps."""
    gamma = 4.0
    # miss probability of a neighbour at distance <= w / (gamma c) per hash
    p1 = _collision_prob(1 / (gamma * c_target))
    p2 = _collision_prob(1.0)
    K = int(np.clip(math.ceil(math.log(max(m, 2)) / math.log(1 / p2)), 1, 10))
    # L so that (1 - p1^K)^L <= delta_fail / 4
    L = math.ceil(math.log(delta_fail / 4) / math.log(max(1e-12, 1 - p1**K)))
    return K, int(np.clip(L, 1, 32)), gamma


def _level_widths(A: np.ndarray) -> np.ndarray:
    m = A.shape[0]
    lo, hi = A.min(0), A.max(0)
    diam = float(np.linalg.norm(hi - lo))
    if m == 1 or diam == 0.0:
        return np.array([1.0])
    # finest spacing among centers (sampled for large m)
    sample = A if m <= 2000 else A[np.random.default_rng(0).choice(m, 2000, replace=False)]
    from .core import sq_dists

    d2 = sq_dists(sample, A)
    d2[d2 == 0] = np.inf
    rmin = float(np.sqrt(d2.min()))
    if not np.isfinite(rmin):
        return np.array([1.0])
    top = 16.0 * diam
    nlev = max(1, math.ceil(math.log2(top / (rmin / 2))) + 1)
    return (rmin / 2) * 2.0 ** np.arange(nlev)


def _build_levels(A, widths, K, L, rng):
    levels = []
    for w in widths:
        tables = []
        for _ in range(L):
            proj = rng.standard_normal((A.shape[1], K))
            offset = rng.uniform(0, w, size=K)
            h = _hash(A, proj, offset, w, _MULT[:K])
            order = np.argsort(h, kind="stable")
            tables.append(_Table(proj, offset, h[order], order))
        levels.append(tables)
    return levels


def _query_batch(index: AnnIndex, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    A = index.centers
    q = X.shape[0]
    best = np.full(q, np.inf)
    arg = np.full(q, -1, dtype=np.int64)
    active = np.arange(q)
    mult = _MULT[: index.K]
    for w, tables in zip(index.widths, index.levels):
        if active.size == 0:
            break
        Xa = X[active]
        for tab in tables:
            h = _hash(Xa, tab.proj, tab.offset, w, mult)
            lo = np.searchsorted(tab.sorted_hash, h, "left")
            hi = np.searchsorted(tab.sorted_hash, h, "right")
            cnt = np.minimum(hi - lo, index.cap)
            tot = int(cnt.sum())
            if tot == 0:
                continue
            rows = np.repeat(np.arange(active.size), cnt)
            starts = np.repeat(lo - np.concatenate(([0], np.cumsum(cnt)[:-1])), cnt)
            cand = tab.order[starts + np.arange(tot)]
            diff = Xa[rows] - A[cand]
            dd = np.sqrt((diff * diff).sum(1))
            # best candidate per row: sort by (row, distance)
            o = np.lexsort((dd, rows))
            first = np.ones(o.size, dtype=bool)
            first[1:] = rows[o][1:] != rows[o][:-1]
            r, c, v = rows[o][first], cand[o][first], dd[o][first]
            gi = active[r]
            better = v < best[gi]
            best[gi[better]] = v[better]
            arg[gi[better]] = c[better]
        done = best[active] <= w / index.gamma
        active = active[~done]
    if active.size:
        index.fallbacks += int(active.size)
        j, dj = nearest(X[active], A)
        arg[active], best[active] = j, dj
    return arg, best


def build_index(A, c_target: float = DEFAULT_C, delta_fail: float = 0.01, seed: int = 0,
                n: int | None = None, K: int | None = None, L: int | None = None,
                check_queries: int = 512) -> AnnIndex:
    """Build an LSH index over ``A`` whose answers are within ``c_target`` of the nearest distance.

    ``n`` is the size of the dataset the resulting tau oracle will serve; it only
    enters the QRAM charge per query. A build-time self-check on perturbed
    centers doubles L until the empirical failure rate is at most
    ``delta_fail`` and degrades to exact search if the cap is reached.
    """
    if not 2.5 <= c_target < 3:
        raise ContractViolation("c_target must lie in [5/2, 3)")
    if not 0 < delta_fail < 1:
        raise ContractViolation("delta_fail must lie in (0, 1)")
    A = as_centers(A)
    m = A.shape[0]
    K0, L0, gamma = choose_params(m, c_target, delta_fail)
    K = K or K0
    L = L or L0
    widths = _level_widths(A)
    cap = max(16, 4 * K)
    index = AnnIndex(A, c_target, delta_fail, seed, K, L, widths, gamma, n or m, cap)
    rng = np.random.default_rng(seed)
    if m == 1:
        index.exact = True
        return index
    probe_rng = np.random.default_rng([seed, 1])
    probes = _probe_queries(A, widths, check_queries, probe_rng)
    _, exact_d = nearest(probes, A)
    while True:
        index.levels = _build_levels(A, widths, index.K, index.L, rng)
        _, got = _query_batch(index, probes)
        index.fallbacks = 0
        bad = got > c_target * exact_d * (1 + 1e-12) + 1e-300
        index.self_check_failure = float(bad.mean())
        if index.self_check_failure <= delta_fail:
            return index
        if index.L >= _MAX_L:
            log.warning("LSH self-check failed (rate %.4f) with L=%d; using exact search",
                        index.self_check_failure, index.L)
            index.exact = True
            index.levels = []
            return index
        index.L = min(_MAX_L, 2 * index.L)


def _probe_queries(A, widths, count, rng):
    base = A[rng.integers(0, A.shape[0], size=count)]
    scale = widths[rng.integers(0, widths.size, size=count)] / 4
    direction = rng.standard_normal((count, A.shape[1]))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    return base + direction * scale[:, None]


def query_many(index: AnnIndex, X) -> tuple[np.ndarray, np.ndarray]:
    """(center index, distance) for every row of X; no ledger charge."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != index.d:
        raise ContractViolation("query dimension does not match the index")
    if X.shape[0] == 0:
        return np.zeros(0, dtype=np.int64), np.zeros(0)
    if index.exact:
        return nearest(X, index.centers)
    return _query_batch(index, X)


def ann_query(index: AnnIndex, x, ledger: QueryLedger | None = None) -> int:
    """Approximate nearest center of one point; charges one tau query."""
    if ledger is not None:
        ledger.charge(1, index.query_cost)
    j, _ = query_many(index, np.asarray(x, dtype=np.float64)[None, :])
    return int(j[0])


def tau_map(index: AnnIndex, X, ledger: QueryLedger | None = None, exact: bool = False) -> np.ndarray:
    """tau over every row of X.

    With ``exact`` the exact nearest neighbour is substituted. When a ledger is
    given each point is charged as one tau query (eager evaluation); pipeline
    code instead charges tau through the cost profiles of the subroutines that
    consume it.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(-1, index.d) if X.size else np.zeros((0, index.d))
    if X.shape[0] == 0:
        return np.zeros(0, dtype=np.int64)
    if ledger is not None:
        ledger.charge(X.shape[0], index.query_cost)
    if exact:
        return nearest(X, index.centers)[0]
    return query_many(index, X)[0]
