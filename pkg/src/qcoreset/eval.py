"""Benchmarks: synthetic generators, classical baselines, distortion probes, scaling fits."""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .core import (
    DEGENERATE,
    ClusteringParams,
    ContractViolation,
    Coreset,
    Dataset,
    _points_and_weights,
    cost,
    coreset_distortion,
    nearest,
    power,
)
from .mqc import PartitionOracle, mqc_count
from .qsim import QueryLedger, SubroutineConfig

GENERATORS = ("blobs", "uniform", "skewed")


@dataclass(frozen=True)
class BenchSpec:
    """``spread`` is the side of the box holding the blob means."""

    generator: str = "blobs"
    n: int = 10_000
    d: int = 10
    k: int = 5
    z: float = 2.0
    eps: float = 0.2
    seeds: tuple = (0,)
    center_probes: int = 100
    sigma: float = 0.5
    separation: float = 3.0
    spread: float = 20.0

    def __post_init__(self):
        if self.generator not in GENERATORS:
            raise ContractViolation(f"unknown generator {self.generator!r}")
        if min(self.n, self.d, self.k) < 1:
            raise ContractViolation("n, d, k must be positive")
        if self.center_probes < 1:
            raise ContractViolation("center_probes must be >= 1")
        object.__setattr__(self, "seeds", tuple(self.seeds))

    @property
    def params(self) -> ClusteringParams:
        return ClusteringParams(self.k, self.z, self.eps)

    def to_dict(self) -> dict:
        return asdict(self)


def _place_means(k, d, separation, spread, rng, attempts=10_000):
    if d == 1 and (k - 1) * separation > spread:
        raise ContractViolation(f"cannot place {k} means {separation} apart on a segment of length {spread}")
    means = []
    tries = 0
    while len(means) < k:
        c = rng.uniform(-spread / 2, spread / 2, size=d)
        if all(np.linalg.norm(c - m) >= separation for m in means):
            means.append(c)
            continue
        tries += 1
        if tries > attempts:
            raise ContractViolation(f"separation {separation} infeasible for k={k} in d={d} (box {spread})")
    return np.array(means)


def generate(spec: BenchSpec, seed: int) -> tuple[Dataset, np.ndarray | None]:
    """Dataset plus the generating means (None for the uniform cube)."""
    rng = np.random.default_rng([seed, GENERATORS.index(spec.generator)])
    n, d, k = spec.n, spec.d, spec.k
    if spec.generator == "uniform":
        return Dataset(rng.uniform(0.0, 1.0, size=(n, d))), None
    means = _place_means(k, d, spec.separation, spec.spread, rng)
    if spec.generator == "blobs":
        sizes = np.full(k, n // k)
        sizes[: n % k] += 1
        sigma = np.full(k, spec.sigma)
    else:
        # geometric cluster sizes, tighter clusters for the large ones
        share = 0.5 ** np.arange(k)
        sizes = np.floor(n * share / share.sum()).astype(int)
        sizes[0] += n - sizes.sum()
        sigma = spec.sigma * 2.0 ** (np.arange(k) / max(1, k - 1))
    X = np.concatenate([means[i] + sigma[i] * rng.standard_normal((sizes[i], d)) for i in range(k)])
    return Dataset(X), means


def gen_dataset(spec: BenchSpec, seed: int) -> Dataset:
    return generate(spec, seed)[0]


# ---- classical baseline -----------------------------------------------------

def _seed_centers(X, w, k, z, rng):
    """Greedy k-means++: 2 + ln k candidates per step, keep the one lowering cost most."""
    n = X.shape[0]
    trials = 2 + int(math.log(k))
    first = rng.choice(n, p=w / w.sum())
    idx = [first]
    dz = power(np.sqrt(((X - X[first]) ** 2).sum(1)), z)
    for _ in range(1, k):
        p = w * dz
        if p.sum() <= 0:
            # every remaining point duplicates a chosen center
            rest = np.setdiff1d(np.arange(n), idx)
            j = rng.choice(rest) if rest.size else rng.integers(n)
            idx.append(j)
            dz = np.minimum(dz, power(np.sqrt(((X - X[j]) ** 2).sum(1)), z))
            continue
        cand = rng.choice(n, size=trials, p=p / p.sum())
        best = None
        for j in cand:
            nd = np.minimum(dz, power(np.sqrt(((X - X[j]) ** 2).sum(1)), z))
            val = float(np.sum(w * nd))
            if best is None or val < best[0]:
                best = (val, j, nd)
        idx.append(best[1])
        dz = best[2]
    return X[np.array(idx)].copy()


def _weiszfeld(P, w, z, start, iters=50):
    """Weighted minimizer of sum w dist^z for z >= 1 by iteratively reweighted means."""
    c = start
    for _ in range(iters):
        r = np.sqrt(((P - c) ** 2).sum(1))
        r = np.maximum(r, 1e-12)
        coef = w * r ** (z - 2)
        nc = (coef[:, None] * P).sum(0) / coef.sum()
        if np.linalg.norm(nc - c) <= 1e-10 * (1 + np.linalg.norm(c)):
            return nc
        c = nc
    return c


def _lloyd(X, w, C, z, max_iter, tol):
    k = C.shape[0]
    prev = math.inf
    for _ in range(max_iter):
        lab, dd = nearest(X, C)
        cur = float(np.sum(w * power(dd, z)))
        if prev - cur <= tol * max(cur, 1e-300):
            break
        prev = cur
        for i in range(k):
            sel = lab == i
            wi = w[sel]
            if wi.sum() <= 0:
                continue
            if z == 2:
                C[i] = (wi[:, None] * X[sel]).sum(0) / wi.sum()
            else:
                C[i] = _weiszfeld(X[sel], wi, z, C[i])
    _, dd = nearest(X, C)
    return C, float(np.sum(w * power(dd, z)))


def kmeanspp_lloyd(D, params: ClusteringParams, seed: int, max_iter: int = 100, tol: float = 1e-9,
                   n_init: int = 3) -> np.ndarray:
    """Greedy k-means++ seeding followed by Lloyd steps; best of ``n_init`` restarts.

    For z != 2 the update step is the weighted Weiszfeld iteration, which is
    the geometric median at z = 1. Accepts weighted inputs (Coreset or Dataset).
    """
    X, w = _points_and_weights(D)
    w = np.ones(X.shape[0]) if w is None else np.asarray(w, dtype=np.float64)
    params.check(X.shape[0])
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(n_init):
        C, val = _lloyd(X, w, _seed_centers(X, w, params.k, params.z, rng), params.z, max_iter, tol)
        if best is None or val < best[1]:
            best = (C, val)
    return best[0]


# ---- distortion probes --------------------------------------------------------

@dataclass
class DistortionReport:
    distortions: list
    max_distortion: float
    mean_distortion: float
    coreset_size: int
    ledger: dict = field(default_factory=dict)
    wall_clock: float = 0.0
    notes: list = field(default_factory=list)
    config: dict = field(default_factory=dict)

    def to_dict(self, timings: bool = True) -> dict:
        out = asdict(self)
        if not timings:
            out.pop("wall_clock")
        return out


def probe_distortion(D, S: Coreset, params: ClusteringParams, probes: int, seed: int,
                     true_means=None, ledger: QueryLedger | None = None) -> DistortionReport:
    """coreset_distortion over random bounding-box center sets and fitted centers."""
    if probes < 1:
        raise ContractViolation("probes must be >= 1")
    t0 = time.perf_counter()
    X, _ = _points_and_weights(D)
    k, z = params.k, params.z
    rng = np.random.default_rng([seed, 7])
    lo, hi = X.min(0), X.max(0)
    cands = [("random", rng.uniform(lo, hi, size=(k, X.shape[1]))) for _ in range(probes)]
    cands.append(("kmeans++ on D", kmeanspp_lloyd(D, params, seed)))
    cands.append(("kmeans++ on S", kmeanspp_lloyd(S, params, seed)))
    if true_means is not None:
        cands.append(("true means", np.asarray(true_means, dtype=np.float64)))
    rows, notes = [], []
    for i, (kind, C) in enumerate(cands):
        dv = coreset_distortion(D, S, C, z)
        if dv is DEGENERATE:
            notes.append(f"probe {i} ({kind}) has zero cost on D; skipped")
            continue
        rows.append({"probe": i, "kind": kind, "distortion": float(dv)})
    vals = np.array([r["distortion"] for r in rows]) if rows else np.zeros(1)
    return DistortionReport(rows, float(vals.max()), float(vals.mean()), len(S),
                            {} if ledger is None else ledger.snapshot(),
                            time.perf_counter() - t0, notes,
                            {"k": k, "z": z, "eps": params.eps, "probes": probes, "seed": seed})


# ---- scaling ------------------------------------------------------------------

def fit_slope(x, y) -> float:
    """Least-squares slope of log y against log x."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.size < 2:
        raise ContractViolation("need at least two grid points to fit a slope")
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


@dataclass
class ScalingTable:
    axis: str
    rows: list
    slope: float
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def scaling_experiment(specs: list[BenchSpec], cfg: SubroutineConfig, axis: str = "n",
                       pcfg=None, seed: int = 0) -> ScalingTable:
    """Full pipeline per grid point; slope of the total ledger against ``axis``."""
    from .pipeline import PipelineConfig, run_pipeline

    if not specs:
        raise ContractViolation("scaling grid is empty")
    pcfg = pcfg or PipelineConfig()
    rows = []
    for spec in specs:
        D = gen_dataset(spec, seed)
        t0 = time.perf_counter()
        res = run_pipeline(D, spec.params, cfg.with_(seed=cfg.seed + seed), QueryLedger(), pcfg)
        snap = res.ledger.snapshot()
        rows.append({"n": spec.n, "k": spec.k, "eps": spec.eps, "d": spec.d, **snap,
                     "centers": int(res.bicriteria.indices.size), "coreset_size": len(res.coreset),
                     "failures": res.ledger.failures, "seconds": time.perf_counter() - t0})
    slope = fit_slope([r[axis] for r in rows], [r["total"] for r in rows])
    return ScalingTable(axis, rows, slope, {"pipeline": pcfg.to_dict(), "seed": seed,
                                            "noise": cfg.noise.value, "mode": cfg.mode.value})


def mqc_scaling(ns, m, eps: float, cfg: SubroutineConfig, skew: float = 0.0,
                seed: int = 0) -> ScalingTable:
    """Ledger of mqc_count alone on random partitions of [n] into m parts.

    Exactly one of ``ns`` and ``m`` is a grid; the other is a scalar.
    """
    axis = "m" if np.ndim(m) else "n"
    pairs = [(int(ns), int(v)) for v in m] if axis == "m" else [(int(v), int(m)) for v in ns]
    rows = []
    for n, parts in pairs:
        rng = np.random.default_rng([seed, n, parts])
        p = np.exp(-skew * np.arange(parts))
        labels = rng.choice(parts, size=n, p=p / p.sum())
        led = QueryLedger()
        mqc_count(PartitionOracle(labels, parts), eps, cfg.delta, cfg, led)
        rows.append({"n": n, "m": parts, "eps": eps, **led.snapshot()})
    return ScalingTable(axis, rows, fit_slope([r[axis] for r in rows], [r["total"] for r in rows]))


def benchmark_seed(spec: BenchSpec, seed: int, cfg: SubroutineConfig, pcfg=None, slack: float = 4.0,
                   cost_slack: float | None = None) -> dict:
    """One seed of the blob benchmark: coreset distortion, bicriteria size and cost against k-means++."""
    from .pipeline import PipelineConfig, run_pipeline

    D, means = generate(spec, seed)
    params = spec.params
    t0 = time.perf_counter()
    res = run_pipeline(D, params, cfg.with_(seed=seed), QueryLedger(), pcfg or PipelineConfig())
    rep = probe_distortion(D, res.coreset, params, spec.center_probes, seed, true_means=means)
    seconds = time.perf_counter() - t0
    base = cost(D, kmeanspp_lloyd(D, params, seed), params.z)
    bic = cost(D, res.bicriteria.A, params.z)
    cost_slack = 2.0 ** (params.z + 3) if cost_slack is None else cost_slack
    size = int(res.bicriteria.indices.size)
    bound = res.bicriteria.size_bound(params.k, D.n)
    return {
        "seed": seed, "n": D.n, "coreset_size": len(res.coreset),
        "max_distortion": rep.max_distortion, "distortion_ok": rep.max_distortion <= slack * params.eps,
        "centers": size, "center_bound": bound, "size_ok": size <= bound,
        "bicriteria_cost": bic, "baseline_cost": base, "cost_ratio": bic / base,
        "cost_ok": bic <= cost_slack * base, "failures": res.ledger.failures,
        "ledger_total": res.ledger.total, "seconds": seconds, "notes": rep.notes,
    }


# ---- output -----------------------------------------------------------------

def write_json(obj, path):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_jsonable)
        fh.write("\n")


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"not serializable: {type(o)}")


def write_rows_csv(rows: list[dict], path):
    keys = list(rows[0]) if rows else []
    with open(path, "w", newline="") as fh:
        wr = csv.DictWriter(fh, fieldnames=keys)
        wr.writeheader()
        wr.writerows(rows)


def plot_scaling(table: ScalingTable, path):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    x = np.array([r[table.axis] for r in table.rows], dtype=float)
    y = np.array([r["total"] for r in table.rows], dtype=float)
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.loglog(x, y, "o-", label=f"measured (slope {table.slope:.2f})")
    ax.loglog(x, y[0] * np.sqrt(x / x[0]), "--", color="gray", label="slope 0.5")
    ax.set_xlabel(table.axis)
    ax.set_ylabel("total charged queries")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def plot_distortions(report: DistortionReport, path):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5, 4))
    ax.hist([r["distortion"] for r in report.distortions], bins=30)
    ax.set_xlabel("distortion")
    ax.set_ylabel("probes")
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
