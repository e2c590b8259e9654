"""Geometry, cost functions and the weighted point-set data model."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class ContractViolation(ValueError):
    """Raised when an operation's preconditions do not hold."""


class _Degenerate:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "DEGENERATE"

    def __bool__(self):
        return False


#: Returned by :func:`coreset_distortion` when cost(D, C) == 0.
DEGENERATE = _Degenerate()


def _as_points(x, name="points") -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2:
        raise ContractViolation(f"{name} must be a 2-d array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ContractViolation(f"{name} contain non-finite coordinates")
    return arr


@dataclass(frozen=True)
class Dataset:
    """n points in R^d, optionally weighted. Indices are 0-based and stable."""

    points: np.ndarray
    weights: np.ndarray | None = None

    def __post_init__(self):
        pts = _as_points(self.points)
        if pts.shape[0] < 1 or pts.shape[1] < 1:
            raise ContractViolation("dataset needs n >= 1 and d >= 1")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=np.float64)
            if w.shape != (pts.shape[0],) or np.any(w < 0) or not np.all(np.isfinite(w)):
                raise ContractViolation("weights must be finite, nonnegative, one per point")
            w.setflags(write=False)
            object.__setattr__(self, "weights", w)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def subset(self, idx) -> "Dataset":
        w = None if self.weights is None else self.weights[idx]
        return Dataset(self.points[idx], w)


@dataclass(frozen=True)
class Coreset:
    """Weighted point set. ``source`` optionally records dataset indices (-1 for centers)."""

    points: np.ndarray
    weights: np.ndarray
    source: np.ndarray | None = field(default=None, compare=False)
    meta: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2:
            raise ContractViolation("coreset points must be 2-d")
        w = np.asarray(self.weights, dtype=np.float64)
        if w.shape != (pts.shape[0],):
            raise ContractViolation("one weight per coreset point required")
        if np.any(w < 0) or not np.isfinite(w.sum()):
            raise ContractViolation("coreset weights must be nonnegative with finite total")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    def __len__(self):
        return self.points.shape[0]

    @property
    def total_weight(self) -> float:
        return float(self.weights.sum())

    @classmethod
    def from_dataset(cls, D: Dataset) -> "Coreset":
        w = np.ones(D.n) if D.weights is None else D.weights
        return cls(D.points, w, np.arange(D.n))


@dataclass(frozen=True)
class ClusteringParams:
    k: int
    z: float = 2.0
    eps: float = 0.2

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise ContractViolation("k must be a positive integer")
        if self.z < 1:
            raise ContractViolation("z must be >= 1")
        if not 0 < self.eps < 0.5:
            raise ContractViolation("eps must lie in (0, 1/2)")

    def check(self, n: int):
        if self.k > n:
            raise ContractViolation(f"k={self.k} exceeds n={n}")


def as_centers(C) -> np.ndarray:
    C = _as_points(C, "centers")
    if C.shape[0] < 1:
        raise ContractViolation("center set must be nonempty")
    return C


def dist(x, y) -> float:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ContractViolation(f"dimension mismatch: {x.shape} vs {y.shape}")
    return float(np.sqrt(np.sum((x - y) ** 2)))


def power(d: np.ndarray, z: float) -> np.ndarray:
    """d**z for d >= 0; z in {1, 2} take the exact route."""
    if z == 1:
        return d
    if z == 2:
        return d * d
    out = np.zeros_like(d)
    pos = d > 0
    out[pos] = np.exp(z * np.log(d[pos]))
    return out


def sq_dists(X: np.ndarray, C: np.ndarray) -> np.ndarray:
    """(n, m) matrix of squared Euclidean distances, clipped at zero."""
    d2 = (X * X).sum(1)[:, None] - 2.0 * (X @ C.T) + (C * C).sum(1)[None, :]
    np.maximum(d2, 0.0, out=d2)
    return d2


def nearest(X: np.ndarray, C: np.ndarray, chunk: int = 4096) -> tuple[np.ndarray, np.ndarray]:
    """Exact nearest center index and distance for every row of X."""
    X = np.asarray(X, dtype=np.float64)
    C = np.asarray(C, dtype=np.float64)
    if X.shape[1] != C.shape[1]:
        raise ContractViolation("dimension mismatch between points and centers")
    n = X.shape[0]
    idx = np.empty(n, dtype=np.int64)
    dd = np.empty(n)
    # keep each block at ~32 MB
    step = max(1, min(chunk, (4 << 20) // max(1, C.shape[0])))
    for s in range(0, n, step):
        d2 = sq_dists(X[s:s + step], C)
        j = d2.argmin(1)
        idx[s:s + step] = j
        # recompute the winner directly; the expanded form loses precision near 0
        diff = X[s:s + step] - C[j]
        dd[s:s + step] = np.sqrt((diff * diff).sum(1))
    return idx, dd


def _points_and_weights(D):
    if isinstance(D, Coreset):
        return D.points, D.weights
    if isinstance(D, Dataset):
        return D.points, D.weights
    return _as_points(D), None


def cost(D, C, z: float) -> float:
    """Weighted sum of dist(x, C)**z; unweighted inputs use weight 1."""
    if z < 1:
        raise ContractViolation("z must be >= 1")
    X, w = _points_and_weights(D)
    C = as_centers(C)
    if X.shape[0] == 0:
        return 0.0
    _, dd = nearest(X, C)
    terms = power(dd, z)
    if w is not None:
        terms = terms * w
    # numpy reduces contiguous float arrays pairwise
    return float(np.sum(terms))


def cost_tau(D, A, tau, z: float, subset=None) -> float:
    """Sum of dist(x_s, A[tau[s]])**z over ``subset`` (all indices when None)."""
    X, w = _points_and_weights(D)
    A = as_centers(A)
    tau = np.asarray(tau, dtype=np.int64)
    idx = np.arange(X.shape[0]) if subset is None else np.asarray(subset, dtype=np.int64)
    if idx.size == 0:
        return 0.0
    t = tau[idx]
    if np.any(t < 0) or np.any(t >= A.shape[0]):
        raise ContractViolation("tau maps an index outside the center set")
    diff = X[idx] - A[t]
    terms = power(np.sqrt((diff * diff).sum(1)), z)
    if w is not None:
        terms = terms * w[idx]
    return float(np.sum(terms))


def coreset_distortion(D, S, C, z: float):
    """|cost(S, C) - cost(D, C)| / cost(D, C), or DEGENERATE when cost(D, C) == 0."""
    full = cost(D, C, z)
    if full == 0.0:
        return DEGENERATE
    return abs(cost(S, C, z) - full) / full


def jl_project(D: Dataset, target_dim: int, seed: int) -> Dataset:
    """Seeded Gaussian projection to ``target_dim`` coordinates, scaled by 1/sqrt(target_dim)."""
    if int(target_dim) != target_dim or target_dim < 1:
        raise ContractViolation("target_dim must be a positive integer")
    rng = np.random.default_rng(seed)
    G = rng.standard_normal((D.d, int(target_dim))) / np.sqrt(target_dim)
    return Dataset(D.points @ G, D.weights)


def distance_range(D: Dataset, sample: int = 2000, seed: int = 0) -> dict:
    """Min nonzero pairwise distance and diameter, over a sample when n is large.

    Diagnostic only: the algorithms never rescale the data.
    """
    X = D.points
    if X.shape[0] > sample:
        X = X[np.random.default_rng(seed).choice(X.shape[0], sample, replace=False)]
    dd = np.sqrt(sq_dists(X, X))
    nz = dd[dd > 0]
    return {
        "n": D.n,
        "sampled": int(X.shape[0]),
        "min_nonzero": float(nz.min()) if nz.size else 0.0,
        "diameter": float(dd.max()),
        "ratio": float(dd.max() / nz.min()) if nz.size else 1.0,
    }
