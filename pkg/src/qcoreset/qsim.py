"""Simulated quantum query model.

Each subroutine computes its answer exactly, perturbs it within the advertised
error bound according to the configured noise policy, and charges the ledger a
deterministic, formula-based number of oracle calls. Charges never depend on
random draws, so two runs with the same call sequence and sizes charge the same
totals regardless of seed.
"""

from __future__ import annotations

import enum
import json
import math
import threading
import zlib
from dataclasses import dataclass, field, replace

import numpy as np

from .core import ContractViolation

KINDS = ("data_oracle", "partition_oracle", "qram", "membership")
_U64_MAX = 2**64 - 1
# keeps adversarial answers strictly inside the bound after rounding
_SAFETY = 1.0 - 1e-12


class SubroutineFailure(RuntimeError):
    """A simulated subroutine hit its failure event (probability delta)."""

    def __init__(self, name: str):
        super().__init__(f"simulated failure in {name}")
        self.name = name


class OracleMode(enum.Enum):
    SIMULATED_QUANTUM = "quantum-sim"
    CLASSICAL_EXACT = "classical-exact"


class Noise(enum.Enum):
    NONE = "none"
    UNIFORM = "uniform"
    ADVERSARIAL = "adversarial"


@dataclass(frozen=True)
class QueryCost:
    """Ledger charge incurred by one call to some composed oracle."""

    data_oracle: int = 0
    partition_oracle: int = 0
    qram: int = 0
    membership: int = 0

    def __add__(self, other: "QueryCost") -> "QueryCost":
        return QueryCost(*(getattr(self, k) + getattr(other, k) for k in KINDS))

    def __mul__(self, times: int) -> "QueryCost":
        return QueryCost(*(getattr(self, k) * int(times) for k in KINDS))

    __rmul__ = __mul__


DATA_QUERY = QueryCost(data_oracle=1)
MEMBERSHIP_QUERY = QueryCost(data_oracle=1, membership=1)


class QueryLedger:
    """Monotone per-kind counters of charged oracle queries. Thread-safe."""

    def __init__(self):
        self._lock = threading.Lock()
        self._counts = dict.fromkeys(KINDS, 0)
        self.failures = 0
        self.failure_log: list[str] = []

    def charge(self, calls: int, cost: QueryCost = DATA_QUERY):
        if calls < 0:
            raise ContractViolation("negative charge")
        with self._lock:
            for k in KINDS:
                v = self._counts[k] + int(calls) * getattr(cost, k)
                if v > _U64_MAX:
                    raise OverflowError(f"ledger counter {k} overflowed u64")
                self._counts[k] = v

    def record_failure(self, name: str):
        with self._lock:
            self.failures += 1
            self.failure_log.append(name)

    def merge(self, other: "QueryLedger"):
        snap = other.snapshot()
        self.charge(1, QueryCost(*(snap[k] for k in KINDS)))
        with self._lock:
            self.failures += other.failures
            self.failure_log.extend(other.failure_log)

    def __getitem__(self, kind: str) -> int:
        return self._counts[kind]

    @property
    def total(self) -> int:
        return sum(self._counts.values())

    def snapshot(self) -> dict:
        with self._lock:
            snap = dict(self._counts)
        snap["total"] = sum(snap[k] for k in KINDS)
        return snap

    def to_json(self) -> str:
        return json.dumps(self.snapshot())

    @staticmethod
    def diff(after: dict, before: dict) -> dict:
        return {k: after[k] - before[k] for k in (*KINDS, "total")}


@dataclass(frozen=True)
class Constants:
    """Hidden constants of the charging formulas."""

    c_samp: float = 1.0
    c_cnt: float = 1.0
    c_all: float = 1.0
    c_sum: float = 1.0
    c_ae: float = 1.0


@dataclass(frozen=True)
class SubroutineConfig:
    delta: float = 1e-3
    seed: int = 0
    noise: Noise = Noise.NONE
    mode: OracleMode = OracleMode.SIMULATED_QUANTUM
    inject_failures: bool = False
    constants: Constants = field(default_factory=Constants)

    def __post_init__(self):
        if not 0 < self.delta < 1:
            raise ContractViolation("delta must lie in (0, 1)")
        object.__setattr__(self, "noise", Noise(self.noise))
        object.__setattr__(self, "mode", OracleMode(self.mode))

    @property
    def effective_noise(self) -> Noise:
        return Noise.NONE if self.mode is OracleMode.CLASSICAL_EXACT else self.noise

    @property
    def exact(self) -> bool:
        return self.mode is OracleMode.CLASSICAL_EXACT

    def with_(self, **changes) -> "SubroutineConfig":
        return replace(self, **changes)

    def rng(self, label: str) -> np.random.Generator:
        """Independent stream for (seed, label); insensitive to call scheduling."""
        key = tuple(zlib.crc32(part.encode()) for part in label.split("/"))
        return np.random.default_rng(np.random.SeedSequence(self.seed & _U64_MAX, spawn_key=key))


def _log_inv(delta: float) -> float:
    return math.log(1.0 / delta)


def _maybe_fail(name: str, cfg: SubroutineConfig, rng: np.random.Generator, ledger: QueryLedger):
    if cfg.inject_failures and cfg.effective_noise is not Noise.NONE and rng.random() < cfg.delta:
        ledger.record_failure(name)
        raise SubroutineFailure(name)


def _perturb(truth, bound, cfg: SubroutineConfig, rng: np.random.Generator):
    """Move ``truth`` by at most ``bound`` according to the noise policy."""
    truth = np.asarray(truth, dtype=np.float64)
    bound = np.broadcast_to(np.asarray(bound, dtype=np.float64), truth.shape) * _SAFETY
    noise = cfg.effective_noise
    if noise is Noise.NONE:
        return truth.copy()
    if noise is Noise.UNIFORM:
        return truth + rng.uniform(-1.0, 1.0, size=truth.shape) * bound
    sign = rng.choice(np.array([-1.0, 1.0]), size=truth.shape)
    return truth + sign * bound


def _mask(membership, n: int) -> np.ndarray:
    if callable(membership):
        mask = np.asarray(membership(np.arange(n)), dtype=bool)
    else:
        mask = np.asarray(membership, dtype=bool)
    if mask.shape != (n,):
        raise ContractViolation(f"membership must cover exactly {n} indices")
    return mask


# ---- charging formulas -------------------------------------------------------

def sample_charge(n: int, m: int, cfg: SubroutineConfig) -> int:
    return math.ceil(cfg.constants.c_samp * math.sqrt(n * m) * _log_inv(cfg.delta))


def count_charge(n: int, size: int, eps: float, cfg: SubroutineConfig) -> int:
    return math.ceil(cfg.constants.c_cnt / eps * math.sqrt(n / max(size, 1)) * _log_inv(cfg.delta))


def search_all_charge(n: int, size: int, cfg: SubroutineConfig) -> int:
    # ln n clamped at 1 so that n = 1 still costs a query
    return math.ceil(cfg.constants.c_all * math.sqrt(n * max(size, 1))
                     * max(math.log(n), 1.0) * _log_inv(cfg.delta))


def sum_charge(n: int, eps: float, cfg: SubroutineConfig) -> int:
    return math.ceil(cfg.constants.c_sum * math.sqrt(n) * _log_inv(cfg.delta) / eps)


def amplitude_charge(m: int, precision: float, p_mt: float, cfg: SubroutineConfig) -> int:
    return math.ceil(cfg.constants.c_ae * math.sqrt(p_mt) / precision * math.log(max(m, 1) / cfg.delta))


# ---- subroutines -------------------------------------------------------------

def qsample(weights, m: int, cfg: SubroutineConfig, ledger: QueryLedger,
            cost: QueryCost = DATA_QUERY, label: str = "qsample") -> np.ndarray:
    """m i.i.d. indices drawn proportionally to ``weights``."""
    w = np.asarray(weights, dtype=np.float64)
    n = w.size
    if np.any(w < 0) or not np.isfinite(w).all():
        raise ContractViolation("weights must be finite and nonnegative")
    total = w.sum()
    if total <= 0:
        raise ContractViolation("qsample needs a nonzero weight vector")
    if not 1 <= m <= n:
        raise ContractViolation(f"need 1 <= m <= n, got m={m}, n={n}")
    ledger.charge(sample_charge(n, m, cfg), cost)
    rng = cfg.rng(label)
    _maybe_fail("qsample", cfg, rng, ledger)
    return rng.choice(n, size=m, replace=True, p=w / total)


def qcount(n: int, membership, eps: float, cfg: SubroutineConfig, ledger: QueryLedger,
           cost: QueryCost = MEMBERSHIP_QUERY, label: str = "qcount") -> float:
    """eps-estimate of the number of members of [n]."""
    if eps <= 0:
        raise ContractViolation("eps must be positive")
    size = int(_mask(membership, n).sum())
    ledger.charge(count_charge(n, size, eps, cfg), cost)
    rng = cfg.rng(label)
    _maybe_fail("qcount", cfg, rng, ledger)
    return float(_perturb(size, eps * size, cfg, rng))


def qsearch_all(n: int, membership, cfg: SubroutineConfig, ledger: QueryLedger,
                cost: QueryCost = MEMBERSHIP_QUERY, label: str = "qsearch_all") -> np.ndarray:
    """All member indices, exactly."""
    idx = np.flatnonzero(_mask(membership, n))
    ledger.charge(search_all_charge(n, idx.size, cfg), cost)
    _maybe_fail("qsearch_all", cfg, cfg.rng(label), ledger)
    return idx


def qsum(values, eps: float, cfg: SubroutineConfig, ledger: QueryLedger,
         cost: QueryCost = DATA_QUERY, label: str = "qsum") -> float:
    """eps-estimate of the sum of nonnegative ``values``."""
    v = np.asarray(values, dtype=np.float64)
    if eps <= 0:
        raise ContractViolation("eps must be positive")
    if np.any(v < 0):
        raise ContractViolation("qsum values must be nonnegative")
    ledger.charge(sum_charge(v.size, eps, cfg), cost)
    rng = cfg.rng(label)
    _maybe_fail("qsum", cfg, rng, ledger)
    total = float(np.sum(v))
    return float(_perturb(total, eps * total, cfg, rng))


def multidim_amplitude_estimate(labels, m: int, active, precision: float, p_mt: float,
                                cfg: SubroutineConfig, ledger: QueryLedger,
                                cost: QueryCost = QueryCost(partition_oracle=1, membership=1),
                                label: str = "mae") -> np.ndarray:
    """Additive ``precision`` estimates of p_j = n_j / n for every label j in ``active``.

    ``labels`` maps [n] to [0, m]; values outside [0, m) never count towards any
    active label. The result is aligned with ``active``.
    """
    active = np.asarray(active, dtype=np.int64)
    if not 0 < precision < 1 / 3:
        raise ContractViolation("precision must lie in (0, 1/3)")
    if active.size == 0:
        return np.zeros(0)
    labels = np.asarray(labels, dtype=np.int64)
    n = labels.size
    inside = (labels >= 0) & (labels < m)
    hist = np.bincount(labels[inside], minlength=m)
    p = hist[active] / n
    if p.sum() > p_mt * (1 + 1e-12):
        raise ContractViolation(f"p_mt={p_mt} below the true active mass {p.sum()}")
    ledger.charge(amplitude_charge(m, precision, p_mt, cfg), cost)
    rng = cfg.rng(label)
    _maybe_fail("multidim_amplitude_estimate", cfg, rng, ledger)
    return np.clip(_perturb(p, precision, cfg, rng), 0.0, 1.0)
