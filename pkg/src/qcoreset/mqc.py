"""Multidimensional counting and bit-decomposed multidimensional summation.

``mqc_count`` estimates the size of every part of a partition [n] -> [m]
hierarchically: large parts are finalized from a coarse amplitude estimate,
the remaining mass is re-counted to factor 1/2, and the precision tightens as
the remaining mass shrinks. Once fewer than m/eps indices remain they are
enumerated and counted exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import ContractViolation
from .qsim import (
    QueryCost,
    Noise,
    QueryLedger,
    SubroutineConfig,
    multidim_amplitude_estimate,
    qcount,
    qsearch_all,
)

DEFAULT_FRAC_BITS = 20
_MEMBER = QueryCost(membership=1)


@dataclass
class PartitionOracle:
    """Labels in [0, m); any other label value is a discarded (sink) index.

    ``cost`` is the ledger charge of one oracle call.
    """

    labels: np.ndarray
    m: int
    values: np.ndarray | None = None
    M: float | None = None
    cost: QueryCost = field(default_factory=lambda: QueryCost(partition_oracle=1))

    def __post_init__(self):
        lab = np.asarray(self.labels, dtype=np.int64)
        if self.m < 1:
            raise ContractViolation("partition needs m >= 1")
        lab = np.where((lab >= 0) & (lab < self.m), lab, self.m)
        self.labels = lab
        if self.values is not None:
            v = np.asarray(self.values, dtype=np.float64)
            if v.shape != lab.shape:
                raise ContractViolation("one value per index required")
            if np.any(v < 0) or not np.isfinite(v).all():
                raise ContractViolation("values must be finite and nonnegative")
            self.values = v

    @property
    def n(self) -> int:
        return self.labels.size

    def histogram(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.m + 1)[: self.m]

    def sums(self) -> np.ndarray:
        return np.bincount(self.labels, weights=self.values, minlength=self.m + 1)[: self.m]


@dataclass
class MqcTrace:
    rounds: list = field(default_factory=list)
    enumerated: int = 0
    halving_ok: bool = True

    def to_dict(self) -> dict:
        return {"rounds": self.rounds, "enumerated": self.enumerated, "halving_ok": self.halving_ok}


def _log_n(n: int) -> int:
    return max(1, math.ceil(math.log2(max(n, 2))))


def mqc_count(oracle: PartitionOracle, eps: float, delta: float, cfg: SubroutineConfig,
              ledger: QueryLedger, label: str = "mqc", trace: MqcTrace | None = None) -> np.ndarray:
    """eps-estimates of every part size n_j, j in [m]."""
    if not 0 < eps < 1 / 3:
        raise ContractViolation("eps must lie in (0, 1/3)")
    n, m = oracle.n, oracle.m
    labels = oracle.labels
    call = oracle.cost + _MEMBER
    sub = cfg.with_(delta=min(cfg.delta, delta / _log_n(n)))
    trace = trace if trace is not None else MqcTrace()
    est = np.zeros(m)
    P = np.arange(m)
    lut = np.ones(m + 1, dtype=bool)
    lut[m] = False
    n_t, p_mt = float(n), 1.0
    rnd = 0
    # with n < m/eps already, the loop's exit condition holds before any round
    while n_t >= m / eps and P.size:
        rnd += 1
        before = ledger.total
        # 2/27 instead of 2/3 keeps finalized parts within (2/3) eps of their estimate
        precision = 2 * n_t * eps / (27 * n * m)
        p_hat = multidim_amplitude_estimate(labels, m, P, precision, p_mt, sub, ledger,
                                            cost=call, label=f"{label}/r{rnd}/ae")
        done = p_hat >= n_t / (9 * n * m)
        est[P[done]] = n * p_hat[done]
        if cfg.effective_noise is Noise.NONE:
            # exact probabilities; undo the n_j / n * n round-off
            est[P[done]] = np.rint(est[P[done]])
        lut[P[done]] = False
        P = P[~done]
        prev = n_t
        n_t = qcount(n, lut[labels], 0.5, sub, ledger, cost=call, label=f"{label}/r{rnd}/count")
        p_mt = 2 * n_t / n
        if n_t > prev / 2:
            trace.halving_ok = False
        trace.rounds.append({
            "round": rnd, "precision": precision, "finalized": int(done.sum()),
            "active": int(P.size), "n_tilde": n_t, "p_mt": p_mt,
            "charge": ledger.total - before,
        })
    rest = qsearch_all(n, lut[labels], sub, ledger, cost=call, label=f"{label}/all")
    trace.enumerated = int(rest.size)
    if P.size:
        est[P] = np.bincount(labels[rest], minlength=m + 1)[:m][P]
    return est


def value_bits(M: float, frac_bits: int) -> int:
    """Number of binary digits of floor(M * 2**frac_bits)."""
    return max(1, int(math.floor(M * 2.0**frac_bits)).bit_length())


def mqc_sum(oracle: PartitionOracle, eps: float, delta: float, cfg: SubroutineConfig,
            ledger: QueryLedger, frac_bits: int = DEFAULT_FRAC_BITS, label: str = "mqs",
            traces: list | None = None) -> np.ndarray:
    """eps-estimates (plus quantization slack n_j * 2**-frac_bits) of the per-part sums of values.

    Values are truncated to ``frac_bits`` fractional bits and every bit plane is
    counted with :func:`mqc_count`, indices with a zero bit going to the sink.
    """
    if oracle.values is None:
        raise ContractViolation("mqc_sum needs an oracle with values")
    f = oracle.values
    M = float(oracle.M) if oracle.M is not None else float(f.max(initial=0.0))
    if f.size and f.max() > M:
        raise ContractViolation(f"value {f.max()} exceeds the bound M={M}")
    if M * 2.0**frac_bits >= 2.0**62:
        raise ContractViolation("M too large for the fixed-point representation")
    q = np.floor(f * 2.0**frac_bits).astype(np.int64)
    bits = value_bits(M, frac_bits)
    m = oracle.m
    total = np.zeros(m)
    for t in range(bits):
        on = ((q >> t) & 1).astype(bool)
        plane = PartitionOracle(np.where(on, oracle.labels, m), m, cost=oracle.cost)
        tr = MqcTrace()
        cnt = mqc_count(plane, eps, delta / bits, cfg, ledger, label=f"{label}/b{t}", trace=tr)
        if traces is not None:
            traces.append(tr)
        total += cnt * 2.0 ** (t - frac_bits)
    return total
