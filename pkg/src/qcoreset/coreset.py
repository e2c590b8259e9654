"""Ring/group decomposition and sensitivity sampling around a bicriteria solution.

Every point s is assigned to a cluster i = tau(s) and a ring

    j = floor(log2(cost_tau(x_s) / Delta_i)),   Delta_i = cost_tau(C_i) / |C_i|,

clamped to Inner (j <= -2z log2(z/eps)) or Outer (j > 2z log2(z/eps)). For
each non-inner ring level j the rings R_{i,j} are banded by their cost relative
to (eps/4z)^z cost(R_j)/m into groups G_{j,b}; b <= 0 is the cheapest group
(Min) and b >= z log2(4z/eps) the most expensive (Max).

The coreset is A, weighted by the size of the cheap mass attached to each
center, plus t i.i.d. samples from every well-structured group (probability
proportional to Delta of the point's cluster) and from every outer group
(probability proportional to the point's own cost).

All cluster sizes and cost sums are eps/est_factor estimates obtained from
multidimensional counting/summation.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .core import ClusteringParams, ContractViolation, Coreset, as_centers, power
from .mqc import PartitionOracle, mqc_count, mqc_sum
from .qsim import QueryCost, QueryLedger, SubroutineConfig, qsample

DEFAULT_EST_FACTOR = 4.0
SIGNIFICANT_BITS = 20


class RingKind(enum.IntEnum):
    INNER = 0
    BAND = 1
    OUTER = 2


class GroupKind(enum.IntEnum):
    MIN = 0
    BAND = 1
    MAX = 2


@dataclass(frozen=True)
class Banding:
    """Integer band ranges implied by (z, eps)."""

    z: float
    eps: float

    @property
    def ring_limit(self) -> float:
        return 2 * self.z * math.log2(self.z / self.eps)

    @property
    def j_lo(self) -> int:
        return math.floor(-self.ring_limit) + 1

    @property
    def j_hi(self) -> int:
        return math.floor(self.ring_limit)

    @property
    def group_limit(self) -> float:
        return self.z * math.log2(4 * self.z / self.eps)

    @property
    def b_hi(self) -> int:
        """Largest band index b strictly below the Max threshold."""
        return math.ceil(self.group_limit) - 1

    @property
    def ring_slots(self) -> int:
        """Band levels plus Outer (Inner rings are never grouped)."""
        return self.j_hi - self.j_lo + 2

    @property
    def group_slots(self) -> int:
        return self.b_hi + 2

    def max_groups(self) -> int:
        return (2 * math.ceil(self.ring_limit) + 3) * (math.ceil(self.group_limit) + 2)

    def ring_of(self, ratio: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(kind, j) for cost/Delta ratios; ratio <= 0 or non-finite means Inner."""
        ratio = np.asarray(ratio, dtype=np.float64)
        kind = np.full(ratio.shape, RingKind.INNER, dtype=np.int8)
        j = np.zeros(ratio.shape, dtype=np.int64)
        ok = (ratio > 0) & np.isfinite(ratio)
        j[ok] = floor_log2(ratio[ok])
        kind[ok & (j > self.j_hi)] = RingKind.OUTER
        kind[ok & (j >= self.j_lo) & (j <= self.j_hi)] = RingKind.BAND
        return kind, j

    def group_of(self, ratio: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(kind, b) for ring-cost / base ratios; ratio <= 0 means Min."""
        ratio = np.asarray(ratio, dtype=np.float64)
        kind = np.full(ratio.shape, GroupKind.MIN, dtype=np.int8)
        b = np.zeros(ratio.shape, dtype=np.int64)
        ok = ratio > 0
        b[ok] = floor_log2(ratio[ok])
        kind[ok & (b >= 1)] = GroupKind.BAND
        kind[ok & (b >= self.group_limit)] = GroupKind.MAX
        return kind, b


def floor_log2(r: np.ndarray) -> np.ndarray:
    """Exact floor(log2(r)) for positive finite r; powers of two map to their own band."""
    _, e = np.frexp(r)
    return e.astype(np.int64) - 1


@dataclass
class Decomposition:
    params: ClusteringParams
    banding: Banding
    m: int
    tau: np.ndarray
    point_cost: np.ndarray
    cluster_size: np.ndarray
    cluster_cost: np.ndarray
    delta: np.ndarray
    ring_kind: np.ndarray
    ring_j: np.ndarray
    ring_cost: np.ndarray          # (m, ring_slots); slot = j - j_lo, Outer last
    ring_total: np.ndarray         # (ring_slots,)
    group_kind: np.ndarray         # per point; meaningless for Inner points
    group_b: np.ndarray
    group_cost: np.ndarray         # (ring_slots * group_slots,)
    tolerance: float
    oracle_cost: QueryCost = field(default_factory=QueryCost)

    @property
    def n(self) -> int:
        return self.tau.size

    def ring_slot(self) -> np.ndarray:
        """Dense ring slot per point, -1 for Inner."""
        b = self.banding
        slot = np.where(self.ring_kind == RingKind.OUTER, b.ring_slots - 1, self.ring_j - b.j_lo)
        return np.where(self.ring_kind == RingKind.INNER, -1, slot)

    def group_slot(self) -> np.ndarray:
        b = self.banding
        return np.select([self.group_kind == GroupKind.MIN, self.group_kind == GroupKind.MAX],
                         [0, b.group_slots - 1], np.clip(self.group_b, 1, b.b_hi))

    def group_label(self) -> np.ndarray:
        """Dense group id per point, -1 for Inner points."""
        rs = self.ring_slot()
        lab = rs * self.banding.group_slots + self.group_slot()
        return np.where(rs < 0, -1, lab)

    def first_kind(self) -> np.ndarray:
        """Points whose mass is carried by the center weights: Inner rings and every Min group."""
        return (self.ring_kind == RingKind.INNER) | (self.group_kind == GroupKind.MIN)

    def assignments(self) -> list[tuple]:
        """(cluster, ring, band) per point; ring is 'I', 'O' or j, band is 'min', 'max', b or None."""
        out = []
        for i, rk, j, gk, b in zip(self.tau.tolist(), self.ring_kind.tolist(), self.ring_j.tolist(),
                                   self.group_kind.tolist(), self.group_b.tolist()):
            if rk == RingKind.INNER:
                out.append((i, "I", None))
                continue
            ring = "O" if rk == RingKind.OUTER else j
            band = "min" if gk == GroupKind.MIN else "max" if gk == GroupKind.MAX else b
            out.append((i, ring, band))
        return out

    def describe_group(self, label: int) -> dict:
        b = self.banding
        rs, gs = divmod(int(label), b.group_slots)
        ring = "O" if rs == b.ring_slots - 1 else int(rs + b.j_lo)
        band = "min" if gs == 0 else "max" if gs == b.group_slots - 1 else int(gs)
        return {"label": int(label), "j": ring, "b": band}


def _fixed_point_bits(values: np.ndarray) -> int:
    """Fractional bits giving the smallest nonzero value SIGNIFICANT_BITS significant bits."""
    pos = values[values > 0]
    if pos.size == 0:
        return SIGNIFICANT_BITS
    extra = max(0, -math.floor(math.log2(pos.min())))
    top = math.ceil(math.log2(max(values.max(), 1.0)))
    return int(min(SIGNIFICANT_BITS + extra, 60 - top))


def _estimate_sums(labels, m, values, eps, delta, cfg, ledger, cost, label):
    oracle = PartitionOracle(labels, m, values=values, cost=cost)
    est = mqc_sum(oracle, eps, delta, cfg, ledger, frac_bits=_fixed_point_bits(values), label=label)
    return oracle.sums() if cfg.exact else est


def decompose(X, A, tau, params: ClusteringParams, cfg: SubroutineConfig, ledger: QueryLedger,
              tau_cost: QueryCost = QueryCost(partition_oracle=1),
              est_factor: float = DEFAULT_EST_FACTOR, delta: float | None = None) -> Decomposition:
    """Phase one: cluster, ring and group statistics, all from multidimensional estimates."""
    X = np.asarray(X, dtype=np.float64)
    A = as_centers(A)
    tau = np.asarray(tau, dtype=np.int64)
    n, m = X.shape[0], A.shape[0]
    if tau.shape != (n,) or tau.min() < 0 or tau.max() >= m:
        raise ContractViolation("tau must map every point to a center")
    z, eps = params.z, params.eps
    tol = eps / est_factor
    delta = cfg.delta if delta is None else delta
    band = Banding(z, eps)
    # U: O_tau, O_D and O_A; U_R adds the Delta table, U_G the ring-cost table
    U = tau_cost + QueryCost(data_oracle=1, qram=1)
    U_R = U + QueryCost(qram=1)
    U_G = U_R + QueryCost(qram=1)

    diff = X - A[tau]
    cost_x = power(np.sqrt((diff * diff).sum(1)), z)

    size = mqc_count(PartitionOracle(tau, m, cost=U), tol, delta, cfg, ledger, label="dec/size")
    if cfg.exact:
        size = np.bincount(tau, minlength=m).astype(np.float64)
    csum = _estimate_sums(tau, m, cost_x, tol, delta, cfg, ledger, U, "dec/ccost")
    used = np.bincount(tau, minlength=m) > 0
    if np.any(used & (size <= 0)):
        raise ContractViolation("a nonempty cluster received a zero size estimate")
    Delta = np.divide(csum, size, out=np.zeros(m), where=size > 0)

    ratio = np.divide(cost_x, Delta[tau], out=np.zeros(n), where=Delta[tau] > 0)
    rkind, rj = band.ring_of(ratio)

    R = band.ring_slots
    slot = np.where(rkind == RingKind.OUTER, R - 1, rj - band.j_lo)
    ring_lab = np.where(rkind == RingKind.INNER, -1, tau * R + slot)
    rcost = _estimate_sums(ring_lab, m * R, cost_x, tol, delta, cfg, ledger, U_R, "dec/ring")
    rcost = rcost.reshape(m, R)
    rtotal = rcost.sum(0)

    base = (eps / (4 * z)) ** z * rtotal / m
    gratio = np.divide(rcost, base[None, :], out=np.zeros_like(rcost), where=base[None, :] > 0)
    ring_gkind, ring_gb = band.group_of(gratio)
    inner = rkind == RingKind.INNER
    safe_slot = np.where(inner, 0, slot)
    gkind = np.where(inner, GroupKind.MIN, ring_gkind[tau, safe_slot]).astype(np.int8)
    gb = np.where(inner, 0, ring_gb[tau, safe_slot])

    dec = Decomposition(params, band, m, tau, cost_x, size, csum, Delta, rkind, rj, rcost, rtotal,
                        gkind, gb, np.zeros(R * band.group_slots), tol, U_G)
    glab = dec.group_label()
    dec.group_cost = _estimate_sums(glab, R * band.group_slots, cost_x, tol, delta, cfg, ledger,
                                    U_G, "dec/group")
    return dec


def default_sample_size(params: ClusteringParams, m: int, d: int, n: int, C_t: float = 1.0,
                        c_z: float = 1.0, cap: int | None = None) -> int:
    """C_t 2^(c_z z) m (d + log2 n) max(eps^-2, eps^-z), optionally capped."""
    if min(m, d, n) < 1:
        raise ContractViolation("m, d, n must be positive")
    eps, z = params.eps, params.z
    t = C_t * 2 ** (c_z * z) * m * (d + math.log2(n)) * max(eps**-2, eps**-z)
    t = max(1, math.ceil(t - 1e-9))
    return min(t, cap) if cap is not None else t


def build_coreset(X, A, tau, params: ClusteringParams, t_sample: int, cfg: SubroutineConfig,
                  ledger: QueryLedger, dec: Decomposition | None = None, **decompose_kw) -> Coreset:
    """Phase two: center weights from the first-kind mass plus per-group sensitivity samples.

    ``Coreset.source`` holds the dataset index of each sampled point and -1 - i
    for center i. ``meta`` records every group's draws and probabilities.
    """
    X = np.asarray(X, dtype=np.float64)
    A = as_centers(A)
    n, m = X.shape[0], A.shape[0]
    if t_sample < 1:
        raise ContractViolation("t_sample must be positive")
    t = int(min(t_sample, n))
    if dec is None:
        dec = decompose(X, A, tau, params, cfg, ledger, **decompose_kw)
    tau = dec.tau
    U_G = dec.oracle_cost
    delta = decompose_kw.get("delta", cfg.delta)

    first = dec.first_kind()
    wa = mqc_count(PartitionOracle(np.where(first, tau, m), m, cost=U_G), dec.tolerance, delta,
                   cfg, ledger, label="core/center")
    if cfg.exact:
        wa = np.bincount(tau[first], minlength=m).astype(np.float64)

    glab = np.where(first, -1, dec.group_label())
    G = dec.banding.ring_slots * dec.banding.group_slots
    outer_slot = dec.banding.ring_slots - 1
    # normalizers of the well-structured sampling distribution
    Z = _estimate_sums(glab, G, dec.delta[tau], dec.tolerance, delta, cfg, ledger, U_G, "core/norm")

    meta = {"groups": [], "skipped": [], "t": t, "center_weights": wa.tolist()}
    idx_parts, w_parts, lab_parts = [], [], []
    for g in np.unique(glab[glab >= 0]):
        members = glab == g
        info = dec.describe_group(g)
        outer = g // dec.banding.group_slots == outer_slot
        if outer:
            weights = np.where(members, dec.point_cost, 0.0)
            norm = dec.group_cost[g]
        else:
            weights = np.where(members, dec.delta[tau], 0.0)
            norm = Z[g]
        if norm <= 0 or weights.sum() <= 0:
            meta["skipped"].append({**info, "reason": "zero estimated mass"})
            continue
        draws = qsample(weights, t, cfg, ledger, cost=U_G, label=f"core/sample/{g}")
        pr = weights[draws] / norm
        w = 1.0 / (t * pr)
        meta["groups"].append({**info, "kind": "outer" if outer else "well", "size": int(members.sum()),
                               "indices": draws, "pr": pr, "weights": w, "normalizer": float(norm)})
        uniq, inv = np.unique(draws, return_inverse=True)
        idx_parts.append(uniq)
        w_parts.append(np.bincount(inv, weights=w))
        lab_parts.append(np.full(uniq.size, g))

    keep = wa > 0
    c_idx = np.flatnonzero(keep)
    pts = [A[c_idx]]
    wts = [wa[c_idx]]
    src = [-1 - c_idx]
    if idx_parts:
        sidx = np.concatenate(idx_parts)
        pts.append(X[sidx])
        wts.append(np.concatenate(w_parts))
        src.append(sidx)
    return Coreset(np.concatenate(pts), np.concatenate(wts), np.concatenate(src), meta)
