"""Direct loop implementation of the ring/group definitions, used as a test oracle."""

import math


def _floor_log2(r):
    j = math.floor(math.log2(r))
    # guard against log2 rounding at exact powers of two
    while 2.0**j > r:
        j -= 1
    while 2.0 ** (j + 1) <= r:
        j += 1
    return j


def reference_decomposition(X, A, tau, z, eps):
    """Per point: (cluster, ring, band) with ring in {'I', 'O', int} and band in {'min', 'max', int}.

    band is None for Inner points.
    """
    n, m = len(X), len(A)
    cost = [math.dist(X[s], A[tau[s]]) ** z for s in range(n)]
    size = [0] * m
    total = [0.0] * m
    for s in range(n):
        size[tau[s]] += 1
        total[tau[s]] += cost[s]
    delta = [total[i] / size[i] if size[i] else 0.0 for i in range(m)]
    J = 2 * z * math.log2(z / eps)
    ring = []
    for s in range(n):
        c, dl = cost[s], delta[tau[s]]
        if c == 0 or dl == 0:
            ring.append("I")
            continue
        j = _floor_log2(c / dl)
        ring.append("I" if j <= -J else "O" if j > J else j)
    ring_cost = {}
    for s in range(n):
        if ring[s] != "I":
            key = (tau[s], ring[s])
            ring_cost[key] = ring_cost.get(key, 0.0) + cost[s]
    level_total = {}
    for (i, j), c in ring_cost.items():
        level_total[j] = level_total.get(j, 0.0) + c
    B = z * math.log2(4 * z / eps)
    band_of = {}
    for (i, j), c in ring_cost.items():
        base = (eps / (4 * z)) ** z * level_total[j] / m
        b = _floor_log2(c / base) if c > 0 else 0
        band_of[(i, j)] = "min" if b <= 0 else "max" if b >= B else b
    out = []
    for s in range(n):
        r = ring[s]
        out.append((tau[s], r, None if r == "I" else band_of[(tau[s], r)]))
    return out, delta, size
