"""Dinic max-flow on a CSR residual graph, compiled with numba.

Only the minimal source set of the final residual graph is exposed; it is
the same for every maximum flow, so the returned cut does not depend on the
augmentation order.
"""

import numpy as np
from numba import njit

RESIDUAL_EPS = 1e-12


@njit(cache=True, nogil=True)
def _dinic(n, s, t, start, to, cap, rev, eps):
    level = np.empty(n, np.int64)
    it = np.empty(n, np.int64)
    queue = np.empty(n, np.int64)
    path = np.empty(n, np.int64)
    flow = 0.0
    while True:
        level[:] = -1
        level[s] = 0
        qh = 0
        qt = 1
        queue[0] = s
        while qh < qt:
            u = queue[qh]
            qh += 1
            for e in range(start[u], start[u + 1]):
                v = to[e]
                if level[v] < 0 and cap[e] > eps:
                    level[v] = level[u] + 1
                    queue[qt] = v
                    qt += 1
        if level[t] < 0:
            break
        for u in range(n):
            it[u] = start[u]
        depth = 0
        u = s
        while True:
            if u == t:
                f = np.inf
                for k in range(depth):
                    if cap[path[k]] < f:
                        f = cap[path[k]]
                for k in range(depth):
                    e = path[k]
                    cap[e] -= f
                    cap[rev[e]] += f
                flow += f
                k0 = 0
                while k0 < depth and cap[path[k0]] > eps:
                    k0 += 1
                depth = k0
                u = s if depth == 0 else to[path[depth - 1]]
                continue
            advanced = False
            while it[u] < start[u + 1]:
                e = it[u]
                v = to[e]
                if cap[e] > eps and level[v] == level[u] + 1:
                    path[depth] = e
                    depth += 1
                    u = v
                    advanced = True
                    break
                it[u] += 1
            if not advanced:
                if u == s:
                    break
                level[u] = -1
                depth -= 1
                u = s if depth == 0 else to[path[depth - 1]]
                it[u] += 1
    return flow


@njit(cache=True, nogil=True)
def _source_side(n, s, start, to, cap, eps):
    seen = np.zeros(n, np.bool_)
    queue = np.empty(n, np.int64)
    seen[s] = True
    queue[0] = s
    qh = 0
    qt = 1
    while qh < qt:
        u = queue[qh]
        qh += 1
        for e in range(start[u], start[u + 1]):
            v = to[e]
            if not seen[v] and cap[e] > eps:
                seen[v] = True
                queue[qt] = v
                qt += 1
    return seen


def min_cut_source_set(n_nodes, src_cap, sink_cap, pair_a, pair_b, pair_w):
    """Minimal source side of the s/t min cut.

    Nodes ``0..n_nodes-1`` get terminal capacities ``src_cap`` (s -> i) and
    ``sink_cap`` (i -> t); each undirected pair ``(a, b)`` has capacity ``w``
    in both directions. Returns ``(mask, flow_value)``.
    """
    s, t = n_nodes, n_nodes + 1
    n = n_nodes + 2
    idx = np.arange(n_nodes, dtype=np.int64)
    src_nodes = idx[src_cap > 0]
    sink_nodes = idx[sink_cap > 0]
    npair, nsrc, nsink = len(pair_a), len(src_nodes), len(sink_nodes)

    tails = np.concatenate([pair_a, pair_b, np.full(nsrc, s), src_nodes, sink_nodes, np.full(nsink, t)])
    heads = np.concatenate([pair_b, pair_a, src_nodes, np.full(nsrc, s), np.full(nsink, t), sink_nodes])
    caps = np.concatenate([pair_w, pair_w, src_cap[src_nodes], np.zeros(nsrc), sink_cap[sink_nodes], np.zeros(nsink)])
    # partner of each edge in the unsorted layout: blocks of equal size are mirrored
    offs = np.cumsum([0, npair, npair, nsrc, nsrc, nsink, nsink])
    partner = np.empty(len(tails), np.int64)
    for lo, hi in ((0, 2), (2, 4), (4, 6)):
        a0, a1, b0 = offs[lo], offs[lo + 1], offs[lo + 1]
        size = a1 - a0
        partner[a0:a1] = np.arange(b0, b0 + size)
        partner[b0:b0 + size] = np.arange(a0, a1)

    order = np.argsort(tails, kind="stable")
    pos = np.empty_like(order)
    pos[order] = np.arange(len(order))
    to = heads[order].astype(np.int64)
    cap = caps[order].astype(np.float64)
    rev = pos[partner[order]]
    start = np.zeros(n + 1, np.int64)
    np.add.at(start, tails + 1, 1)
    start = np.cumsum(start)

    flow = _dinic(n, s, t, start, to, cap, rev, RESIDUAL_EPS)
    seen = _source_side(n, s, start, to, cap, RESIDUAL_EPS)
    return seen[:n_nodes], flow
