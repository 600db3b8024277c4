"""Slow, independent reference implementations the package is checked against.

None of these call the code under test beyond plain data containers.
"""

import heapq
import itertools
import math

import numpy as np


def se_kernel_dense(a, b, sigma_f, length_scales):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    out = np.empty((len(a), len(b)))
    for i in range(len(a)):
        for j in range(len(b)):
            s = 0.0
            for d in range(a.shape[1]):
                s += ((a[i, d] - b[j, d]) / length_scales[d]) ** 2
            out[i, j] = sigma_f ** 2 * math.exp(-0.5 * s)
    return out


def gp_dense(x, y, q, sigma_f, sigma_n, length_scales, mean_const):
    """Posterior mean/cov and log marginal likelihood by explicit inverses."""
    K = se_kernel_dense(x, x, sigma_f, length_scales) + sigma_n ** 2 * np.eye(len(x))
    Kinv = np.linalg.inv(K)
    Kqx = se_kernel_dense(q, x, sigma_f, length_scales)
    Kqq = se_kernel_dense(q, q, sigma_f, length_scales)
    r = np.asarray(y) - mean_const
    mean = mean_const + Kqx @ Kinv @ r
    cov = Kqq - Kqx @ Kinv @ Kqx.T
    sign, ld = np.linalg.slogdet(K)
    lml = -0.5 * r @ Kinv @ r - 0.5 * ld - 0.5 * len(x) * math.log(2 * math.pi)
    return mean, cov, lml


def gaussian_entropy(K):
    K = np.atleast_2d(K)
    return 0.5 * (len(K) * math.log(2 * math.pi * math.e) + np.linalg.slogdet(K)[1])


def dijkstra_rdisc(nodes, radius, source, cost_fn, free_fn=None):
    """Single-source shortest paths over the r-disc graph, edges by brute force."""
    nodes = np.asarray(nodes, dtype=float)
    n = len(nodes)
    dist = [math.inf] * n
    dist[source] = 0.0
    done = [False] * n
    heap = [(0.0, source)]
    while heap:
        d, u = heapq.heappop(heap)
        if done[u]:
            continue
        done[u] = True
        for v in range(n):
            if v == u or done[v]:
                continue
            if math.dist(nodes[u], nodes[v]) > radius:
                continue
            if free_fn is not None and not free_fn(nodes[u], nodes[v]):
                continue
            nd = d + cost_fn(nodes[u], nodes[v])
            if nd < dist[v]:
                dist[v] = nd
                heapq.heappush(heap, (nd, v))
    return dist


def tour_cost(C, depot, tour):
    seq = [depot, *tour, depot]
    return sum(C[a - 1][b - 1] for a, b in zip(seq, seq[1:])) if tour else 0.0


def all_solutions(C, n, m):
    """Every assignment of tasks to UAVs with every order inside each tour."""
    for assign in itertools.product(range(m), repeat=n):
        groups = [[t for t in range(1, n + 1) if assign[t - 1] == k] for k in range(m)]
        for orders in itertools.product(*[itertools.permutations(g) for g in groups]):
            yield [tuple(o) for o in orders]


def minmax_and_minsum(C, n, m):
    """(best C_max, its tours), (best total, its tours) by full enumeration."""
    best_mm, best_ms = None, None
    for tours in all_solutions(C, n, m):
        costs = [tour_cost(C, n + 1 + k, t) for k, t in enumerate(tours)]
        mm = (max(costs), sum(costs))
        ms = (sum(costs), max(costs))
        if best_mm is None or mm < best_mm[0]:
            best_mm = (mm, tours)
        if best_ms is None or ms < best_ms[0]:
            best_ms = (ms, tours)
    return best_mm, best_ms


def atsp_brute(C, depot, tasks):
    best = math.inf
    for perm in itertools.permutations(tasks):
        best = min(best, tour_cost(C, depot, perm))
    return best
