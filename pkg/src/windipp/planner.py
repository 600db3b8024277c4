"""Wind-aware minimum-energy paths and the asymmetric cost matrix.

A straight edge from p to q flown at constant airspeed v0 costs

    tau - (1 / v0^2) * integral of w . d(sigma),    tau = |pq| / v0,

the energy of holding v0 against drag, normalized so the UAV constants
drop out. Paths come from a multi-query FMT* over one shared r-disc sample
graph, so edge costs and collision checks are computed once for all
sources.
"""

from __future__ import annotations

import heapq
import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import ConfigError, PlanningError, PreconditionError
from .scenario import Region, WindField, segment_free

GAMMA = 2.0

UNKNOWN, FREE, BLOCKED = 0, 1, 2


class _Unreachable:
    def __repr__(self):
        return "UNREACHABLE"

    def __bool__(self):
        return False


UNREACHABLE = _Unreachable()


@dataclass(frozen=True, eq=False)
class PlannedPath:
    waypoints: np.ndarray
    cost: float
    length: float
    nodes: tuple = ()


# ---------------------------------------------------------------------------
# edge cost


def _subsegment_counts(length: np.ndarray, spacing: float) -> np.ndarray:
    # sub-segment length = min(spacing, length / 4)
    return np.maximum(4, np.ceil(length / spacing - 1e-9)).astype(int)


def wind_integrals(P: np.ndarray, Q: np.ndarray, field: WindField) -> np.ndarray:
    """Midpoint-rule line integrals of the wind along segments P[i] -> Q[i].

    Each segment is reduced on its own, so its value does not depend on
    which other segments share the batch.
    """
    P = np.atleast_2d(np.asarray(P, dtype=float))
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    if len(P) == 0:
        return np.zeros(0)
    D = Q - P
    k = _subsegment_counts(np.hypot(D[:, 0], D[:, 1]), field.spacing)
    seg = np.repeat(np.arange(len(P)), k)
    starts = np.concatenate([[0], np.cumsum(k)[:-1]])
    j = np.arange(len(seg)) - starts[seg]
    t = (j + 0.5) / k[seg]
    w = field.sample(P[seg] + t[:, None] * D[seg])
    contrib = (w[:, 0] * D[seg, 0] + w[:, 1] * D[seg, 1]) / k[seg]
    return np.add.reduceat(contrib, starts)


def edge_cost(p, q, field: WindField, v0: float) -> float:
    """Normalized energy of flying straight from p to q at airspeed v0."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if not v0 > 0:
        raise PreconditionError(f"airspeed v0 must be positive, got {v0}")
    d = q - p
    length = float(np.hypot(*d))
    k = int(_subsegment_counts(np.array([length]), field.spacing)[0])
    mids = p + ((np.arange(k) + 0.5) / k)[:, None] * d
    speeds = np.hypot(*field.sample(mids).T)
    bad = np.flatnonzero(speeds >= v0)
    if len(bad):
        j = int(bad[0])
        a, b = p + d * j / k, p + d * (j + 1) / k
        raise PreconditionError(
            f"wind speed {speeds[j]:.3f} m/s >= v0 = {v0} m/s on sub-segment {j} "
            f"({a[0]:.1f}, {a[1]:.1f}) -> ({b[0]:.1f}, {b[1]:.1f})")
    integral = float(wind_integrals(p[None], q[None], field)[0])
    return length / v0 - integral / v0 ** 2


def check_airspeed(field: WindField, v0: float) -> None:
    vmax = field.max_speed()
    if not v0 > vmax:
        raise PreconditionError(
            f"planner needs v0 > max wind speed; v0 = {v0} m/s, max wind = {vmax:.3f} m/s")


# ---------------------------------------------------------------------------
# sample graph and shared edge cache


class EdgeCache:
    """Per-edge wind integrals and collision status, filled lazily.

    Stored as dense node-by-node arrays: ``wind[i, j]`` is the integral
    flying i -> j, so ``wind[j, i] == -wind[i, j]`` exactly. Writes are
    idempotent, which lets concurrent queries share one cache.
    """

    def __init__(self, n_nodes: int):
        self.wind = np.full((n_nodes, n_nodes), np.nan)
        self.status = np.zeros((n_nodes, n_nodes), dtype=np.int8)
        self.collision_checks = 0
        self.wind_evaluations = 0
        self._lock = threading.Lock()

    def _count(self, checks=0, winds=0):
        with self._lock:
            self.collision_checks += checks
            self.wind_evaluations += winds


@dataclass(eq=False)
class SampleGraph:
    region: Region
    nodes: np.ndarray
    radius: float
    n_fixed: int
    neighbors: list = field(repr=False)
    cache: EdgeCache = field(repr=False)

    @property
    def size(self) -> int:
        return len(self.nodes)

    def length(self, i, j) -> np.ndarray:
        d = self.nodes[j] - self.nodes[i]
        return np.hypot(d[..., 0], d[..., 1])

    def wind(self, ys: np.ndarray, x: int, field: WindField, cache: EdgeCache) -> np.ndarray:
        """Wind integrals for edges ys[k] -> x, computing missing ones."""
        vals = cache.wind[ys, x]
        missing = np.isnan(vals)
        if missing.any():
            ym = ys[missing]
            lo = np.minimum(ym, x)
            hi = np.maximum(ym, x)
            # canonical direction lo -> hi, negated for the reverse
            integ = wind_integrals(self.nodes[lo], self.nodes[hi], field)
            cache.wind[lo, hi] = integ
            cache.wind[hi, lo] = -integ
            cache._count(winds=len(ym))
            vals = cache.wind[ys, x]
        return vals

    def edge_free(self, i: int, j: int, cache: EdgeCache) -> bool:
        s = cache.status[i, j]
        if s == UNKNOWN:
            ok = segment_free(self.region, self.nodes[i], self.nodes[j])
            s = FREE if ok else BLOCKED
            cache.status[i, j] = s
            cache.status[j, i] = s
            cache._count(checks=1)
        return s == FREE


def connection_radius(region: Region, n_nodes: int, gamma: float = GAMMA) -> float:
    m = max(n_nodes, 2)
    return gamma * math.sqrt(math.log(m) / m) * region.diameter


def build_sample_graph(region: Region, field: WindField, fixed, N: int, seed: int,
                       gamma: float = GAMMA) -> SampleGraph:
    """Fixed points (in order) followed by N seeded uniform free-space samples."""
    if N < 1:
        raise ConfigError("sample count N must be at least 1")
    fixed = np.asarray(fixed, dtype=float).reshape(-1, 2)
    if len(fixed) and not region.contains(fixed).all():
        bad = fixed[~region.contains(fixed)][0]
        raise ConfigError(f"fixed point ({bad[0]:.2f}, {bad[1]:.2f}) is not in free space")
    rng = np.random.default_rng(seed)
    xmin, ymin, xmax, ymax = region.bounds
    samples = []
    have = 0
    draws = 0
    while have < N:
        batch = np.column_stack([rng.uniform(xmin, xmax, N - have), rng.uniform(ymin, ymax, N - have)])
        draws += len(batch)
        ok = batch[region.contains(batch)]
        samples.append(ok)
        have += len(ok)
        if have == 0 and draws >= 1000 * N:
            raise ConfigError("region has no free space to sample")
    nodes = np.vstack([fixed] + samples)[: len(fixed) + N]
    radius = connection_radius(region, len(nodes), gamma)
    tree = cKDTree(nodes)
    neighbors = []
    for i, nb in enumerate(tree.query_ball_point(nodes, radius)):
        nb = np.array(sorted(j for j in nb if j != i), dtype=int)
        neighbors.append(nb)
    return SampleGraph(region, nodes, radius, len(fixed), neighbors, EdgeCache(len(nodes)))


# ---------------------------------------------------------------------------
# multi-query FMT*


def fmt_multiquery(graph: SampleGraph, source: int, goals, field: WindField, v0: float,
                   cache: EdgeCache | None = None) -> dict:
    """One FMT* sweep from ``source`` that runs until every reachable goal
    has been expanded. Returns goal -> PlannedPath, or UNREACHABLE.

    Wind makes edge costs non-metric, so plain FMT* can lock in a parent
    before a cheaper one is expanded. Expanding a node therefore also
    rewires its open neighbours when that is strictly cheaper (collision
    checking only the improving edge), which makes the result equal to
    Dijkstra on the r-disc graph whenever no edge is blocked.
    """
    check_airspeed(field, v0)
    cache = cache or graph.cache
    M = graph.size
    goals = [int(g) for g in goals]
    pending = set(goals) - {source}
    cost = np.full(M, np.inf)
    parent = np.full(M, -1)
    state = np.zeros(M, dtype=np.int8)  # 0 unvisited, 1 open, 2 closed
    cost[source] = 0.0
    state[source] = 1
    heap = [(0.0, source)]
    while heap:
        cz, z = heapq.heappop(heap)
        if state[z] != 1 or cz > cost[z]:
            continue  # stale heap entry
        nb = graph.neighbors[z]
        opened = nb[state[nb] == 1]
        if len(opened):
            # wind(x -> z) == -wind(z -> x)
            c = cz + graph.length(z, opened) / v0 + graph.wind(opened, z, field, cache) / v0 ** 2
            for k in np.flatnonzero(c < cost[opened]):
                x = int(opened[k])
                if graph.edge_free(z, x, cache):
                    cost[x] = c[k]
                    parent[x] = z
                    heapq.heappush(heap, (float(c[k]), x))
        new_open = []
        for x in nb[state[nb] == 0]:
            near = graph.neighbors[x]
            ys = near[state[near] == 1]
            c = cost[ys] + graph.length(ys, x) / v0 - graph.wind(ys, x, field, cache) / v0 ** 2
            k = int(np.argmin(c))
            y = int(ys[k])
            if graph.edge_free(y, int(x), cache):
                cost[x] = c[k]
                parent[x] = y
                new_open.append(int(x))
        for x in new_open:
            state[x] = 1
            heapq.heappush(heap, (float(cost[x]), x))
        state[z] = 2
        pending.discard(z)
        if not pending:
            break
    out = {}
    for g in goals:
        if g == source:
            continue
        if state[g] != 2 and g in pending:
            out[g] = UNREACHABLE
            continue
        chain = [g]
        while chain[-1] != source:
            chain.append(int(parent[chain[-1]]))
        chain.reverse()
        wp = graph.nodes[chain]
        length = float(np.hypot(*np.diff(wp, axis=0).T).sum())
        out[g] = PlannedPath(wp, float(cost[g]), length, tuple(chain))
    return out


# ---------------------------------------------------------------------------
# cost matrix


@dataclass(eq=False)
class CostMatrix:
    """Costs between ids 1..n (tasks) and n+1..n+m (depots).

    ``cost[i-1, j-1]`` is the cost from id i to id j; the diagonal and all
    depot-to-depot entries are NaN.
    """

    n_tasks: int
    n_depots: int
    cost: np.ndarray
    length: np.ndarray
    paths: dict = field(default_factory=dict, repr=False)
    # collision checks / wind integrals computed while building
    stats: dict = field(default_factory=dict)

    @property
    def size(self) -> int:
        return self.n_tasks + self.n_depots

    @property
    def task_ids(self) -> range:
        return range(1, self.n_tasks + 1)

    @property
    def depot_ids(self) -> range:
        return range(self.n_tasks + 1, self.size + 1)

    def c(self, i: int, j: int) -> float:
        return float(self.cost[i - 1, j - 1])

    def present(self, i: int, j: int) -> bool:
        return not math.isnan(self.cost[i - 1, j - 1])


def build_cost_matrix(graph: SampleGraph, depots, tasks, field: WindField, v0: float,
                      threads: int = 1, share_cache: bool = True) -> CostMatrix:
    """One multi-query FMT* run per task and depot over the shared graph.

    ``depots`` and ``tasks`` are graph node indices. With ``share_cache``
    off every run starts from an empty cache (used to measure the saving).
    """
    check_airspeed(field, v0)
    tasks = [int(t) for t in tasks]
    depots = [int(d) for d in depots]
    ids = tasks + depots
    n, m = len(tasks), len(depots)
    K = n + m

    def job(a):
        src = ids[a]
        goal_ids = [b for b in range(K) if b != a and not (a >= n and b >= n)]
        cache = graph.cache if share_cache else EdgeCache(graph.size)
        res = fmt_multiquery(graph, src, [ids[b] for b in goal_ids], field, v0, cache)
        counts = (0, 0) if share_cache else (cache.collision_checks, cache.wind_evaluations)
        return [(b, res[ids[b]]) for b in goal_ids], counts

    before = (graph.cache.collision_checks, graph.cache.wind_evaluations)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(job, range(K)))
    else:
        results = [job(a) for a in range(K)]

    cost = np.full((K, K), np.nan)
    length = np.full((K, K), np.nan)
    paths = {}
    missing = []
    if share_cache:
        checks = graph.cache.collision_checks - before[0]
        winds = graph.cache.wind_evaluations - before[1]
    else:
        checks = sum(r[1][0] for r in results)
        winds = sum(r[1][1] for r in results)
    for a, (row, _) in enumerate(results):
        for b, path in row:
            if path is UNREACHABLE:
                missing.append((a + 1, b + 1))
                continue
            cost[a, b] = path.cost
            length[a, b] = path.length
            paths[(a + 1, b + 1)] = path
    if missing:
        pairs = ", ".join(f"{i}->{j}" for i, j in missing[:20])
        raise PlanningError(f"no collision-free path for id pairs: {pairs}")
    stats = {"collision_checks": checks, "wind_evaluations": winds}
    return CostMatrix(n, m, cost, length, paths, stats)
