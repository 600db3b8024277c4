"""Min-max multiple-depot multiple-TSP over an asymmetric cost matrix.

Ids follow the usual convention: tasks are 1..n and depots n+1..n+m, one
UAV per depot. A solution is one ordered task list per UAV; each tour
starts and ends at its own depot. That encoding satisfies visit-once,
flow conservation, one-route-per-UAV, depot return and subtour elimination
by construction, so the exact formulation is realized as a decoder, a
feasibility checker and an exhaustive oracle rather than an IP solver.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import RoutingError
from .planner import CostMatrix


@dataclass(frozen=True)
class RouteSolution:
    tours: tuple[tuple[int, ...], ...]
    depots: tuple[int, ...]
    costs: tuple[float, ...]
    c_max: float
    # best C_max per GA generation (empty for other solvers)
    trace: tuple[float, ...] = field(default=(), compare=False)

    @property
    def total(self) -> float:
        return float(sum(self.costs))

    def key(self):
        """Ordering used everywhere: C_max, then total cost, then tours."""
        return (self.c_max, self.total, self.tours)


def _matrix(cm: CostMatrix) -> list[list[float]]:
    return cm.cost.tolist()


def route_cost(tour, depot: int, cm: CostMatrix) -> float:
    """Depot -> tour[0] -> ... -> tour[-1] -> depot; 0 for an empty tour."""
    tour = list(tour)
    if depot not in cm.depot_ids:
        raise RoutingError(f"{depot} is not a depot id")
    if len(set(tour)) != len(tour):
        raise RoutingError(f"tour {tour} repeats a task")
    for t in tour:
        if t not in cm.task_ids:
            raise RoutingError(f"{t} is not a task id")
    if not tour:
        return 0.0
    seq = [depot, *tour, depot]
    total = 0.0
    for a, b in zip(seq, seq[1:]):
        c = cm.c(a, b)
        if math.isnan(c):
            raise RoutingError(f"no cost entry {a}->{b}")
        total += c
    return total


def solution_from_tours(tours, cm: CostMatrix, trace=()) -> RouteSolution:
    tours = tuple(tuple(int(t) for t in tour) for tour in tours)
    depots = tuple(cm.n_tasks + 1 + k for k in range(len(tours)))
    costs = tuple(route_cost(t, d, cm) for t, d in zip(tours, depots))
    return RouteSolution(tours, depots, costs, max(costs) if costs else 0.0, tuple(trace))


# ---------------------------------------------------------------------------
# feasibility


CONSTRAINTS = {
    "visit-once": "every task is visited exactly once by the set of routes",
    "flow-conservation": "every task entered is also left (no task is a final destination)",
    "one-route-per-uav": "each UAV has at most one route",
    "return-to-depot": "each route ends at the depot it started from",
    "route-balance": "every route cost is at most C_max",
    "subtour-elimination": "no closed walk disconnected from a depot",
}

BY_CONSTRUCTION = ("flow-conservation", "subtour-elimination")


@dataclass(frozen=True)
class Violation:
    constraint: str
    message: str

    def __str__(self):
        return f"{self.constraint}: {self.message}"


def check_feasible(sol: RouteSolution, n: int, m: int, cm: CostMatrix | None = None,
                   tol: float = 1e-9) -> list[Violation]:
    """Violations of the routing constraints; empty means feasible.

    With ``cm`` given, each stored tour cost is also recomputed.
    """
    out = []
    if len(sol.tours) != m or len(sol.depots) != m:
        out.append(Violation("one-route-per-uav",
                             f"expected {m} routes, got {len(sol.tours)} tours / {len(sol.depots)} depots"))
    seen = {}
    for k, tour in enumerate(sol.tours):
        for t in tour:
            if not 1 <= t <= n:
                out.append(Violation("visit-once", f"route {k} visits unknown task id {t}"))
            seen.setdefault(t, []).append(k)
    for t in range(1, n + 1):
        visits = seen.get(t, [])
        if len(visits) != 1:
            where = f"routes {visits}" if visits else "no route"
            out.append(Violation("visit-once", f"task {t} is visited {len(visits)} times ({where})"))
    for k, d in enumerate(sol.depots):
        if d != n + 1 + k:
            out.append(Violation("return-to-depot", f"route {k} is tied to id {d}, expected depot {n + 1 + k}"))
    if len(sol.costs) != len(sol.tours):
        out.append(Violation("route-balance", "number of route costs differs from number of routes"))
    for k, c in enumerate(sol.costs):
        if c > sol.c_max + tol:
            out.append(Violation("route-balance", f"route {k} cost {c:.6g} exceeds C_max {sol.c_max:.6g}"))
    if cm is not None:
        for k, (tour, d) in enumerate(zip(sol.tours, sol.depots)):
            try:
                c = route_cost(tour, d, cm)
            except RoutingError as exc:
                out.append(Violation("visit-once", f"route {k}: {exc}"))
                continue
            if k < len(sol.costs) and abs(c - sol.costs[k]) > tol * max(1.0, abs(c)):
                out.append(Violation("route-balance",
                                     f"route {k} stored cost {sol.costs[k]:.12g} != recomputed {c:.12g}"))
    return out


def feasibility_report(sol: RouteSolution, n: int, m: int, cm: CostMatrix | None = None) -> dict:
    """Status per constraint: satisfied, violated or satisfied-by-construction."""
    bad = {v.constraint for v in check_feasible(sol, n, m, cm)}
    report = {}
    for name in CONSTRAINTS:
        if name in bad:
            report[name] = "violated"
        elif name in BY_CONSTRUCTION:
            report[name] = "satisfied-by-construction"
        else:
            report[name] = "satisfied"
    return report


def format_violations(violations) -> str:
    if not violations:
        return "feasible: no violations\n"
    lines = [f"violations: {len(violations)}"]
    lines += [f"- constraint: {v.constraint}\n  detail: {v.message}" for v in violations]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# exhaustive oracle


BRUTE_MAX_TASKS = 9
BRUTE_MAX_DEPOTS = 3


def _best_tours(cm: CostMatrix, depot: int, C) -> dict:
    """Cheapest (then lexicographically smallest) order for every task subset."""
    n = cm.n_tasks
    d = depot - 1
    best = {(): (0.0, ())}
    for size in range(1, n + 1):
        for subset in itertools.combinations(range(1, n + 1), size):
            top = None
            for perm in itertools.permutations(subset):
                c = C[d][perm[0] - 1]
                for a, b in zip(perm, perm[1:]):
                    c += C[a - 1][b - 1]
                c += C[perm[-1] - 1][d]
                if top is None or c < top[0]:
                    top = (c, perm)
            best[subset] = top
    return best


def _check_sizes(cm: CostMatrix, n, m):
    if n is not None and n != cm.n_tasks or m is not None and m != cm.n_depots:
        raise RoutingError(f"cost matrix holds {cm.n_tasks} tasks / {cm.n_depots} depots, "
                           f"caller expected {n} / {m}")
    if cm.n_tasks < 1 or cm.n_depots < 1:
        raise RoutingError("need at least one task and one depot")
    return cm.n_tasks, cm.n_depots


def brute_force(cm: CostMatrix, n: int | None = None, m: int | None = None) -> RouteSolution:
    """Exact min-max solution by enumerating every task-to-UAV assignment
    with the optimal order inside each tour.

    Ties break by total cost, then lexicographically smallest tours.
    """
    n, m = _check_sizes(cm, n, m)
    if n > BRUTE_MAX_TASKS or m > BRUTE_MAX_DEPOTS:
        raise RoutingError(f"brute force is limited to n <= {BRUTE_MAX_TASKS}, m <= {BRUTE_MAX_DEPOTS}")
    C = _matrix(cm)
    tables = [_best_tours(cm, depot, C) for depot in cm.depot_ids]
    best_key = None
    for assign in itertools.product(range(m), repeat=n):
        groups = [[] for _ in range(m)]
        for t, k in enumerate(assign, start=1):
            groups[k].append(t)
        picks = [tables[k][tuple(g)] for k, g in enumerate(groups)]
        costs = [p[0] for p in picks]
        key = (max(costs), sum(costs), tuple(p[1] for p in picks))
        if best_key is None or key < best_key:
            best_key = key
    return solution_from_tours(best_key[2], cm)


# ---------------------------------------------------------------------------
# genetic algorithm


@dataclass(frozen=True)
class GaParams:
    population: int = 100
    generations: int = 500
    tournament: int = 4
    crossover_rate: float = 0.9
    mutation_rate: float = 0.2
    split_mutation_rate: float = 0.2
    elitism: int = 2


def decode(perm, splits) -> tuple[tuple[int, ...], ...]:
    """Cut the task permutation at the sorted split points into m tours."""
    cuts = [0, *splits, len(perm)]
    return tuple(tuple(int(t) for t in perm[a:b]) for a, b in zip(cuts, cuts[1:]))


def _evaluate(C, n, perm, splits):
    tours = decode(perm, splits)
    costs = []
    for k, tour in enumerate(tours):
        if not tour:
            costs.append(0.0)
            continue
        d = n + k
        c = C[d][tour[0] - 1]
        for a, b in zip(tour, tour[1:]):
            c += C[a - 1][b - 1]
        c += C[tour[-1] - 1][d]
        costs.append(c)
    return (max(costs), sum(costs), tours)


def _two_cuts(k: int, rng: np.random.Generator) -> tuple[int, int]:
    """Two distinct sorted integers from range(k)."""
    i = int(rng.integers(k))
    j = int(rng.integers(k - 1))
    if j >= i:
        j += 1
    return (i, j) if i < j else (j, i)


def order_crossover(p1: np.ndarray, p2: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """OX: keep a slice of p1, fill the rest in p2's order."""
    n = len(p1)
    a, b = _two_cuts(n + 1, rng) if n > 1 else (0, n)
    child = np.empty(n, dtype=int)
    child[a:b] = p1[a:b]
    kept = set(p1[a:b].tolist())
    fill = [t for t in p2.tolist() if t not in kept]
    child[:a] = fill[:a]
    child[b:] = fill[a:]
    return child


def mutate_perm(perm: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Swap two tasks or invert a segment, with equal probability."""
    perm = perm.copy()
    n = len(perm)
    if n < 2:
        return perm
    i, j = _two_cuts(n, rng)
    if rng.random() < 0.5:
        perm[i], perm[j] = perm[j], perm[i]
    else:
        perm[i:j + 1] = perm[i:j + 1][::-1]
    return perm


def mutate_splits(splits: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    splits = splits.copy()
    if len(splits) == 0:
        return splits
    k = rng.integers(len(splits))
    step = (-2, -1, 1, 2)[int(rng.integers(4))]
    splits[k] = min(max(splits[k] + step, 0), n)
    return np.sort(splits)


def solve_ga(cm: CostMatrix, n: int | None = None, m: int | None = None,
             params: GaParams = GaParams(), seed: int = 0, threads: int = 1) -> RouteSolution:
    """Elitist GA on (task permutation, m-1 split points) minimizing C_max.

    The random stream is consumed in a fixed order per generation, so a run
    with more generations replays the shorter run first. Fitness evaluation
    may be spread over threads without changing the result.
    """
    n, m = _check_sizes(cm, n, m)
    C = _matrix(cm)
    rng = np.random.default_rng(seed)
    P = max(params.population, params.elitism + 1, 2)
    tasks = np.arange(1, n + 1)
    pop = [(rng.permutation(tasks), np.sort(rng.integers(0, n + 1, size=m - 1)))
           for _ in range(P)]
    memo = {}

    def fitness(ind):
        key = (ind[0].tobytes(), ind[1].tobytes())
        val = memo.get(key)
        if val is None:
            val = _evaluate(C, n, ind[0], ind[1])
            memo[key] = val
        return val

    def evaluate(population):
        if threads > 1:
            with ThreadPoolExecutor(threads) as pool:
                return list(pool.map(fitness, population))
        return [fitness(ind) for ind in population]

    fits = evaluate(pop)
    trace = []
    for _ in range(params.generations):
        order = sorted(range(P), key=lambda i: (fits[i], i))
        rank = [0] * P
        for r, i in enumerate(order):
            rank[i] = r
        trace.append(fits[order[0]][0])
        nxt = [pop[i] for i in order[:params.elitism]]

        seen = {(p.tobytes(), q.tobytes()) for p, q in nxt}
        n_child = P - len(nxt)
        # tournament with replacement: best rank among the entrants
        entrants = rng.integers(P, size=(n_child, 2, params.tournament)).tolist()
        coins = rng.random((n_child, 3)).tolist()
        for ent, (u_x, u_m, u_s) in zip(entrants, coins):
            a = pop[order[min(rank[i] for i in ent[0])]]
            b = pop[order[min(rank[i] for i in ent[1])]]
            if u_x < params.crossover_rate:
                perm = order_crossover(a[0], b[0], rng)
            else:
                perm = a[0].copy()
            splits = a[1].copy()
            key = (perm.tobytes(), splits.tobytes())
            if key in seen:
                # clones add nothing; force a perturbation instead
                u_m = 0.0
            if u_m < params.mutation_rate:
                perm = mutate_perm(perm, rng)
            if u_s < params.split_mutation_rate:
                splits = mutate_splits(splits, n, rng)
            nxt.append((perm, splits))
            seen.add((perm.tobytes(), splits.tobytes()))
        pop = nxt
        fits = evaluate(pop)
    best = min(range(P), key=lambda i: fits[i])
    trace.append(fits[best][0])
    return solution_from_tours(fits[best][2], cm, trace)
