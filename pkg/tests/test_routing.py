import math

import numpy as np
import pytest
from conftest import matrix_from_array, random_cost_matrix
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import atsp_brute, minmax_and_minsum

from windipp.errors import RoutingError
from windipp.routing import (GaParams, RouteSolution, brute_force, check_feasible, decode,
                             feasibility_report, format_violations, order_crossover, route_cost,
                             solution_from_tours, solve_ga)

FAST = GaParams(population=60, generations=150)
nan = math.nan


def three_node():
    # ids: tasks 1, 2; depot 3
    C = [[nan, 5.0, 1.0],
         [1.0, nan, 4.0],
         [2.0, 7.0, nan]]
    return matrix_from_array(C, 2, 1)


def test_route_cost_examples():
    cm = three_node()
    assert route_cost([], 3, cm) == 0.0
    assert route_cost([1, 2], 3, cm) == 11.0


def test_route_cost_rejects_bad_ids():
    cm = three_node()
    with pytest.raises(RoutingError):
        route_cost([1, 3], 3, cm)
    with pytest.raises(RoutingError):
        route_cost([1], 1, cm)
    with pytest.raises(RoutingError):
        route_cost([1, 1], 3, cm)


def test_reversal_changes_cost_on_asymmetric_matrix():
    cm = random_cost_matrix(0, 4, 1)
    assert route_cost([1, 2, 3, 4], 5, cm) != route_cost([4, 3, 2, 1], 5, cm)


# feasibility


def test_valid_solution_is_feasible():
    cm = random_cost_matrix(1, 4, 2)
    sol = solution_from_tours([(1, 3), (2, 4)], cm)
    assert check_feasible(sol, 4, 2, cm) == []
    assert format_violations([]).startswith("feasible")


def test_duplicate_task_violates_visit_once():
    cm = random_cost_matrix(1, 4, 2)
    sol = solution_from_tours([(1, 3), (2, 4)], cm)
    bad = RouteSolution(((1, 3), (2, 4, 3)), sol.depots, sol.costs, sol.c_max)
    names = {v.constraint for v in check_feasible(bad, 4, 2)}
    assert "visit-once" in names
    assert "visit-once" in format_violations(check_feasible(bad, 4, 2))


def test_low_c_max_violates_route_balance():
    cm = random_cost_matrix(1, 4, 2)
    sol = solution_from_tours([(1, 3), (2, 4)], cm)
    bad = RouteSolution(sol.tours, sol.depots, sol.costs, sol.c_max - 1.0)
    assert [v.constraint for v in check_feasible(bad, 4, 2)] == ["route-balance"]


def test_missing_task_and_wrong_depot():
    cm = random_cost_matrix(1, 4, 2)
    sol = solution_from_tours([(1, 3), (2,)], cm)
    bad = RouteSolution(sol.tours, (5, 5), sol.costs, sol.c_max)
    names = [v.constraint for v in check_feasible(bad, 4, 2)]
    assert "visit-once" in names and "return-to-depot" in names


def test_report_marks_structural_constraints():
    cm = random_cost_matrix(2, 3, 2)
    rep = feasibility_report(brute_force(cm, 3, 2), 3, 2, cm)
    assert rep["subtour-elimination"] == "satisfied-by-construction"
    assert rep["flow-conservation"] == "satisfied-by-construction"
    assert set(rep.values()) <= {"satisfied", "satisfied-by-construction"}


# brute force


def test_brute_single_task():
    cm = random_cost_matrix(3, 1, 1)
    sol = brute_force(cm, 1, 1)
    assert sol.tours == ((1,),)
    assert sol.c_max == cm.c(2, 1) + cm.c(1, 2)


def test_brute_one_task_per_adjacent_depot():
    # depot 3 is next to task 1, depot 4 next to task 2
    pts = np.array([[0.0, 0.0], [100.0, 0.0], [1.0, 0.0], [99.0, 0.0]])
    D = np.hypot(*(pts[:, None] - pts[None]).transpose(2, 0, 1))
    np.fill_diagonal(D, nan)
    D[2:, 2:] = nan
    sol = brute_force(matrix_from_array(D, 2, 2), 2, 2)
    assert sol.tours == ((1,), (2,))


@pytest.mark.parametrize("seed", range(6))
def test_brute_matches_full_enumeration(seed):
    n, m = 2 + seed % 4, 1 + seed % 3
    cm = random_cost_matrix(10 + seed, n, m)
    sol = brute_force(cm, n, m)
    (mm, _), _ = minmax_and_minsum(cm.cost.tolist(), n, m)
    assert sol.c_max == pytest.approx(mm[0], abs=1e-12)
    assert check_feasible(sol, n, m, cm) == []


def test_brute_beats_hand_solution():
    cm = random_cost_matrix(4, 6, 2)
    hand = solution_from_tours([(1, 2, 3), (4, 5, 6)], cm)
    assert brute_force(cm, 6, 2).c_max <= hand.c_max


def test_brute_size_limits():
    with pytest.raises(RoutingError):
        brute_force(random_cost_matrix(0, 10, 1))
    with pytest.raises(RoutingError):
        brute_force(random_cost_matrix(0, 3, 4))
    with pytest.raises(RoutingError):
        brute_force(random_cost_matrix(0, 3, 2), 4, 2)


def test_minmax_differs_from_minsum():
    # tasks 1-4 cluster at the origin, 5-6 far away; both depots at the origin
    pts = np.array([[0, 0], [1, 0], [0, 1], [1, 1], [100, 0], [101, 0], [0.5, 0.5], [0.5, 0.4]])
    D = np.hypot(*(pts[:, None] - pts[None]).transpose(2, 0, 1))
    np.fill_diagonal(D, nan)
    D[6:, 6:] = nan
    cm = matrix_from_array(D, 6, 2)
    (mm, _), (ms, ms_tours) = minmax_and_minsum(D.tolist(), 6, 2)
    assert brute_force(cm).c_max == pytest.approx(mm[0])
    assert mm[0] < ms[1] - 1e-9


# GA


def test_decode_and_crossover():
    assert decode(np.array([3, 1, 2, 4]), [1, 1]) == ((3,), (), (1, 2, 4))
    rng = np.random.default_rng(0)
    for _ in range(50):
        a, b = rng.permutation(np.arange(1, 8)), rng.permutation(np.arange(1, 8))
        assert sorted(order_crossover(a, b, rng).tolist()) == list(range(1, 8))


def test_ga_single_task_matches_brute():
    cm = random_cost_matrix(5, 1, 2)
    assert solve_ga(cm, 1, 2, FAST, seed=0).c_max == brute_force(cm).c_max


@settings(max_examples=15, deadline=None)
@given(st.integers(1, 7), st.integers(1, 3), st.integers(0, 10_000))
def test_ga_always_feasible(n, m, seed):
    cm = random_cost_matrix(seed, n, m)
    sol = solve_ga(cm, n, m, GaParams(population=20, generations=20), seed=seed)
    assert check_feasible(sol, n, m, cm) == []
    assert sol.c_max == max(sol.costs)


def test_ga_deterministic_and_thread_independent():
    cm = random_cost_matrix(6, 7, 2)
    a = solve_ga(cm, 7, 2, FAST, seed=3)
    b = solve_ga(cm, 7, 2, FAST, seed=3, threads=4)
    assert a == b and a.trace == b.trace


def test_ga_trace_non_increasing():
    sol = solve_ga(random_cost_matrix(7, 8, 3), params=FAST, seed=1)
    assert np.all(np.diff(sol.trace) <= 0)


def test_more_generations_never_worse():
    cm = random_cost_matrix(8, 8, 2)
    short = solve_ga(cm, params=GaParams(generations=50), seed=2)
    long = solve_ga(cm, params=GaParams(generations=100), seed=2)
    assert long.c_max <= short.c_max
    assert long.trace[:50] == short.trace[:50]


def test_ga_empty_tours_are_legal():
    # one depot sits on the only task, the other far away stays home
    pts = np.array([[0.0, 0.0], [0.0, 1.0], [1000.0, 1000.0]])
    D = np.hypot(*(pts[:, None] - pts[None]).transpose(2, 0, 1))
    np.fill_diagonal(D, nan)
    D[1:, 1:] = nan
    sol = solve_ga(matrix_from_array(D, 1, 2), params=FAST, seed=0)
    assert sol.tours == ((1,), ())


@pytest.mark.parametrize("seed", range(10))
def test_single_uav_matches_atsp_enumeration(seed):
    cm = random_cost_matrix(100 + seed, 7, 1)
    sol = solve_ga(cm, 7, 1, seed=seed)
    best = atsp_brute(cm.cost.tolist(), 8, list(range(1, 8)))
    assert sol.c_max <= 1.05 * best
