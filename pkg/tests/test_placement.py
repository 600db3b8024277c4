import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from windipp.errors import ConfigError
from windipp.gp import GpHyperparams, gram, mutual_information
from windipp.placement import (Placement, _GridConditioner, fitting_diagnostic, hamiltonian_path,
                               make_test_grid, optimize_task_locations, placement_objective,
                               sample_polyline, stratified_points)
from windipp.scenario import Region

H = GpHyperparams(1.0, 0.1, (250.0, 250.0))


@pytest.fixture(scope="module")
def grid(square):
    return make_test_grid(square, 125.0)


def test_grid_counting():
    g = make_test_grid(Region((0, 0, 100, 100)), 50.0)
    assert len(g.points) == 9


def test_grid_drops_blocked_points(holed):
    g = make_test_grid(holed, 100.0)
    assert len(g.points) == 121 - 15
    assert holed.contains(g.points).all()


def test_grid_too_coarse():
    with pytest.raises(ConfigError):
        make_test_grid(Region((0, 0, 100, 100)), 150.0)


def test_objective_equals_explicit_joint_mi(grid):
    P = np.array([[100.0, 200.0], [700.0, 640.0], [333.0, 900.0]])
    K = gram(np.vstack([P, grid.points]), H, add_noise=True)
    direct = mutual_information(K, (np.arange(3), np.arange(3, len(K))))
    assert placement_objective(P, grid, H) == pytest.approx(direct, abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.tuples(st.floats(0, 1000), st.floats(0, 1000)), min_size=1, max_size=6))
def test_fast_path_matches_objective(square, pts):
    grid = make_test_grid(square, 125.0)
    P = np.array(pts)
    assert _GridConditioner(grid, H)(P) == pytest.approx(placement_objective(P, grid, H), abs=1e-8)


def test_far_away_tasks_carry_no_information(grid):
    assert placement_objective([[1e6, 1e6]], grid, H) < 1e-9


def test_duplicate_location_gains_less_than_new_one(grid):
    base = placement_objective([[400.0, 400.0]], grid, H)
    dup = placement_objective([[400.0, 400.0], [400.0, 400.0]], grid, H)
    new = placement_objective([[400.0, 400.0], [700.0, 300.0]], grid, H)
    assert base < dup < new


def test_reflection_invariance(grid):
    P = np.array([[120.0, 330.0], [610.0, 870.0]])
    mirrored = P.copy()
    mirrored[:, 0] = 1000.0 - mirrored[:, 0]
    assert placement_objective(P, grid, H) == pytest.approx(placement_objective(mirrored, grid, H), abs=1e-9)


def test_stratified_points_are_free(holed):
    pts = stratified_points(holed, 9, np.random.default_rng(0))
    assert holed.contains(pts).all()


def test_zero_tasks(square, grid):
    pl = optimize_task_locations(square, 0, grid, H, seed=0)
    assert pl.n == 0 and pl.objective == 0.0


def test_optimizer_stays_in_free_space(holed):
    grid = make_test_grid(holed, 125.0)
    pl = optimize_task_locations(holed, 4, grid, H, seed=3, restarts=2)
    assert holed.contains(pl.locations).all()
    assert pl.objective == pytest.approx(placement_objective(pl.locations, grid, H), abs=1e-12)


def test_optimizer_beats_its_start(square, grid):
    pl = optimize_task_locations(square, 3, grid, H, seed=7, restarts=1)
    start = stratified_points(square, 3, np.random.default_rng([7, 0]))
    assert pl.objective >= placement_objective(start, grid, H)


def test_trace_non_decreasing(square, grid):
    pl = optimize_task_locations(square, 3, grid, H, seed=1, restarts=2)
    assert np.all(np.diff(pl.trace) >= 0)


def test_deterministic_and_thread_independent(square, grid):
    a = optimize_task_locations(square, 3, grid, H, seed=2, restarts=3)
    b = optimize_task_locations(square, 3, grid, H, seed=2, restarts=3, threads=3)
    assert np.array_equal(a.locations, b.locations)
    assert a.objective == b.objective and a.restart == b.restart


def test_warm_start_monotone_in_n(square, grid):
    prev = optimize_task_locations(square, 1, grid, H, seed=4, restarts=1)
    for n in (2, 3):
        cur = optimize_task_locations(square, n, grid, H, seed=4, restarts=1, initial=prev.locations)
        assert cur.objective >= prev.objective
        prev = cur


# diagnostic


def test_hamiltonian_path_visits_all():
    pts = np.random.default_rng(0).uniform(0, 100, (15, 2))
    order = hamiltonian_path(pts)
    assert sorted(order.tolist()) == list(range(15))


def test_two_opt_untangles_square():
    pts = np.array([[0, 0], [1, 1], [1, 0], [0, 1]], dtype=float)
    order = hamiltonian_path(pts)
    length = np.hypot(*np.diff(pts[order], axis=0).T).sum()
    assert length == pytest.approx(3.0)


def test_sample_polyline_spacing():
    s = sample_polyline(np.array([[0, 0], [10, 0], [10, 10]], dtype=float), 5.0)
    assert s.tolist() == [[0, 0], [5, 0], [10, 0], [10, 5], [10, 10]]


def _diagnose(n, seed):
    region = Region((0, 0, 100, 100))
    h = GpHyperparams(1.0, 0.1, (30.0, 30.0))
    grid = make_test_grid(region, 5.0)
    pts = stratified_points(region, n, np.random.default_rng(seed))
    return fitting_diagnostic(Placement(pts, 0.0), 10.0, h, grid)


@pytest.mark.parametrize("seed", range(3))
def test_fitting_cases(seed):
    assert _diagnose(200, seed).classification == "overfitted"
    assert _diagnose(40, seed).classification == "normal"
    assert _diagnose(5, seed).classification == "underfitted"


def test_diagnostic_record_fields():
    rec = _diagnose(40, 0).as_record()
    assert set(rec) >= {"classification", "mi_tasks_nats", "mi_path_nats", "ratio"}
