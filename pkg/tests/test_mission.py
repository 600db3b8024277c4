import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from windipp.errors import MissionError, PreconditionError
from windipp.gp import GpHyperparams
from windipp.mission import (MissionParams, TrackerParams, UavState, collect_measurements,
                             posterior_variance_at, refresh_points, run_mission, sample_times,
                             step_dubins, track_route, turn_command, wrap_angle)
from windipp.placement import make_test_grid
from windipp.scenario import RfSource, Scenario, make_wind

SENSOR = GpHyperparams(10.0, 1.0, (200.0, 200.0))


@pytest.fixture(scope="module")
def scen(square):
    return Scenario(square, make_wind("uniform", {}, square, 50.0),
                    RfSource((500.0, 500.0), altitude=100.0, shadowing_length=200.0, seed=3))


@pytest.fixture(scope="module")
def grid(square):
    return make_test_grid(square, 100.0)


def test_wrap_angle_range():
    assert wrap_angle(math.pi) == pytest.approx(math.pi)
    assert wrap_angle(-math.pi) == pytest.approx(math.pi)
    assert wrap_angle(3 * math.pi / 2) == pytest.approx(-math.pi / 2)


def test_state_validation():
    with pytest.raises(ValueError):
        UavState((0, 0), 0.0, 0.0, 10.0)
    with pytest.raises(ValueError):
        UavState((0, 0), 0.0, 10.0, -1.0)


def test_carrot_dead_ahead():
    s = UavState((0.0, 0.0), 0.3, 20.0, 50.0)
    ahead = (100 * math.cos(0.3), 100 * math.sin(0.3))
    n = step_dubins(s, ahead, 0.5)
    assert n.heading == pytest.approx(0.3, abs=1e-12)
    assert math.dist(n.position, s.position) == pytest.approx(10.0, abs=1e-9)


def test_carrot_behind_saturates():
    s = UavState((0.0, 0.0), 0.0, 20.0, 50.0)
    assert abs(turn_command(s, (-100.0, 0.0))) == pytest.approx(20.0 / 50.0)


@settings(max_examples=50, deadline=None)
@given(st.floats(-math.pi, math.pi), st.floats(-500, 500), st.floats(-500, 500), st.floats(0.01, 2.0))
def test_step_length_is_v_dt(heading, cx, cy, dt):
    s = UavState((1.0, 2.0), heading, 30.0, 40.0)
    n = step_dubins(s, (cx, cy), dt)
    assert math.dist(n.position, s.position) == pytest.approx(30.0 * dt, abs=1e-9)
    assert -math.pi < n.heading <= math.pi


def test_full_saturated_circle():
    v, r, dt = 20.0, 50.0, 0.01
    s = UavState((0.0, 0.0), 0.0, v, r)
    steps = int(round(2 * math.pi * r / v / dt))
    for _ in range(steps):
        # carrot always directly to the left keeps the turn saturated
        h = s.heading
        s = step_dubins(s, (s.position[0] - 1e3 * math.sin(h) - 1e2 * math.cos(h),
                            s.position[1] + 1e3 * math.cos(h) - 1e2 * math.sin(h)), dt)
    assert abs(wrap_angle(s.heading)) < 0.01 * 2 * math.pi
    assert math.hypot(*s.position) < 0.01 * 2 * math.pi * r


def test_straight_route_cross_track():
    uav = UavState((0.0, 100.0), 0.0, 50.0, 30.0)
    tr = track_route(uav, np.array([[0.0, 100.0], [900.0, 100.0]]))
    assert np.max(np.abs(tr.xy[:, 1] - 100.0)) <= 1.0
    assert math.dist(tr.xy[-1], (900.0, 100.0)) <= 30.0


def _slack(ref, r):
    # every vertex is reached to within the acceptance radius: interior ones cost 2a, the end one a
    a = TrackerParams().accept_factor * r
    return a * (2 * (len(ref) - 2) + 1) + 1e-9


def test_corner_stays_close():
    r = 30.0
    uav = UavState((0.0, 0.0), 0.0, 50.0, r)
    ref = np.array([[0.0, 0.0], [600.0, 0.0], [600.0, 600.0]])
    tr = track_route(uav, ref)
    assert np.min(np.hypot(*(tr.xy - ref[1]).T)) <= r + TrackerParams().accept_factor * r
    assert tr.length >= 1200.0 - _slack(ref, r)


def test_trajectory_not_shorter_than_reference_loop():
    uav = UavState((100.0, 100.0), 0.0, 40.0, 25.0)
    ref = np.array([[100.0, 100.0], [800.0, 150.0], [500.0, 800.0], [100.0, 100.0]])
    tr = track_route(uav, ref)
    ref_len = np.hypot(*np.diff(ref, axis=0).T).sum()
    assert tr.length >= ref_len - _slack(ref, 25.0)
    for v in ref:
        assert np.min(np.hypot(*(tr.xy - v).T)) <= 25.0 + 1e-9


def test_time_budget_exceeded():
    uav = UavState((0.0, 0.0), math.pi, 10.0, 100.0)
    with pytest.raises(MissionError):
        track_route(uav, np.array([[0.0, 0.0], [500.0, 0.0]]), TrackerParams(time_factor=0.5, time_margin=0.0))


def test_measurement_count_conservation(scen):
    trajs = [track_route(UavState((100.0, 100.0), 0.0, 40.0, 25.0), np.array([[100.0, 100.0], [700.0, 100.0]])),
             track_route(UavState((100.0, 900.0), 0.0, 40.0, 25.0), np.array([[100.0, 900.0], [900.0, 900.0]]))]
    meas = collect_measurements(scen, trajs, 1.5, 1.0, np.random.default_rng(0))
    for k, tr in enumerate(trajs):
        t = meas.t[meas.uav == k]
        assert len(t) == math.floor(tr.duration / 1.5 + 1e-9) + 1
        assert np.all(np.diff(t) > 0)
        assert np.allclose(np.diff(t), 1.5)
    assert np.all(np.diff(meas.t) >= 0)


def test_noise_free_measurements_equal_truth(scen):
    tr = track_route(UavState((100.0, 100.0), 0.0, 40.0, 25.0), np.array([[100.0, 100.0], [700.0, 300.0]]))
    meas = collect_measurements(scen, [tr], 2.0, 1.0, None)
    assert np.array_equal(meas.value, scen.truth(meas.xy))


def test_sample_times():
    assert sample_times(10.0, 2.5).tolist() == [0.0, 2.5, 5.0, 7.5, 10.0]
    assert sample_times(0.0, 1.0).tolist() == [0.0]


def test_refresh_points():
    assert refresh_points(45, 20) == [20, 40, 45]
    assert refresh_points(40, 20) == [20, 40]
    assert refresh_points(5, 20) == [5]


def test_variance_near_three_measurements():
    meas = np.array([[500.0, 500.0], [520.0, 500.0], [500.0, 530.0]])
    var = posterior_variance_at([[510.0, 510.0]], meas, SENSOR)
    assert var[0] < 0.2 * SENSOR.sigma_f ** 2


ROUTES = [np.array([[100.0, 100.0], [900.0, 100.0], [900.0, 500.0], [100.0, 500.0], [100.0, 100.0]]),
          np.array([[900.0, 900.0], [100.0, 900.0], [500.0, 600.0], [900.0, 900.0]])]
DEPOTS = [(100.0, 100.0), (900.0, 900.0)]


def _run(scen, grid, **kw):
    params = MissionParams(speed=40.0, r_min=25.0, period=2.0, refit_every=15, **kw)
    return run_mission(scen, ROUTES, DEPOTS, grid, SENSOR, params, seed=7, prior_mean=-40.0)


def test_mission_prior_snapshot(scen, grid):
    res = _run(scen, grid)
    first = res.timeline[0]
    assert first.n_measurements == 0
    assert np.all(first.var == SENSOR.sigma_f ** 2)
    truth = scen.truth(grid.points)
    assert res.metrics[0]["rmse_dbm"] == pytest.approx(np.sqrt(np.mean((-40.0 - truth) ** 2)))


def test_fixed_hyper_variance_monotone(scen, grid):
    res = _run(scen, grid, refit=False)
    mv = [m["mean_var_dbm2"] for m in res.metrics]
    assert all(b <= a + 1e-9 for a, b in zip(mv, mv[1:]))
    mi = [m["cumulative_mi_nats"] for m in res.metrics]
    assert all(b >= a - 1e-9 for a, b in zip(mi, mi[1:]))


def test_refit_still_below_prior(scen, grid):
    res = _run(scen, grid)
    assert res.metrics[-1]["mean_var_dbm2"] < res.metrics[0]["mean_var_dbm2"]
    fixed = [m["cumulative_mi_fixed_nats"] for m in res.metrics]
    assert all(b >= a - 1e-9 for a, b in zip(fixed, fixed[1:]))


def test_mission_deterministic_and_thread_independent(scen, grid):
    a = _run(scen, grid)
    params = MissionParams(speed=40.0, r_min=25.0, period=2.0, refit_every=15)
    b = run_mission(scen, ROUTES, DEPOTS, grid, SENSOR, params, seed=7, prior_mean=-40.0, threads=2)
    assert np.array_equal(a.measurements.value, b.measurements.value)
    assert np.array_equal(a.final.mean, b.final.mean) and np.array_equal(a.final.var, b.final.var)
    for ta, tb in zip(a.trajectories, b.trajectories):
        assert np.array_equal(ta.xy, tb.xy)


def test_empty_tour_stays_home(scen, grid):
    params = MissionParams(speed=40.0, r_min=25.0, period=2.0)
    res = run_mission(scen, [ROUTES[0], np.zeros((0, 2))], DEPOTS, grid, SENSOR, params, 1, -40.0)
    home = res.measurements.xy[res.measurements.uav == 1]
    assert home.tolist() == [list(DEPOTS[1])]


def test_route_depot_count_mismatch(scen, grid):
    with pytest.raises(PreconditionError):
        run_mission(scen, ROUTES, DEPOTS[:1], grid, SENSOR, MissionParams(), 0, 0.0)
