"""Dubins UAVs flying their tours, sampling the RF field, and the belief map built from it."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import MissionError, PreconditionError
from .gp import (GpHyperparams, GpModel, cross_cov, fit_hyperparams, gram, mutual_information,
                 predict_marginals)
from .placement import TestGrid
from .routing import RouteSolution
from .scenario import Scenario


def wrap_angle(a: float) -> float:
    """Map an angle to (-pi, pi]."""
    a = math.fmod(a + math.pi, 2 * math.pi)
    if a <= 0:
        a += 2 * math.pi
    return a - math.pi


@dataclass(frozen=True)
class UavState:
    position: tuple[float, float]
    heading: float
    speed: float
    r_min: float

    def __post_init__(self):
        if not self.speed > 0 or not self.r_min > 0:
            raise ValueError(f"speed and r_min must be positive, got {self.speed}, {self.r_min}")
        object.__setattr__(self, "position", (float(self.position[0]), float(self.position[1])))
        object.__setattr__(self, "heading", wrap_angle(float(self.heading)))

    @property
    def max_turn_rate(self) -> float:
        return self.speed / self.r_min


HEADING_GAIN = 2.0  # 1/s


def turn_command(state: UavState, carrot, k_h: float = HEADING_GAIN) -> float:
    """Proportional heading controller, saturated at v / r_min."""
    dx = carrot[0] - state.position[0]
    dy = carrot[1] - state.position[1]
    err = wrap_angle(math.atan2(dy, dx) - state.heading)
    u_max = state.max_turn_rate
    return min(max(k_h * err, -u_max), u_max)


def step_dubins(state: UavState, carrot, dt: float, k_h: float = HEADING_GAIN) -> UavState:
    """One explicit Euler step of x' = v cos th, y' = v sin th, th' = u."""
    if not dt > 0:
        raise PreconditionError(f"dt must be positive, got {dt}")
    u = turn_command(state, carrot, k_h)
    x, y = state.position
    th = state.heading
    pos = (x + state.speed * dt * math.cos(th), y + state.speed * dt * math.sin(th))
    return UavState(pos, th + u * dt, state.speed, state.r_min)


@dataclass(frozen=True)
class TrackerParams:
    carrot_factor: float = 3.0   # carrot distance in units of r_min
    accept_factor: float = 1.0   # acceptance radius in units of r_min
    k_h: float = HEADING_GAIN
    dt: float = 0.1
    # time budget = time_factor * reference length / v + time_margin
    time_factor: float = 3.0
    time_margin: float = 120.0


@dataclass(frozen=True, eq=False)
class Trajectory:
    t: np.ndarray
    xy: np.ndarray
    heading: np.ndarray

    @property
    def duration(self) -> float:
        return float(self.t[-1])

    @property
    def length(self) -> float:
        return float(np.hypot(*np.diff(self.xy, axis=0).T).sum()) if len(self.xy) > 1 else 0.0


class _Polyline:
    def __init__(self, points):
        P = np.asarray(points, dtype=float).reshape(-1, 2)
        keep = np.concatenate([[True], np.hypot(*np.diff(P, axis=0).T) > 0])
        self.P = P[keep]
        self.seg = np.hypot(*np.diff(self.P, axis=0).T)
        self.cum = np.concatenate([[0.0], np.cumsum(self.seg)])
        self.total = float(self.cum[-1])

    def at(self, s: float) -> np.ndarray:
        s = min(max(s, 0.0), self.total)
        k = min(int(np.searchsorted(self.cum, s, side="right")) - 1, len(self.seg) - 1)
        f = (s - self.cum[k]) / self.seg[k]
        return self.P[k] + f * (self.P[k + 1] - self.P[k])

    def advance(self, p: np.ndarray, s: float, window: float) -> float:
        """Arc length of the closest point to p within [s, s + window]."""
        best_s, best_d = s, float(np.hypot(*(self.at(s) - p)))
        k0 = max(int(np.searchsorted(self.cum, s, side="right")) - 1, 0)
        for k in range(k0, len(self.seg)):
            if self.cum[k] > s + window:
                break
            a, b = self.P[k], self.P[k + 1]
            f = float(np.clip(np.dot(p - a, b - a) / self.seg[k] ** 2, 0.0, 1.0))
            sk = min(max(self.cum[k] + f * self.seg[k], s), s + window)
            d = float(np.hypot(*(self.at(sk) - p)))
            if d < best_d:
                best_s, best_d = sk, d
        return best_s


def track_route(uav: UavState, route, params: TrackerParams = TrackerParams()) -> Trajectory:
    """Pure-pursuit tracking of a reference polyline.

    ``route`` is a sequence of planned paths (their waypoints are chained)
    or an (k, 2) array of waypoints. The carrot runs ahead along the
    reference but never past the next waypoint not yet reached; a waypoint
    counts as reached within the acceptance radius. The run ends when the
    last waypoint is reached. Wind changes the edge costs only, not the
    ground track.
    """
    if len(route) and hasattr(route[0], "waypoints"):
        pts = np.vstack([route[0].waypoints] + [p.waypoints[1:] for p in route[1:]])
    else:
        pts = np.asarray(route, dtype=float).reshape(-1, 2)
    line = _Polyline(pts)
    state = uav
    ts, xy, hd = [0.0], [state.position], [state.heading]
    if line.total == 0.0:
        return Trajectory(np.array(ts), np.array(xy), np.array(hd))
    carrot_d = params.carrot_factor * uav.r_min
    accept = params.accept_factor * uav.r_min
    budget = params.time_factor * line.total / uav.speed + params.time_margin
    max_steps = int(math.ceil(budget / params.dt))
    n_vertex = len(line.P)

    def reached(p, v):
        while v < n_vertex and math.hypot(*(p - line.P[v])) <= accept:
            v += 1
        return v

    s = 0.0
    target = reached(np.array(state.position), 1)
    for k in range(1, max_steps + 1):
        cap = float(line.cum[target])
        carrot = line.at(min(s + carrot_d, cap))
        state = step_dubins(state, carrot, params.dt, params.k_h)
        p = np.array(state.position)
        s = min(line.advance(p, s, 2.0 * carrot_d), cap)
        ts.append(k * params.dt)
        xy.append(state.position)
        hd.append(state.heading)
        target = reached(p, target)
        if target == n_vertex:
            return Trajectory(np.array(ts), np.array(xy), np.array(hd))
    end = line.P[-1]
    raise MissionError(f"waypoint {target} of {n_vertex - 1} not reached within {budget:.1f} s "
                       f"(route ends at ({end[0]:.1f}, {end[1]:.1f}))")


def route_polylines(solution: RouteSolution, paths: dict) -> list[np.ndarray]:
    """Reference polyline per UAV: depot -> tasks -> depot through the planned paths.

    An empty tour gives an empty polyline (the UAV stays at its depot).
    """
    out = []
    for tour, depot in zip(solution.tours, solution.depots):
        if not tour:
            out.append(np.zeros((0, 2)))
            continue
        seq = [depot, *tour, depot]
        parts = [paths[(seq[0], seq[1])].waypoints]
        parts += [paths[(a, b)].waypoints[1:] for a, b in zip(seq[1:], seq[2:])]
        out.append(np.vstack(parts))
    return out


# ---------------------------------------------------------------------------
# mission


@dataclass(frozen=True)
class MissionParams:
    speed: float = 100.0
    r_min: float = 50.0
    period: float = 10.0
    refit_every: int = 20
    refit: bool = True
    noise: bool = True
    tracker: TrackerParams = TrackerParams()


@dataclass(frozen=True, eq=False)
class Measurements:
    t: np.ndarray
    uav: np.ndarray
    xy: np.ndarray
    value: np.ndarray

    def __len__(self):
        return len(self.t)


@dataclass(frozen=True, eq=False)
class BeliefMap:
    grid: TestGrid
    mean: np.ndarray
    var: np.ndarray
    hyper: GpHyperparams
    n_measurements: int
    time: float

    @property
    def std(self) -> np.ndarray:
        return np.sqrt(self.var)


@dataclass(frozen=True, eq=False)
class MissionResult:
    trajectories: list
    measurements: Measurements
    timeline: list = field(default_factory=list)
    metrics: list = field(default_factory=list)

    @property
    def final(self) -> BeliefMap:
        return self.timeline[-1]


def sample_times(duration: float, period: float) -> np.ndarray:
    """0, period, 2 period, ... up to and including the duration."""
    count = int(math.floor(duration / period + 1e-9)) + 1
    return period * np.arange(count)


def _sample_trajectory(traj: Trajectory, period: float) -> tuple[np.ndarray, np.ndarray]:
    t = sample_times(traj.duration, period)
    t = np.minimum(t, traj.duration)
    xy = np.column_stack([np.interp(t, traj.t, traj.xy[:, 0]), np.interp(t, traj.t, traj.xy[:, 1])])
    return t, xy


def collect_measurements(scenario: Scenario, trajectories, period: float, sigma_n: float,
                         rng: np.random.Generator | None) -> Measurements:
    """Merge all UAV samples in (time, uav) order; noise is drawn in that order."""
    if not period > 0:
        raise PreconditionError(f"sensing period must be positive, got {period}")
    ts, us, xys = [], [], []
    for k, traj in enumerate(trajectories):
        t, xy = _sample_trajectory(traj, period)
        ts.append(t)
        us.append(np.full(len(t), k))
        xys.append(xy)
    t = np.concatenate(ts)
    u = np.concatenate(us)
    xy = np.vstack(xys)
    order = np.lexsort((u, t))
    t, u, xy = t[order], u[order], xy[order]
    value = np.asarray(scenario.truth(xy), dtype=float)
    if rng is not None and sigma_n > 0:
        value = value + sigma_n * rng.standard_normal(len(value))
    return Measurements(t, u, xy, value)


def grid_information(xy: np.ndarray, grid: TestGrid, h: GpHyperparams) -> float:
    """H(prior) - H(posterior) over noisy grid readings after observing at xy."""
    if len(xy) == 0:
        return 0.0
    K = gram(np.vstack([xy, grid.points]), h, add_noise=True)
    n = len(xy)
    return mutual_information(K, (np.arange(n), np.arange(n, len(K))))


def refresh_points(n_total: int, every: int) -> list[int]:
    """Measurement counts at which the belief is rebuilt, ending at n_total."""
    pts = list(range(every, n_total + 1, every)) if every > 0 else []
    if not pts or pts[-1] != n_total:
        pts.append(n_total)
    return [p for p in pts if p > 0]


def run_mission(scenario: Scenario, routes, depots, grid: TestGrid, sensor: GpHyperparams,
                params: MissionParams, seed: int, prior_mean: float, threads: int = 1) -> MissionResult:
    """Fly every UAV along its reference polyline, sample, and rebuild the belief.

    ``routes`` holds one polyline per UAV and ``depots`` the matching start
    positions. Every ``refit_every`` measurements (and at the end) the
    hyperparameters are refit from the previous ones and the belief is
    predicted over the grid. Metrics carry RMSE against the truth, the
    mean posterior std and the cumulative information both under the
    current and under the fixed sensor hyperparameters.
    """
    if len(routes) != len(depots):
        raise PreconditionError(f"{len(routes)} routes for {len(depots)} depots")

    def fly(k):
        pts = np.asarray(routes[k], dtype=float).reshape(-1, 2)
        start = np.asarray(depots[k], dtype=float)
        if len(pts) == 0:
            pts = start[None, :]
        ahead = pts[np.hypot(*(pts - start).T) > 0]
        heading = math.atan2(*(ahead[0] - start)[::-1]) if len(ahead) else 0.0
        uav = UavState(tuple(start), heading, params.speed, params.r_min)
        try:
            return track_route(uav, pts, params.tracker)
        except MissionError as exc:
            raise MissionError(f"uav {k}: {exc}") from None

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            trajectories = list(pool.map(fly, range(len(routes))))
    else:
        trajectories = [fly(k) for k in range(len(routes))]

    rng = np.random.default_rng(seed) if params.noise else None
    meas = collect_measurements(scenario, trajectories, params.period, sensor.sigma_n, rng)
    truth = np.asarray(scenario.truth(grid.points), dtype=float)

    hyper = sensor
    timeline, metrics = [], []

    def record(count, mean, var, h):
        t = float(meas.t[count - 1]) if count else 0.0
        belief = BeliefMap(grid, mean, var, h, count, t)
        timeline.append(belief)
        xy = meas.xy[:count]
        metrics.append({
            "n_measurements": count,
            "time_s": t,
            "rmse_dbm": float(np.sqrt(np.mean((mean - truth) ** 2))),
            "mean_std_dbm": float(np.mean(np.sqrt(var))),
            "mean_var_dbm2": float(np.mean(var)),
            "cumulative_mi_nats": grid_information(xy, grid, h),
            "cumulative_mi_fixed_nats": grid_information(xy, grid, sensor),
            "sigma_f": h.sigma_f,
            "length_scales": list(h.length_scales),
        })

    n_grid = len(grid.points)
    record(0, np.full(n_grid, float(prior_mean)), np.full(n_grid, sensor.sigma_f ** 2), sensor)
    for count in refresh_points(len(meas), params.refit_every):
        model = GpModel.from_data(meas.xy[:count], meas.value[:count], hyper, prior_mean)
        if params.refit and count >= 2:
            hyper = fit_hyperparams(model, init=hyper)
            model = model.with_hyper(hyper)
        mean, var = predict_marginals(model, grid.points, threads)
        record(count, mean, var, hyper)
    return MissionResult(trajectories, meas, timeline, metrics)


def posterior_variance_at(points, meas_xy, h: GpHyperparams) -> np.ndarray:
    """GP posterior variance at points given noisy readings at meas_xy (no data values needed)."""
    P = np.asarray(points, dtype=float).reshape(-1, 2)
    X = np.asarray(meas_xy, dtype=float).reshape(-1, 2)
    if len(X) == 0:
        return np.full(len(P), h.sigma_f ** 2)
    K = gram(X, h, add_noise=True)
    k = cross_cov(P, X, h)
    return h.sigma_f ** 2 - np.einsum("ij,ji->i", k, np.linalg.solve(K, k.T))
