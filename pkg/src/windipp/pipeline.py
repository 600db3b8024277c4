"""The four pipeline stages and the artifact layout of an output directory."""

from __future__ import annotations

import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import io
from .config import PipelineConfig
from .errors import ConfigError
from .mission import MissionResult, route_polylines, run_mission
from .placement import (Placement, fitting_diagnostic, make_test_grid,
                        optimize_task_locations)
from .planner import CostMatrix, build_cost_matrix, build_sample_graph, check_airspeed
from .routing import RouteSolution, check_feasible, feasibility_report, format_violations, solve_ga

PLACEMENT = "placement.csv"
COSTS = "costs.csv"
PATHS = "paths.json"
ROUTES = "routes.json"
TRAJECTORIES = "trajectories.csv"
MEASUREMENTS = "measurements.csv"
BELIEF = "belief.csv"
METRICS = "metrics.json"
SUMMARY = "summary.json"
# wall-clock and cache counters; the only output that differs between runs
TIMINGS = "timings.json"
TRUTH = "truth.csv"

STAGE_OUTPUTS = {
    "place": (PLACEMENT,),
    "costs": (COSTS, PATHS),
    "route": (ROUTES,),
    "simulate": (TRAJECTORIES, MEASUREMENTS, BELIEF, METRICS),
}
STAGE_INPUTS = {
    "place": (),
    "costs": (PLACEMENT,),
    "route": (COSTS,),
    "simulate": (PATHS, ROUTES),
}
STAGES = tuple(STAGE_OUTPUTS)
RUN_OUTPUTS = tuple(f for stage in STAGES for f in STAGE_OUTPUTS[stage])


class StageError(RuntimeError):
    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


class MissingInputs(StageError):
    pass


@dataclass
class Context:
    cfg: PipelineConfig
    out: Path
    threads: int = 1

    def __post_init__(self):
        self.scenario = self.cfg.build_scenario()
        self.grid = make_test_grid(self.scenario.region, self.cfg.placement.grid_spacing)

    def path(self, name: str) -> Path:
        return self.out / name

    def require(self, stage: str):
        missing = [str(self.path(n)) for n in STAGE_INPUTS[stage] if not self.path(n).exists()]
        if missing:
            raise MissingInputs(stage, "missing inputs: " + ", ".join(missing))


def _guard(stage: str, fn, *args):
    try:
        return fn(*args)
    except (StageError, ConfigError):
        raise
    except (ArithmeticError, ValueError, RuntimeError, KeyError) as exc:
        raise StageError(stage, f"{type(exc).__name__}: {exc}") from exc


# stages


def place(ctx: Context) -> Placement:
    cfg = ctx.cfg.placement
    return optimize_task_locations(ctx.scenario.region, cfg.n_tasks, ctx.grid, ctx.cfg.h_plan,
                                   cfg.seed, cfg.restarts, ctx.threads, max_iter=cfg.max_iter)


def costs(ctx: Context, tasks: np.ndarray) -> CostMatrix:
    cfg = ctx.cfg.planner
    wind = ctx.scenario.wind
    check_airspeed(wind, cfg.v0)
    depots = np.array(ctx.cfg.mission.depots)
    fixed = np.vstack([tasks, depots])
    graph = build_sample_graph(ctx.scenario.region, wind, fixed, cfg.n_samples, cfg.seed, cfg.gamma)
    n = len(tasks)
    return build_cost_matrix(graph, range(n, n + len(depots)), range(n), wind, cfg.v0, ctx.threads)


def route(ctx: Context, cm: CostMatrix) -> RouteSolution:
    cfg = ctx.cfg.routing
    sol = solve_ga(cm, cm.n_tasks, cm.n_depots, cfg.ga, cfg.seed, ctx.threads)
    bad = check_feasible(sol, cm.n_tasks, cm.n_depots, cm)
    if bad:
        raise StageError("route", "infeasible solution\n" + format_violations(bad))
    return sol


def simulate(ctx: Context, paths: dict, sol: RouteSolution) -> MissionResult:
    cfg = ctx.cfg
    polylines = route_polylines(sol, paths)
    return run_mission(ctx.scenario, polylines, cfg.mission.depots, ctx.grid, cfg.sensor,
                       cfg.mission.params, cfg.mission.seed, cfg.prior_mean, ctx.threads)


# stage commands: compute, then write that stage's files


def run_place(ctx: Context) -> Placement:
    pl = _guard("place", place, ctx)
    io.write_placement(ctx.path(PLACEMENT), pl.locations)
    return pl


def run_costs(ctx: Context) -> CostMatrix:
    ctx.require("costs")
    tasks = _guard("costs", io.read_placement, ctx.path(PLACEMENT))
    cm = _guard("costs", costs, ctx, tasks)
    io.write_costs(ctx.path(COSTS), cm)
    io.write_paths(ctx.path(PATHS), cm)
    return cm


def run_route(ctx: Context) -> RouteSolution:
    ctx.require("route")
    cm = _guard("route", io.read_costs, ctx.path(COSTS), ctx.cfg.m)
    sol = _guard("route", route, ctx, cm)
    io.write_routes(ctx.path(ROUTES), sol)
    return sol


def run_simulate(ctx: Context) -> MissionResult:
    ctx.require("simulate")
    paths = _guard("simulate", io.read_paths, ctx.path(PATHS))
    sol = _guard("simulate", io.read_routes, ctx.path(ROUTES))
    if len(sol.tours) != ctx.cfg.m:
        raise StageError("simulate", f"{len(sol.tours)} routes for {ctx.cfg.m} configured depots")
    res = _guard("simulate", simulate, ctx, paths, sol)
    io.write_trajectories(ctx.path(TRAJECTORIES), res.trajectories)
    io.write_measurements(ctx.path(MEASUREMENTS), res.measurements)
    io.write_belief(ctx.path(BELIEF), res.timeline)
    io.write_json(ctx.path(METRICS), res.metrics)
    return res


STAGE_RUNNERS = {"place": run_place, "costs": run_costs, "route": run_route, "simulate": run_simulate}


def run_all(ctx: Context) -> dict:
    """Every stage in order through the files, then the summary.

    Each stage reads its inputs back from disk, so a full run and a chain
    of single-stage runs see exactly the same data.
    """
    timings = {}
    out = {}
    for stage in STAGES:
        t0 = time.perf_counter()
        out[stage] = STAGE_RUNNERS[stage](ctx)
        timings[stage] = time.perf_counter() - t0
    pl, cm, sol, res = out["place"], out["costs"], out["route"], out["simulate"]
    mp = ctx.cfg.mission.params
    diag = fitting_diagnostic(pl, mp.speed * mp.period, ctx.cfg.sensor, ctx.grid)
    n, m = cm.n_tasks, cm.n_depots
    first, last = res.metrics[0], res.metrics[-1]
    summary = {
        "placement": {"n_tasks": pl.n, "objective_nats": pl.objective, "restart": pl.restart,
                      "diagnostic": diag.as_record()},
        "routing": {"c_max": sol.c_max, "total_cost": sol.total,
                    "feasibility": feasibility_report(sol, n, m, cm)},
        "mission": {"n_measurements": len(res.measurements),
                    "durations_s": [tr.duration for tr in res.trajectories],
                    "prior_rmse_dbm": first["rmse_dbm"],
                    "final_rmse_dbm": last["rmse_dbm"],
                    "final_mean_std_dbm": last["mean_std_dbm"],
                    "final_cumulative_mi_nats": last["cumulative_mi_nats"]},
        "wall_clock_file": TIMINGS,
    }
    io.write_json(ctx.path(SUMMARY), summary)
    io.write_json(ctx.path(TIMINGS), {
        "wall_clock_s": timings,
        "threads": ctx.threads,
        "planner_cache": cm.stats,
    })
    return summary


def export_truth(ctx: Context) -> Path:
    pts = ctx.grid.points
    io.write_truth(ctx.path(TRUTH), pts, ctx.scenario.truth(pts))
    return ctx.path(TRUTH)
