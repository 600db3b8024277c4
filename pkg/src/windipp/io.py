"""Artifact writers and readers.

Floats are written with ``repr`` so every file reads back bit-exactly.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .planner import CostMatrix, PlannedPath
from .routing import RouteSolution, solution_from_tours


def _f(x) -> str:
    return repr(float(x))


def _write_csv(path, header, rows):
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _read_csv(path, header):
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != list(header):
        raise ConfigError(f"{path}: expected header {','.join(header)}")
    return rows[1:]


def write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=False, allow_nan=False) + "\n",
                          encoding="utf-8")


def read_json(path):
    return json.loads(Path(path).read_text(encoding="utf-8"))


# placement


PLACEMENT_HEADER = ("task_id", "x", "y")


def write_placement(path, locations):
    _write_csv(path, PLACEMENT_HEADER,
               [(k + 1, _f(x), _f(y)) for k, (x, y) in enumerate(np.asarray(locations).reshape(-1, 2))])


def read_placement(path) -> np.ndarray:
    rows = _read_csv(path, PLACEMENT_HEADER)
    ids = [int(r[0]) for r in rows]
    if ids != list(range(1, len(rows) + 1)):
        raise ConfigError(f"{path}: task ids must be 1..n in order")
    return np.array([[float(r[1]), float(r[2])] for r in rows]).reshape(-1, 2)


# ground truth


TRUTH_HEADER = ("x", "y", "value_dbm")


def write_truth(path, points, values):
    _write_csv(path, TRUTH_HEADER, [(_f(p[0]), _f(p[1]), _f(v)) for p, v in zip(points, values)])


def read_truth(path) -> tuple[np.ndarray, np.ndarray]:
    rows = _read_csv(path, TRUTH_HEADER)
    arr = np.array([[float(c) for c in r] for r in rows]).reshape(-1, 3)
    return arr[:, :2], arr[:, 2]


# cost matrix and paths


COST_HEADER = ("from_id", "to_id", "cost", "length")


def write_costs(path, cm: CostMatrix):
    rows = []
    for i in range(1, cm.size + 1):
        for j in range(1, cm.size + 1):
            if cm.present(i, j):
                rows.append((i, j, _f(cm.cost[i - 1, j - 1]), _f(cm.length[i - 1, j - 1])))
    _write_csv(path, COST_HEADER, rows)


def read_costs(path, n_depots: int) -> CostMatrix:
    """Cost matrix from CSV; the last ``n_depots`` ids are the depots."""
    rows = _read_csv(path, COST_HEADER)
    if not rows:
        raise ConfigError(f"{path}: empty cost matrix")
    K = max(max(int(r[0]), int(r[1])) for r in rows)
    n = K - n_depots
    if n < 1:
        raise ConfigError(f"{path}: {K} ids cannot hold {n_depots} depots and at least one task")
    cost = np.full((K, K), np.nan)
    length = np.full((K, K), np.nan)
    for r in rows:
        i, j = int(r[0]), int(r[1])
        if not (1 <= i <= K and 1 <= j <= K) or i == j:
            raise ConfigError(f"{path}: bad id pair {i}->{j}")
        if i > n and j > n:
            raise ConfigError(f"{path}: depot-to-depot entry {i}->{j}")
        c, ln = float(r[2]), float(r[3])
        if not (math.isfinite(c) and c >= 0):
            raise ConfigError(f"{path}: cost {i}->{j} must be finite and non-negative")
        cost[i - 1, j - 1] = c
        length[i - 1, j - 1] = ln
    missing = [(i, j) for i in range(1, K + 1) for j in range(1, K + 1)
               if i != j and not (i > n and j > n) and math.isnan(cost[i - 1, j - 1])]
    if missing:
        raise ConfigError(f"{path}: missing entries " + ", ".join(f"{i}->{j}" for i, j in missing[:10]))
    return CostMatrix(n, n_depots, cost, length)


def write_paths(path, cm: CostMatrix):
    out = []
    for (i, j), p in sorted(cm.paths.items()):
        out.append({"from_id": i, "to_id": j, "cost": p.cost, "length": p.length,
                    "waypoints": [[float(x), float(y)] for x, y in p.waypoints]})
    write_json(path, out)


def read_paths(path) -> dict:
    paths = {}
    for rec in read_json(path):
        wp = np.array(rec["waypoints"], dtype=float).reshape(-1, 2)
        paths[(int(rec["from_id"]), int(rec["to_id"]))] = PlannedPath(
            wp, float(rec["cost"]), float(rec["length"]), ())
    return paths


# routes


def write_routes(path, sol: RouteSolution):
    write_json(path, [{"uav_id": k + 1, "depot_id": d, "tour": list(t), "cost": c}
                      for k, (t, d, c) in enumerate(zip(sol.tours, sol.depots, sol.costs))])


def read_routes(path, cm: CostMatrix | None = None) -> RouteSolution:
    """Routes JSON back to a solution; with ``cm`` the costs are recomputed."""
    recs = sorted(read_json(path), key=lambda r: r["uav_id"])
    tours = [tuple(int(t) for t in r["tour"]) for r in recs]
    if cm is not None:
        return solution_from_tours(tours, cm)
    costs = tuple(float(r["cost"]) for r in recs)
    return RouteSolution(tuple(tours), tuple(int(r["depot_id"]) for r in recs), costs,
                         max(costs) if costs else 0.0)


# mission


TRAJ_HEADER = ("t", "uav_id", "x", "y", "heading")


def write_trajectories(path, trajectories):
    rows = []
    for k, tr in enumerate(trajectories):
        for t, (x, y), h in zip(tr.t, tr.xy, tr.heading):
            rows.append((_f(t), k + 1, _f(x), _f(y), _f(h)))
    _write_csv(path, TRAJ_HEADER, rows)


def read_trajectories(path) -> dict:
    """uav_id -> (t, xy, heading) arrays."""
    out = {}
    for r in _read_csv(path, TRAJ_HEADER):
        out.setdefault(int(r[1]), []).append((float(r[0]), float(r[2]), float(r[3]), float(r[4])))
    return {k: (np.array(v)[:, 0], np.array(v)[:, 1:3], np.array(v)[:, 3]) for k, v in out.items()}


MEAS_HEADER = ("t", "uav_id", "x", "y", "value_dbm")


def write_measurements(path, meas):
    _write_csv(path, MEAS_HEADER, [(_f(t), int(u) + 1, _f(p[0]), _f(p[1]), _f(v))
                                   for t, u, p, v in zip(meas.t, meas.uav, meas.xy, meas.value)])


def read_measurements(path) -> dict:
    rows = _read_csv(path, MEAS_HEADER)
    arr = np.array([[float(c) for c in r] for r in rows]).reshape(-1, 5)
    return {"t": arr[:, 0], "uav_id": arr[:, 1].astype(int), "xy": arr[:, 2:4], "value": arr[:, 4]}


BELIEF_HEADER = ("snapshot", "n_measurements", "x", "y", "mean_dbm", "std_dbm")


def write_belief(path, timeline):
    rows = []
    for s, b in enumerate(timeline):
        for p, m, sd in zip(b.grid.points, b.mean, b.std):
            rows.append((s, b.n_measurements, _f(p[0]), _f(p[1]), _f(m), _f(sd)))
    _write_csv(path, BELIEF_HEADER, rows)


def read_belief(path) -> list[dict]:
    snaps = {}
    for r in _read_csv(path, BELIEF_HEADER):
        snaps.setdefault(int(r[0]), {"n_measurements": int(r[1]), "rows": []})["rows"].append(
            [float(c) for c in r[2:]])
    out = []
    for s in sorted(snaps):
        a = np.array(snaps[s]["rows"])
        out.append({"n_measurements": snaps[s]["n_measurements"], "xy": a[:, :2],
                    "mean": a[:, 2], "std": a[:, 3]})
    return out
