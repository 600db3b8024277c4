"""Task-location placement by maximizing mutual information with a test grid."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from .errors import ConfigError
from .gp import GpHyperparams, cholesky, cross_cov, gram, mutual_information
from .scenario import Region
from .simplex import nelder_mead

PENALTY_PER_METER = 1e3  # nats per meter of projection displacement
DEFAULT_RESTARTS = 5


@dataclass(frozen=True, eq=False)
class TestGrid:
    points: np.ndarray
    spacing: float


@dataclass(frozen=True, eq=False)
class Placement:
    locations: np.ndarray
    objective: float
    # best penalized objective per simplex iteration of the winning restart
    trace: list = field(default_factory=list)
    restart: int = 0

    @property
    def n(self) -> int:
        return len(self.locations)


def make_test_grid(region: Region, spacing: float) -> TestGrid:
    """Equally spaced lattice over the bounding box, keeping free points only."""
    if not spacing > 0:
        raise ConfigError(f"test-grid spacing must be positive, got {spacing}")
    xmin, ymin, xmax, ymax = region.bounds
    nx = int(math.floor(region.width / spacing + 1e-9)) + 1
    ny = int(math.floor(region.height / spacing + 1e-9)) + 1
    xs = xmin + spacing * np.arange(nx)
    ys = ymin + spacing * np.arange(ny)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    pts = np.column_stack([X.ravel(), Y.ravel()])
    pts = pts[region.contains(pts)]
    if len(pts) < 4:
        raise ConfigError(f"test grid with spacing {spacing} m has only {len(pts)} free points")
    return TestGrid(pts, float(spacing))


def placement_objective(task_points, grid: TestGrid, h: GpHyperparams) -> float:
    """MI between noisy readings at the task locations and at the grid points."""
    P = np.asarray(task_points, dtype=float).reshape(-1, 2)
    if len(P) == 0:
        return 0.0
    K = gram(np.vstack([P, grid.points]), h, add_noise=True)
    n = len(P)
    return mutual_information(K, (np.arange(n), np.arange(n, len(K))))


class _GridConditioner:
    """Same MI as :func:`placement_objective`, via a cached factor of the grid block.

    I = 0.5 * (logdet K_TT - logdet(K_TT - K_To K_oo^-1 K_oT)).
    """

    def __init__(self, grid: TestGrid, h: GpHyperparams):
        self.grid = grid
        self.h = h
        self.L = cholesky(gram(grid.points, h, add_noise=True), h.sigma_f ** 2)

    def __call__(self, P: np.ndarray) -> float:
        if len(P) == 0:
            return 0.0
        h = self.h
        K_tt = gram(P, h, add_noise=True)
        V = solve_triangular(self.L, cross_cov(self.grid.points, P, h), lower=True)
        S = K_tt - V.T @ V
        scale = h.sigma_f ** 2
        L1 = cholesky(K_tt, scale)
        L2 = cholesky(0.5 * (S + S.T), scale)
        return float(np.sum(np.log(np.diag(L1))) - np.sum(np.log(np.diag(L2))))


def stratified_points(region: Region, n: int, rng: np.random.Generator) -> np.ndarray:
    """One uniform free-space draw inside each of n randomly chosen strata."""
    if n == 0:
        return np.zeros((0, 2))
    cols = int(math.ceil(math.sqrt(n)))
    rows = int(math.ceil(n / cols))
    cells = rng.permutation(rows * cols)[:n]
    xmin, ymin, _, _ = region.bounds
    w, hgt = region.width / cols, region.height / rows
    out = np.empty((n, 2))
    for k, c in enumerate(cells):
        ci, ri = c % cols, c // cols
        for _ in range(100):
            p = np.array([xmin + (ci + rng.random()) * w, ymin + (ri + rng.random()) * hgt])
            if region.contains(p)[0]:
                break
        else:
            p, _ = region.project(p)
        out[k] = p
    return out


def _project_all(region: Region, X: np.ndarray) -> tuple[np.ndarray, float]:
    xmin, ymin, xmax, ymax = region.bounds
    Q = np.column_stack([np.clip(X[:, 0], xmin, xmax), np.clip(X[:, 1], ymin, ymax)])
    disp = np.hypot(*(Q - X).T)
    if region.obstacles:
        for k in np.flatnonzero(region.in_obstacle(Q)):
            q, _ = region.project(Q[k])
            Q[k] = q
            disp[k] = float(np.hypot(*(q - X[k])))
    return Q, float(disp.sum())


def _run_restart(region, start, grid, h, objective, max_iter):
    n = len(start)

    def neg(x):
        Q, moved = _project_all(region, x.reshape(n, 2))
        try:
            value = objective(Q)
        except ArithmeticError:
            return math.inf
        return -(value - PENALTY_PER_METER * moved)

    step = np.tile([0.05 * region.width, 0.05 * region.height], n)
    res = nelder_mead(neg, start.ravel(), step=step, max_iter=max_iter)
    Q, _ = _project_all(region, res.x.reshape(n, 2))
    value = placement_objective(Q, grid, h)
    start_value = placement_objective(start, grid, h)
    if value < start_value:
        # projection can only lose to the start through rounding; keep the start
        Q, value = start.copy(), start_value
    return Q, value, [-v for v in res.trace]


def optimize_task_locations(region: Region, n: int, grid: TestGrid, h_plan: GpHyperparams,
                            seed: int, restarts: int = DEFAULT_RESTARTS, threads: int = 1,
                            initial=None, max_iter: int | None = None) -> Placement:
    """Simplex search over all 2n coordinates, best of ``restarts`` seeded starts.

    ``initial`` warm-starts restart 0; missing points are filled with
    stratified draws. Ties go to the lowest restart index.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    if n == 0:
        return Placement(np.zeros((0, 2)), 0.0, [], 0)
    objective = _GridConditioner(grid, h_plan)
    starts = []
    for r in range(max(1, restarts)):
        rng = np.random.default_rng([seed, r])
        pts = stratified_points(region, n, rng)
        if r == 0 and initial is not None:
            init = np.asarray(initial, dtype=float).reshape(-1, 2)[:n]
            pts = np.vstack([init, pts[len(init):]]) if len(init) < n else init.copy()
            pts, _ = _project_all(region, pts)
        starts.append(pts)

    def job(r):
        return _run_restart(region, starts[r], grid, h_plan, objective, max_iter)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(job, range(len(starts))))
    else:
        results = [job(r) for r in range(len(starts))]
    best = 0
    for r, res in enumerate(results):
        if res[1] > results[best][1]:
            best = r
    Q, value, trace = results[best]
    return Placement(Q, value, trace, best)


# ---------------------------------------------------------------------------
# over/under-fitting diagnostic


def hamiltonian_path(points: np.ndarray) -> np.ndarray:
    """Open path through all points: nearest neighbour from the lowest-left
    point, then 2-opt until no improving reversal remains."""
    P = np.asarray(points, dtype=float)
    n = len(P)
    if n <= 2:
        return np.arange(n)
    D = np.hypot(*(P[:, None, :] - P[None, :, :]).transpose(2, 0, 1))
    start = int(np.argmin(P[:, 0] + P[:, 1]))
    order = [start]
    left = set(range(n)) - {start}
    while left:
        last = order[-1]
        nxt = min(left, key=lambda j: (D[last, j], j))
        order.append(nxt)
        left.remove(nxt)
    order = np.array(order)
    improved = True
    while improved:
        improved = False
        for i in range(0, n - 2):
            for j in range(i + 2, n):
                a, b, c = order[i], order[i + 1], order[j]
                # gain from reversing order[i+1 .. j]
                if j + 1 < n:
                    d = order[j + 1]
                    delta = D[a, c] + D[b, d] - D[a, b] - D[c, d]
                else:
                    delta = D[a, c] - D[a, b]
                if delta < -1e-9:
                    order[i + 1:j + 1] = order[i + 1:j + 1][::-1].copy()
                    improved = True
    return order


def sample_polyline(points: np.ndarray, spacing: float) -> np.ndarray:
    """Points every ``spacing`` meters of arc length, starting at the first vertex."""
    P = np.asarray(points, dtype=float)
    if len(P) == 0:
        return np.zeros((0, 2))
    seg = np.hypot(*np.diff(P, axis=0).T)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    s = np.arange(0.0, cum[-1] + 1e-9, spacing)
    return np.column_stack([np.interp(s, cum, P[:, 0]), np.interp(s, cum, P[:, 1])])


@dataclass(frozen=True)
class FittingDiagnostic:
    classification: str
    mi_tasks: float
    mi_path: float
    ratio: float
    n_tasks: int
    n_sensing: int
    path_length: float

    def as_record(self) -> dict:
        return {
            "classification": self.classification,
            "mi_tasks_nats": self.mi_tasks,
            "mi_path_nats": self.mi_path,
            "ratio": self.ratio,
            "n_tasks": self.n_tasks,
            "n_sensing_points": self.n_sensing,
            "path_length_m": self.path_length,
        }


RATIO_BAND = (0.9, 1.2)


def fitting_diagnostic(placement: Placement, sensing_spacing: float, h_sensor: GpHyperparams,
                       grid: TestGrid, h_plan: GpHyperparams | None = None,
                       band: tuple[float, float] = RATIO_BAND) -> FittingDiagnostic:
    """Compare the information promised by the task locations with what a
    sensor sampling every ``sensing_spacing`` meters along the tour through
    them would collect.

    ``h_plan`` scores the task locations and defaults to ``h_sensor``. A
    ratio below the band, or at least as many tasks as sensing points along
    the tour (dense overlap), means overfitted; above the band means the
    tasks under-represent the region (underfitted).
    """
    h_plan = h_plan or h_sensor
    P = np.asarray(placement.locations, dtype=float)
    mi1 = placement_objective(P, grid, h_plan)
    path = P[hamiltonian_path(P)]
    samples = sample_polyline(path, sensing_spacing)
    mi2 = placement_objective(samples, grid, h_sensor)
    length = float(np.hypot(*np.diff(path, axis=0).T).sum()) if len(path) > 1 else 0.0
    ratio = mi2 / mi1 if mi1 > 0 else math.inf
    lo, hi = band
    if ratio < lo or len(P) >= len(samples):
        label = "overfitted"
    elif ratio > hi:
        label = "underfitted"
    else:
        label = "normal"
    return FittingDiagnostic(label, mi1, mi2, ratio, len(P), len(samples), length)
