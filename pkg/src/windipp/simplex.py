"""Nelder-Mead simplex minimization.

Standard coefficients (reflection 1, expansion 2, contraction 1/2,
shrink 1/2) with the MATLAB ``fminsearch`` conventions for the initial
simplex and iteration budget (200 iterations per variable).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np


@dataclass
class SimplexResult:
    x: np.ndarray
    fun: float
    nit: int
    nfev: int
    converged: bool
    # best objective value after each iteration, non-increasing
    trace: list[float] = field(default_factory=list)


def initial_simplex(x0: np.ndarray, step) -> np.ndarray:
    n = len(x0)
    step = np.broadcast_to(np.asarray(step, dtype=float), (n,))
    simplex = np.tile(x0, (n + 1, 1))
    for i in range(n):
        simplex[i + 1, i] += step[i]
    return simplex


def nelder_mead(
    f: Callable[[np.ndarray], float],
    x0,
    step=None,
    max_iter: int | None = None,
    xtol: float = 1e-6,
    ftol: float | None = None,
) -> SimplexResult:
    """Minimize ``f`` starting from ``x0``.

    ``step`` sets the initial simplex edge per coordinate; by default 5% of
    each nonzero coordinate and 0.00025 for zeros, as fminsearch does.
    Stops when the simplex diameter drops below ``xtol`` (and, if given,
    the spread of vertex values below ``ftol``) or after ``max_iter``
    iterations.
    """
    x0 = np.asarray(x0, dtype=float).copy()
    n = len(x0)
    if max_iter is None:
        max_iter = 200 * n
    if step is None:
        step = np.where(x0 != 0, 0.05 * x0, 0.00025)
    sim = initial_simplex(x0, step)
    fs = np.array([f(v) for v in sim], dtype=float)
    nfev = n + 1
    trace = []
    converged = False
    it = 0
    while True:
        order = np.argsort(fs, kind="stable")
        sim, fs = sim[order], fs[order]
        trace.append(float(fs[0]))
        diameter = float(np.max(np.linalg.norm(sim[1:] - sim[0], axis=1))) if n else 0.0
        if diameter < xtol and (ftol is None or fs[-1] - fs[0] <= ftol):
            converged = True
            break
        if it >= max_iter:
            break
        it += 1

        centroid = sim[:-1].mean(axis=0)
        worst = sim[-1]
        xr = centroid + (centroid - worst)
        fr = f(xr)
        nfev += 1
        if fr < fs[0]:
            xe = centroid + 2.0 * (centroid - worst)
            fe = f(xe)
            nfev += 1
            if fe < fr:
                sim[-1], fs[-1] = xe, fe
            else:
                sim[-1], fs[-1] = xr, fr
            continue
        if fr < fs[-2]:
            sim[-1], fs[-1] = xr, fr
            continue
        if fr < fs[-1]:
            xc = centroid + 0.5 * (xr - centroid)
            fc = f(xc)
            nfev += 1
            if fc <= fr:
                sim[-1], fs[-1] = xc, fc
                continue
        else:
            xc = centroid + 0.5 * (worst - centroid)
            fc = f(xc)
            nfev += 1
            if fc < fs[-1]:
                sim[-1], fs[-1] = xc, fc
                continue
        # shrink toward the best vertex
        sim[1:] = sim[0] + 0.5 * (sim[1:] - sim[0])
        fs[1:] = [f(v) for v in sim[1:]]
        nfev += n
    return SimplexResult(sim[0].copy(), float(fs[0]), it, nfev, converged, trace)
