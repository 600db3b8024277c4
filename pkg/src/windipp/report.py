"""PNG figures rendered from the artifacts of a finished run.

matplotlib is only needed here, and only when figures are requested.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from . import io, pipeline

PNG_METADATA = {"Software": None}


def _grid_image(xy: np.ndarray, values: np.ndarray):
    xs = np.unique(xy[:, 0])
    ys = np.unique(xy[:, 1])
    img = np.full((len(ys), len(xs)), np.nan)
    ix = np.searchsorted(xs, xy[:, 0])
    iy = np.searchsorted(ys, xy[:, 1])
    img[iy, ix] = values
    return xs, ys, img


def render_figures(out_dir) -> list[Path]:
    """Overview map, final belief and metric curves into ``out_dir/figures``."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out = Path(out_dir)
    fig_dir = out / "figures"
    fig_dir.mkdir(exist_ok=True)
    tasks = io.read_placement(out / pipeline.PLACEMENT)
    paths = io.read_paths(out / pipeline.PATHS)
    routes = io.read_routes(out / pipeline.ROUTES)
    trajs = io.read_trajectories(out / pipeline.TRAJECTORIES)
    belief = io.read_belief(out / pipeline.BELIEF)
    metrics = io.read_json(out / pipeline.METRICS)
    written = []

    final = belief[-1]
    xs, ys, mean_img = _grid_image(final["xy"], final["mean"])
    _, _, std_img = _grid_image(final["xy"], final["std"])
    extent = (xs[0], xs[-1], ys[0], ys[-1])

    fig, ax = plt.subplots(figsize=(6, 6))
    ax.imshow(mean_img, origin="lower", extent=extent, cmap="viridis", alpha=0.6)
    colors = plt.rcParams["axes.prop_cycle"].by_key()["color"]
    n = len(tasks)
    for k, (tour, depot) in enumerate(zip(routes.tours, routes.depots)):
        c = colors[k % len(colors)]
        seq = [depot, *tour, depot] if tour else []
        for a, b in zip(seq, seq[1:]):
            wp = paths[(a, b)].waypoints
            ax.plot(wp[:, 0], wp[:, 1], "--", color=c, lw=1)
        t, xy, _ = trajs[k + 1]
        ax.plot(xy[:, 0], xy[:, 1], "-", color=c, lw=1.5, label=f"UAV {k + 1}")
        ax.plot(*xy[0], "s", color=c, ms=8)
    ax.plot(tasks[:, 0], tasks[:, 1], "k^", ms=7, label="tasks")
    for i, (x, y) in enumerate(tasks, start=1):
        ax.annotate(str(i), (x, y), textcoords="offset points", xytext=(4, 4), fontsize=8)
    ax.set_xlabel("x (m)")
    ax.set_ylabel("y (m)")
    ax.set_title(f"{n} tasks, {len(routes.tours)} UAVs")
    ax.legend(loc="upper right", fontsize=8)
    written.append(fig_dir / "overview.png")
    fig.savefig(written[-1], dpi=120, metadata=PNG_METADATA)
    plt.close(fig)

    fig, axes = plt.subplots(1, 2, figsize=(11, 5))
    for ax, img, title in ((axes[0], mean_img, "posterior mean (dBm)"),
                           (axes[1], std_img, "posterior std (dBm)")):
        im = ax.imshow(img, origin="lower", extent=extent, cmap="viridis")
        fig.colorbar(im, ax=ax, shrink=0.8)
        ax.set_title(title)
    written.append(fig_dir / "belief.png")
    fig.savefig(written[-1], dpi=120, metadata=PNG_METADATA)
    plt.close(fig)

    count = [r["n_measurements"] for r in metrics]
    fig, axes = plt.subplots(3, 1, figsize=(6, 8), sharex=True)
    axes[0].plot(count, [r["rmse_dbm"] for r in metrics], "o-")
    axes[0].set_ylabel("RMSE (dBm)")
    axes[1].plot(count, [r["mean_std_dbm"] for r in metrics], "o-")
    axes[1].set_ylabel("mean std (dBm)")
    axes[2].plot(count, [r["cumulative_mi_nats"] for r in metrics], "o-", label="fitted")
    axes[2].plot(count, [r["cumulative_mi_fixed_nats"] for r in metrics], "s--", label="fixed")
    axes[2].set_ylabel("cumulative MI (nats)")
    axes[2].set_xlabel("measurements")
    axes[2].legend()
    written.append(fig_dir / "metrics.png")
    fig.savefig(written[-1], dpi=120, metadata=PNG_METADATA)
    plt.close(fig)
    return written
