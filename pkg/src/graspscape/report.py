"""Figure rendering for the CLI report path.

Everything here is optional sugar on top of the delimited outputs: each
function takes already-computed results and writes a PNG next to them.
"""

from __future__ import annotations

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .mapping import BehavioralMap, level_sets_and_extrema


def render_map_figure(bmap: BehavioralMap, path: str) -> None:
    """mu_s heatmap with manifold outlines and level-set contours."""
    grid = bmap.grid
    mu = np.full((grid.ny, grid.nx), np.nan)
    man = np.full((grid.ny, grid.nx), np.nan)
    for (ix, iy, _iz), c in bmap.cells.items():
        if c.viable:
            mu[iy, ix] = c.mu_s
            man[iy, ix] = c.manifold_id
    extent = [grid.xs[0], grid.xs[-1], grid.ys[0], grid.ys[-1]]
    fig, axes = plt.subplots(1, 2, figsize=(11, 5))
    im = axes[0].imshow(mu, origin="lower", extent=extent, cmap="viridis",
                        vmin=0.0, vmax=1.0)
    fig.colorbar(im, ax=axes[0], label="mu_s")
    for m in bmap.manifolds:
        contours, maxima = level_sets_and_extrema(m, bmap.cells, grid)
        for level, lines in contours.items():
            for line in lines:
                axes[0].plot(line[:, 0], line[:, 1], "w-", lw=0.5)
        for (ix, iy, _iz) in maxima:
            axes[0].plot(grid.xs[ix], grid.ys[iy], "r.", ms=3)
    axes[0].set_title("mu_s with level sets")
    im2 = axes[1].imshow(man, origin="lower", extent=extent, cmap="tab10")
    fig.colorbar(im2, ax=axes[1], label="manifold id")
    axes[1].set_title("behavioral manifolds")
    for ax in axes:
        ax.set_xlabel("x [m]")
        ax.set_ylabel("y [m]")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_trace_figure(trace, bmap, path: str) -> None:
    """Search trajectory overlaid on the viability map (if one is given)."""
    fig, ax = plt.subplots(figsize=(6, 5))
    if bmap is not None:
        grid = bmap.grid
        mu = np.full((grid.ny, grid.nx), np.nan)
        for (ix, iy, _iz), c in bmap.cells.items():
            if c.viable:
                mu[iy, ix] = c.mu_s
        ax.imshow(mu, origin="lower", cmap="viridis", vmin=0, vmax=1,
                  extent=[grid.xs[0], grid.xs[-1], grid.ys[0], grid.ys[-1]])
    pts = np.array([p.position[:2] for p in trace.points])
    ax.plot(pts[:, 0], pts[:, 1], "r-", lw=0.7, alpha=0.7)
    jumps = np.array([p.position[:2] for p in trace.points
                      if p.event == "restart-jump"])
    if len(jumps):
        ax.plot(jumps[:, 0], jumps[:, 1], "g^", ms=6, label="restart jump")
        ax.legend()
    if trace.best_position is not None:
        ax.plot(*trace.best_position[:2], "r*", ms=12)
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_title("optimization trajectory")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_torque_curve(rows, path: str) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    taus = [r.tau for r in rows]
    ax.plot(taus, [r.mu_s for r in rows], "o-", label="mu_s")
    ax.plot(taus, [r.mu_g for r in rows], "s--", label="mu_g")
    ax.set_xlabel("max joint torque [N.m]")
    ax.set_ylabel("metric value")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_compare_figure(report, path: str) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    labels = ["+".join(k[0]) + f" ({k[1]})" for k in report.per_type]
    v_c = [t.v_c for t in report.per_type.values()]
    v_s = [t.v_s for t in report.per_type.values()]
    x = np.arange(len(labels))
    ax.bar(x - 0.2, v_c, width=0.4, label="baseline")
    ax.bar(x + 0.2, v_s, width=0.4, label="shape-informed")
    ax.set_xticks(x)
    ax.set_xticklabels(labels, rotation=20, ha="right", fontsize=8)
    ax.set_ylabel("manifold volume [cm^3]")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
