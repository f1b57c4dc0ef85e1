"""Figure builders and the render entry point.

Four figure kinds: a hysteresis loop (up and down sweeps with direction
arrows and one vertical mark per detected drop), an amplitude heatmap
over a (c, tau) grid, an intermittent trajectory with its amplitude
envelope overlaid, and a plain ramped trajectory. Rendering is
read-only; inputs are never touched for writing.
"""

from __future__ import annotations

from typing import Dict, Tuple

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

from .spec import PlotSpec, SchemaMismatch, read_table

_LABELS: Dict[str, Tuple[str, str]] = {
    "hysteresis": ("drive amplitude c", "response amplitude"),
    "tongue": ("drive amplitude c", "delay tau"),
    "intermittency": ("t", "h"),
    "ramp": ("t", "h"),
}


def _new_axes(spec: PlotSpec):
    fig = Figure(figsize=spec.figsize, dpi=spec.dpi)
    ax = fig.add_subplot()
    xl, yl = _LABELS[spec.kind]
    ax.set_xlabel(spec.xlabel if spec.xlabel is not None else xl)
    ax.set_ylabel(spec.ylabel if spec.ylabel is not None else yl)
    return fig, ax


def _finish(ax, spec: PlotSpec):
    # explicit limits override autoscale; applied last so they stick
    if spec.xlim is not None:
        ax.set_xlim(*spec.xlim)
    if spec.ylim is not None:
        ax.set_ylim(*spec.ylim)


def _arrow(ax, x, y, color):
    """Arrowhead along the traversal direction, near the curve middle."""
    if len(x) < 2:
        return
    a = (len(x) - 1) * 9 // 20
    b = min(a + max(1, len(x) // 10), len(x) - 1)
    ann = ax.annotate("", xy=(x[b], y[b]), xytext=(x[a], y[a]),
                      arrowprops=dict(arrowstyle="-|>", color=color,
                                      lw=1.4, shrinkA=0, shrinkB=0))
    ann.set_gid("direction-arrow")


def _fig_hysteresis(spec: PlotSpec) -> Figure:
    up = read_table(spec.inputs["sweep_up"], ("c", "amp"), "sweep_up")
    down = read_table(spec.inputs["sweep_down"], ("c", "amp"), "sweep_down")
    events = read_table(spec.inputs["events"], ("c", "drop"), "events")

    fig, ax = _new_axes(spec)
    for c in events["c"]:
        ax.axvline(c, color="0.45", ls=":", lw=1.0, gid="event-mark",
                   zorder=1)
    if len(up["c"]):
        ax.plot(up["c"], up["amp"], color="#1f77b4", lw=1.6,
                label="up sweep", gid="sweep-up")
        _arrow(ax, up["c"], up["amp"], "#1f77b4")
    if len(down["c"]):
        ax.plot(down["c"], down["amp"], color="#d62728", lw=1.6, ls="--",
                label="down sweep", gid="sweep-down")
        _arrow(ax, down["c"], down["amp"], "#d62728")
    if len(up["c"]) or len(down["c"]):
        ax.legend(loc="best")
    _finish(ax, spec)
    return fig


def _fig_tongue(spec: PlotSpec) -> Figure:
    path = spec.inputs["tongue"]
    tab = read_table(path, ("c", "tau", "amp"), "tongue")
    fig, ax = _new_axes(spec)
    if len(tab["amp"]):
        cs = np.unique(tab["c"])
        taus = np.unique(tab["tau"])
        if len(tab["amp"]) != len(cs) * len(taus):
            raise SchemaMismatch(
                f"tongue ({path}): {len(tab['amp'])} rows do not tile a "
                f"{len(cs)} x {len(taus)} grid")
        order = np.lexsort((tab["c"], tab["tau"]))
        grid = tab["amp"][order].reshape(len(taus), len(cs))
        # robust color limits: clip the odd blown-up or dead cell
        vmin, vmax = np.percentile(tab["amp"], [1.0, 99.0])
        mesh = ax.pcolormesh(cs, taus, grid, shading="nearest",
                             cmap="viridis", vmin=vmin, vmax=vmax)
        mesh.set_gid("tongue-mesh")
        fig.colorbar(mesh, ax=ax, label="amplitude")
    _finish(ax, spec)
    return fig


def _fig_intermittency(spec: PlotSpec) -> Figure:
    traj = read_table(spec.inputs["trajectory"], ("t", "h"), "trajectory")
    env = read_table(spec.inputs["envelope"], ("t_center", "amp"),
                     "envelope")
    fig, ax = _new_axes(spec)
    if len(traj["t"]):
        ax.plot(traj["t"], traj["h"], color="#1f77b4", lw=0.5,
                label="h(t)", gid="trajectory")
    if len(env["t_center"]):
        ax.plot(env["t_center"], env["amp"], color="#d62728", lw=1.8,
                label="amplitude envelope", gid="envelope")
    if len(traj["t"]) or len(env["t_center"]):
        ax.legend(loc="best")
    _finish(ax, spec)
    return fig


def _fig_ramp(spec: PlotSpec) -> Figure:
    traj = read_table(spec.inputs["trajectory"], ("t", "h"), "trajectory")
    fig, ax = _new_axes(spec)
    if len(traj["t"]):
        ax.plot(traj["t"], traj["h"], color="#1f77b4", lw=0.7,
                gid="trajectory")
    _finish(ax, spec)
    return fig


_BUILDERS = {
    "hysteresis": _fig_hysteresis,
    "tongue": _fig_tongue,
    "intermittency": _fig_intermittency,
    "ramp": _fig_ramp,
}


def build_figure(spec: PlotSpec) -> Figure:
    """Build the figure for a spec without writing anything."""
    return _BUILDERS[spec.kind](spec)


def render(spec: PlotSpec) -> str:
    """Render the figure and write it to the spec's output path."""
    fig = build_figure(spec)
    FigureCanvasAgg(fig)
    fig.savefig(spec.out_path, dpi=spec.dpi)
    return spec.out_path
