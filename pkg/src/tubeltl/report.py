"""Figures for abstractions and runs, written as byte-stable SVG."""
from __future__ import annotations

from pathlib import Path
from typing import Optional

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.patches import Polygon as PolygonPatch  # noqa: E402

from .geometry import Polytope, Workspace  # noqa: E402

_RC = {
    "svg.hashsalt": "tubeltl",
    "svg.fonttype": "none",
    "font.size": 9,
    "axes.linewidth": 0.8,
}


def _outline(ax, P: Polytope, **kw):
    ax.add_patch(PolygonPatch(P.vertices, closed=True, **kw))


def draw_workspace(ax, ws: Workspace) -> None:
    _outline(ax, ws.bounding, fill=False, edgecolor="0.3", linewidth=1.0)
    for O in ws.obstacles:
        _outline(ax, O, facecolor="0.15", edgecolor="0.15")
    for i in range(1, ws.n_regions + 1):
        _outline(ax, ws.region(i), facecolor="#d8e8f8", edgecolor="#2a5d8f", linewidth=1.0)
        c = ws.center(i)
        ax.text(c[0], c[1], f"$R_{i}$", ha="center", va="center", color="#2a5d8f")
    lo, hi = ws.bounding.bounding_box()
    pad = 0.03 * float(np.max(hi - lo))
    ax.set_xlim(lo[0] - pad, hi[0] + pad)
    ax.set_ylim(lo[1] - pad, hi[1] + pad)
    ax.set_aspect("equal")
    ax.set_xlabel("$x_1$")
    ax.set_ylabel("$x_2$")


def draw_tubes(ax, tubes, every: int = 1, color: str = "#c0504d") -> None:
    for t in tubes:
        for ell in range(0, t.horizon + 1, every):
            _outline(ax, t.section(ell), fill=False, edgecolor=color, linewidth=0.4, alpha=0.6)
        ax.plot(t.centers[:, 0], t.centers[:, 1], color=color, linewidth=0.6, linestyle="--")


def _save(fig, path) -> None:
    fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None}, bbox_inches="tight")
    plt.close(fig)


def plot_abstraction(path, ws: Workspace, library, title: Optional[str] = None) -> None:
    """Workspace with the first tube of every certified pair."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(5.5, 5.5))
        draw_workspace(ax, ws)
        for pair in sorted(library.reach):
            draw_tubes(ax, library.reach[pair][:1], every=4)
        if title:
            ax.set_title(title)
        _save(fig, path)


def plot_run(path, ws: Workspace, log, guide=None, title: Optional[str] = None) -> None:
    """Trajectory, communication instants and the tube sections that were used."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(5.5, 5.5))
        draw_workspace(ax, ws)
        if guide is not None:
            used = set()
            for q, leg in enumerate(guide.legs):
                if leg.variants is None or leg.start > log.steps or q not in guide.choice:
                    continue
                key = (leg.pair, guide.choice[q])
                if key not in used:
                    used.add(key)
                    draw_tubes(ax, [leg.variants[guide.choice[q]]], every=3)
        X = log.states
        ax.plot(X[:, 0], X[:, 1], color="k", linewidth=0.7)
        C = X[log.comm]
        ax.plot(C[:, 0], C[:, 1], linestyle="none", marker="*", markersize=4, color="red",
                label=f"communication ({log.comm_count})")
        ax.plot(X[0, 0], X[0, 1], marker="o", color="k", markersize=4)
        ax.legend(loc="lower right", frameon=False)
        if title:
            ax.set_title(title)
        _save(fig, path)


def plot_intervals(path, log) -> None:
    """Inter-communication intervals over time."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(6.0, 2.2))
        ks = np.flatnonzero(log.comm)
        ax.step(ks, log.ell_star[ks], where="post", color="k", linewidth=0.8)
        ax.set_xlabel("$k$")
        ax.set_ylabel(r"$\ell^*_k$")
        ax.set_xlim(0, log.steps)
        _save(fig, path)


def ensure_dir(path) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p
