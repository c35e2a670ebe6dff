"""Matplotlib figures for the CLI reports (PNG, written next to the data files)."""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.collections import LineCollection, PolyCollection  # noqa: E402

# no timestamps or version strings, so repeated runs give identical files
_PNG_META = {"Software": None}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata=_PNG_META)
    plt.close(fig)
    return path


def plot_graph(g, path, radius=4.0):
    """Primal edges, dual edges and rhombi of a window around the origin."""
    fig, ax = plt.subplots(figsize=(5, 5))
    prim, dual = [], []
    for v in g.instances_within(0j, radius, "primal"):
        p = g.position(v)
        for nb, _ in g.graph_neighbors(v):
            prim.append([(p.real, p.imag), (g.position(nb).real, g.position(nb).imag)])
        for nb, _, _ in g.neighbors(v):
            q = g.position(nb)
            dual.append([(p.real, p.imag), (q.real, q.imag)])
    ax.add_collection(LineCollection(dual, colors="0.75", linewidths=0.6, linestyles="dotted"))
    ax.add_collection(LineCollection(prim, colors="k", linewidths=1.0))
    pts = [g.position(v) for v in g.instances_within(0j, radius, "primal")]
    if g.bipartite:
        cols = ["k" if g.colors[v[0]] == "B" else "w" for v in g.instances_within(0j, radius, "primal")]
    else:
        cols = "k"
    ax.scatter([p.real for p in pts], [p.imag for p in pts], c=cols, edgecolors="k", s=18, zorder=3)
    ax.set_aspect("equal")
    ax.set_xlim(-radius, radius)
    ax.set_ylim(-radius, radius)
    ax.set_title(f"{g.n_vertices} vertices, {g.n_edges} edges per cell")
    return _save(fig, path)


def plot_kernel(rows, path, title="kernel"):
    """``|K|`` against distance on log-log axes; ``rows`` holds ``(distance, value)``."""
    d = np.array([r[0] for r in rows if r[0] > 0])
    v = np.array([abs(r[1]) for r in rows if r[0] > 0])
    fig, ax = plt.subplots(figsize=(5, 3.6))
    if len(d):
        ax.loglog(d, v, "k.", ms=3)
        ref = np.linspace(d.min(), d.max(), 50)
        ax.loglog(ref, 1 / (2 * math.pi * ref), "r-", lw=0.8, label=r"$1/(2\pi N)$")
        ax.legend(frameon=False)
    ax.set_xlabel("distance")
    ax.set_ylabel("|value|")
    ax.set_title(title)
    return _save(fig, path)


def plot_green(rows, path):
    """Green's function against ``log`` distance with the reference slope ``-1/2pi``."""
    d = np.array([r[0] for r in rows if r[0] > 0])
    v = np.array([r[1].real for r in rows if r[0] > 0])
    fig, ax = plt.subplots(figsize=(5, 3.6))
    if len(d):
        ax.plot(np.log(d), v, "k.", ms=3)
        x = np.linspace(np.log(d).min(), np.log(d).max(), 20)
        ax.plot(x, -x / (2 * math.pi) + np.median(v + np.log(d) / (2 * math.pi)), "r-", lw=0.8)
    ax.set_xlabel("log distance")
    ax.set_ylabel("G")
    return _save(fig, path)


def plot_thermo(report, path):
    """Bar chart of the report quantities and of the identity residuals."""
    fig, (a1, a2) = plt.subplots(1, 2, figsize=(7, 3.2))
    names = ["log_det1", "mean_energy", "entropy"]
    a1.bar(names, [getattr(report, n) for n in names], color="0.4")
    a1.set_title(f"{report.model} model, per vertex")
    a1.tick_params(axis="x", labelrotation=20)
    res = [max(abs(r), 1e-18) for r in report.identity_residuals]
    a2.bar([f"r{i + 1}" for i in range(len(res))], res, color="0.6")
    a2.set_yscale("log")
    a2.set_title("identity residuals")
    return _save(fig, path)


def plot_bloch(grid_values, path):
    """``log |det|`` of the Bloch matrix over the torus of phases."""
    fig, ax = plt.subplots(figsize=(4.4, 3.8))
    im = ax.imshow(grid_values, origin="lower", extent=(0, 1, 0, 1), cmap="viridis")
    fig.colorbar(im, ax=ax)
    ax.set_xlabel("s")
    ax.set_ylabel("t")
    return _save(fig, path)


def plot_history(values, path):
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.plot(np.arange(len(values)), values, "k.-", ms=4)
    ax.set_xlabel("iteration")
    ax.set_ylabel("objective")
    return _save(fig, path)


def plot_edges(segments, values, path, title="edge probabilities"):
    """Colored edge segments ``[(p, q), ...]`` with one value each."""
    fig, ax = plt.subplots(figsize=(5, 4.4))
    lines = [[(p.real, p.imag), (q.real, q.imag)] for p, q in segments]
    lc = LineCollection(lines, array=np.asarray(values, dtype=float), cmap="magma", linewidths=3)
    ax.add_collection(lc)
    ax.autoscale()
    ax.set_aspect("equal")
    fig.colorbar(lc, ax=ax)
    ax.set_title(title)
    return _save(fig, path)


def plot_values(points, values, path, title="|F|"):
    fig, ax = plt.subplots(figsize=(5, 4.4))
    pts = np.array([[p.real, p.imag] for p in points]) if points else np.zeros((0, 2))
    sc = ax.scatter(pts[:, 0], pts[:, 1], c=np.abs(values), cmap="viridis", s=20)
    fig.colorbar(sc, ax=ax)
    ax.set_aspect("equal")
    ax.set_title(title)
    return _save(fig, path)


def plot_embedding(p, path):
    """Black faces filled, white faces outlined, singular face in red."""
    fig, ax = plt.subplots(figsize=(6, 6))
    blacks = []
    for k in p.sheets:
        for _, poly in sorted(p.sheet_polygons(k).items()):
            blacks.append([(z.real, z.imag) for z in poly])
    whites, sing = [], []
    for k in p.sheets:
        s = k * p.holonomy
        for w, poly in sorted(p.white_polygons.items()):
            (sing if w == p.singular else whites).append([((z + s).real, (z + s).imag) for z in poly])
    ax.add_collection(PolyCollection(blacks, facecolors="0.15", edgecolors="0.15", linewidths=0.3))
    ax.add_collection(PolyCollection(whites, facecolors="none", edgecolors="0.55", linewidths=0.3))
    if sing:
        ax.add_collection(PolyCollection(sing, facecolors=(1, 0.2, 0.2, 0.4), edgecolors="r", linewidths=0.8))
    ax.autoscale()
    ax.set_aspect("equal")
    ax.set_title(f"epsilon = {p.epsilon:g}")
    return _save(fig, path)
