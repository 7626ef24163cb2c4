"""Report figures (written to files, non-interactive Agg backend)."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.tri import Triangulation  # noqa: E402


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_history(records, path, normalize=True):
    """Objective contributions per iteration; stage boundaries as vertical lines."""
    it = np.arange(len(records))
    cols = {"total": [r.J_total for r in records], "physical": [r.J_phys for r in records],
            "filter": [r.eta_J_reg for r in records], "grayness": [r.gamma_J_gray for r in records]}
    ref = abs(cols["total"][0]) or 1.0
    fig, ax = plt.subplots(figsize=(6, 4))
    for name, vals in cols.items():
        v = np.asarray(vals) / (ref if normalize else 1.0)
        if np.any(v > 0):
            ax.semilogy(it, np.where(v > 0, v, np.nan), label=name)
    stages = [i for i in range(1, len(records)) if records[i].stage != records[i - 1].stage]
    for s in stages:
        ax.axvline(s, color="0.7", lw=0.8)
    ax.set_xlabel("iteration")
    ax.set_ylabel("objective / initial total" if normalize else "objective")
    ax.legend()
    _save(fig, path)


def _design_triangulation(mesh):
    k = mesh.n_design
    return Triangulation(mesh.vertices[:, 0], mesh.vertices[:, 1], mesh.triangles[:k])


def plot_design(mesh, values, path, label="", cmap="viridis", discrete=False):
    """Per design element scalar (orientation angle, material index, ...)."""
    tri = _design_triangulation(mesh)
    fig, ax = plt.subplots(figsize=(5, 4.5))
    values = np.asarray(values, dtype=float)
    if discrete:
        n = int(values.max()) + 1 if values.size else 1
        pc = ax.tripcolor(tri, facecolors=values, cmap=plt.get_cmap("tab10", max(n, 2)),
                          vmin=-0.5, vmax=max(n, 2) - 0.5, edgecolors="none")
    else:
        pc = ax.tripcolor(tri, facecolors=values, cmap=cmap, edgecolors="none")
    fig.colorbar(pc, ax=ax, label=label)
    ax.set_aspect("equal")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    _save(fig, path)


def plot_field(mesh, u, path, part="real", extent=None):
    tri = Triangulation(mesh.vertices[:, 0], mesh.vertices[:, 1], mesh.triangles)
    u = np.asarray(u)
    val = {"real": u.real, "imag": u.imag, "abs": np.abs(u)}[part]
    fig, ax = plt.subplots(figsize=(5, 4.5))
    pc = ax.tripcolor(tri, val, shading="gouraud", cmap="RdBu_r" if part != "abs" else "magma")
    fig.colorbar(pc, ax=ax, label=f"{part} u")
    if extent is not None:
        ax.set_xlim(-extent, extent)
        ax.set_ylim(-extent, extent)
    ax.set_aspect("equal")
    _save(fig, path)


def plot_sweep(labels, values, path, ylabel="relative cloaking"):
    fig, ax = plt.subplots(figsize=(5, 3.5))
    x = np.arange(len(labels))
    ax.plot(x, values, "o-")
    ax.set_xticks(x, [str(s) for s in labels])
    ax.set_xlabel("orientations")
    ax.set_ylabel(ylabel)
    ax.grid(alpha=0.3)
    _save(fig, path)


def plot_boundary_trace(angles, computed, reference, path):
    """Real part of computed and reference fields along the observation curve."""
    order = np.argsort(angles)
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.plot(angles[order], np.real(reference)[order], ".", ms=3, label="reference")
    ax.plot(angles[order], np.real(computed)[order], "-", label="computed")
    ax.set_xlabel("angle")
    ax.set_ylabel("Re u")
    ax.legend()
    _save(fig, path)
