"""File output: legacy ASCII VTK, CSV tables and a JSON summary."""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np


def write_vtk(path, mesh, point_data=None, cell_data=None, title="sgpmat"):
    """Unstructured triangle grid with scalar point and cell arrays."""
    point_data = point_data or {}
    cell_data = cell_data or {}
    v = mesh.vertices
    t = mesh.triangles
    lines = ["# vtk DataFile Version 3.0", title, "ASCII", "DATASET UNSTRUCTURED_GRID",
             f"POINTS {len(v)} double"]
    lines += [f"{x:.12g} {y:.12g} 0" for x, y in v]
    lines.append(f"CELLS {len(t)} {4 * len(t)}")
    lines += [f"3 {a} {b} {c}" for a, b, c in t]
    lines.append(f"CELL_TYPES {len(t)}")
    lines += ["5"] * len(t)

    def block(kind, n, data):
        if not data:
            return []
        out = [f"{kind} {n}"]
        for name, arr in data.items():
            arr = np.asarray(arr, dtype=float)
            if arr.shape != (n,):
                raise ValueError(f"{kind} array {name!r} has shape {arr.shape}, expected ({n},)")
            out += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
            out += [f"{x:.12g}" for x in arr]
        return out

    lines += block("POINT_DATA", len(v), point_data)
    lines += block("CELL_DATA", len(t), cell_data)
    Path(path).write_text("\n".join(lines) + "\n")


def field_point_data(u, prefix="u"):
    u = np.asarray(u)
    return {f"re_{prefix}": u.real, f"im_{prefix}": u.imag, f"abs_{prefix}": np.abs(u)}


def design_cell_data(mesh, state, node_index=None):
    """Per-triangle design data; non-design triangles get -1 / NaN-free zeros."""
    n = mesh.n_triangles
    k = len(state)
    edge = np.full(n, -1.0)
    alpha = np.zeros(n)
    re11 = np.zeros(n)
    im11 = np.zeros(n)
    edge[:k] = state.edge
    alpha[:k] = state.alpha
    re11[:k] = state.tensors[:, 0].real
    im11[:k] = state.tensors[:, 0].imag
    out = {"region": mesh.region.astype(float), "edge": edge, "alpha": alpha,
           "re_b11": re11, "im_b11": im11}
    if node_index is not None:
        idx = np.full(n, -1.0)
        idx[:k] = node_index
        out["material"] = idx
    return out


def write_field_csv(path, mesh, u):
    u = np.asarray(u)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y", "re_u", "im_u", "abs_u"])
        for (x, y), z in zip(mesh.vertices, u):
            w.writerow([repr(float(x)), repr(float(y)), repr(float(z.real)), repr(float(z.imag)),
                        repr(float(abs(z)))])


def write_design_csv(path, state, centroids=None):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        head = ["element", "edge", "alpha", "re_b11", "im_b11", "re_b22", "im_b22", "re_b12", "im_b12"]
        if centroids is not None:
            head[1:1] = ["cx", "cy"]
        w.writerow(head)
        for i in range(len(state)):
            t = state.tensors[i]
            row = [i, int(state.edge[i]), repr(float(state.alpha[i]))]
            row += [repr(float(x)) for z in t for x in (z.real, z.imag)]
            if centroids is not None:
                row[1:1] = [repr(float(centroids[i, 0])), repr(float(centroids[i, 1]))]
            w.writerow(row)


def write_table(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([repr(x) if isinstance(x, float) else x for x in r])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, Path):
        return str(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def write_summary(path, summary: dict):
    Path(path).write_text(json.dumps(_jsonable(summary), indent=2, sort_keys=True) + "\n")
