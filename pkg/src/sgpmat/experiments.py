"""Experiment drivers: cloaking, tomography and a generic custom run."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from matplotlib.path import Path as PolyPath

from . import io, plotting
from .config import RunConfig, parse_tensor, save_effective
from .fem import HelmholtzFEM, ScatterSetup
from .graph import (DesignState, MaterialGraph, MaterialNode, PolynomialEdge, RotationalEdge, build_graph,
                    cyclic_linear_graph, grayness_total, rotational_graph)
from .hyper import AsymptotePair
from .mesh import REGION_NAMES, Mesh, generate_structured_mesh, load_triangle_mesh
from .objectives import (ExtinctionObjective, QuadraticObjective, TrackingObjective, Wave, add_noise,
                         forward_fields, load_reference_fields, save_reference_fields)
from .regularization import build_filter_matrix
from .sgp import (Problem, RunResult, SgpConfig, continuation_run, load_checkpoint, write_log)
from .tensor import sym_norm2

log = logging.getLogger(__name__)


@dataclass
class Artifacts:
    out_dir: Path
    files: list = field(default_factory=list)
    metrics: dict = field(default_factory=dict)
    result: RunResult | None = None
    runs: dict = field(default_factory=dict)  # secondary runs (sweeps) by label


# ----------------------------------------------------------------- builders

def build_mesh(cfg: RunConfig) -> Mesh | None:
    m, g = cfg.mesh, cfg.geometry
    if m.kind == "none":
        return None
    if m.kind == "triangle":
        region_map = {int(k): (REGION_NAMES[v] if isinstance(v, str) else int(v)) for k, v in m.region_map.items()}
        return load_triangle_mesh(cfg.resolve(m.node), cfg.resolve(m.ele), region_map, g.observation_radius)
    return generate_structured_mesh(box=g.box, pml=g.pml, design_radius=g.design_radius,
                                    particle_radius=g.particle_radius, observation_radius=g.observation_radius,
                                    h=m.h, h_pml=m.h_pml)


def build_setup(cfg: RunConfig, mesh: Mesh) -> ScatterSetup:
    ph = cfg.physics
    return ScatterSetup(mesh, parse_tensor(ph.background), parse_tensor(ph.particle), ph.sigma0, ph.d_pml)


def build_waves(cfg: RunConfig):
    ph = cfg.physics
    return [Wave.from_wavelength(lam, np.deg2rad(a)) for lam in ph.wavelengths for a in ph.directions_deg]


def build_material_graph(cfg: RunConfig, orientations="config") -> MaterialGraph:
    gr = cfg.graph
    if gr.kind == "rotational":
        n = gr.orientations if orientations == "config" else orientations
        return rotational_graph(parse_tensor(gr.reference), n)
    if gr.kind == "cyclic_linear":
        return cyclic_linear_graph([parse_tensor(t) for t in gr.nodes])
    nodes = [MaterialNode(str(n["id"]), parse_tensor(n["tensor"])) for n in gr.nodes]
    lookup = {n.id: n.tensor for n in nodes}
    edges = []
    for e in gr.edges:
        kind = e.get("kind", "polynomial")
        if kind == "polynomial":
            coefs = tuple(parse_tensor(c) for c in e.get("coefficients", []))
            edges.append(PolynomialEdge(e["start"], e["end"], lookup[e["start"]], lookup[e["end"]], coefs))
        elif kind == "rotational":
            edges.append(RotationalEdge(e["start"], e["end"], parse_tensor(e["reference"]),
                                        float(e.get("offset", 0.0)), float(e.get("span", np.pi))))
        else:
            raise ValueError(f"unknown edge kind {kind!r}")
    return build_graph(nodes, edges)


def build_asymptotes(cfg: RunConfig, graph: MaterialGraph) -> AsymptotePair:
    a = cfg.asymptotes
    auto = AsymptotePair.from_graph(graph, pad=a.pad)
    return AsymptotePair(auto.l_real if a.l_real is None else a.l_real,
                         auto.u_real if a.u_real is None else a.u_real,
                         auto.l_imag if a.l_imag is None else a.l_imag,
                         auto.u_imag if a.u_imag is None else a.u_imag,
                         auto.imag_active)


def sgp_config(cfg: RunConfig, out_dir: Path | None = None) -> SgpConfig:
    s = cfg.sgp
    ckpt = str(out_dir / "checkpoint.npz") if (out_dir is not None and s.checkpoint_every) else None
    return SgpConfig(delta=s.delta, theta=s.theta, tau_init=s.tau_init, gammas=tuple(s.gammas),
                     eps_stop=s.eps_stop, max_outer=s.max_outer, max_inner=s.max_inner,
                     checkpoint_every=s.checkpoint_every, checkpoint_path=ckpt)


def initial_state(cfg: RunConfig, graph: MaterialGraph, k: int) -> DesignState:
    return DesignState.uniform(graph, k, cfg.initial.edge, cfg.initial.alpha)


def node_state(graph: MaterialGraph, node_ids) -> DesignState:
    """Design sitting exactly on the given nodes."""
    loc = dict(zip([n.id for n in graph.nodes], graph.node_locations()))
    edge = np.array([loc[i][0] for i in node_ids], dtype=int)
    alpha = np.array([loc[i][1] for i in node_ids])
    return DesignState.from_coordinates(graph, edge, alpha)


def material_index(graph: MaterialGraph, state: DesignState) -> np.ndarray:
    """Index of the nearest graph node per element (exact on discrete designs)."""
    nodes = graph.node_array()
    d = sym_norm2(state.tensors[:, None, :] - nodes[None, :, :])
    return np.argmin(d, axis=1)


def on_node(state: DesignState, tol=1e-12) -> np.ndarray:
    return (state.alpha <= tol) | (state.alpha >= 1 - tol)


# ------------------------------------------------------------------ phantom

def _star_polygon(center, radius, inner, points, rotation=np.pi / 2):
    ang = rotation + np.arange(2 * points) * np.pi / points
    rad = np.where(np.arange(2 * points) % 2 == 0, radius, inner)
    return np.c_[center[0] + rad * np.cos(ang), center[1] + rad * np.sin(ang)]


def phantom_nodes(graph: MaterialGraph, centroids, phantom, background=None):
    """Node id per element from a list of shapes; later shapes overwrite earlier ones."""
    ids = np.array([background or graph.nodes[0].id] * len(centroids), dtype=object)
    known = {n.id for n in graph.nodes}
    for item in phantom:
        if item["node"] not in known:
            raise ValueError(f"phantom refers to unknown node {item['node']!r}")
        c = np.asarray(item.get("center", [0.0, 0.0]), dtype=float)
        if item["shape"] == "disk":
            inside = np.linalg.norm(centroids - c, axis=1) <= item["radius"]
        elif item["shape"] == "box":
            half = np.asarray(item["half_widths"], dtype=float)
            inside = np.all(np.abs(centroids - c) <= half, axis=1)
        else:
            poly = _star_polygon(c, item["radius"], item.get("inner_radius", 0.5 * item["radius"]),
                                 int(item.get("points", 5)))
            inside = PolyPath(poly).contains_points(centroids)
        ids[inside] = item["node"]
    return ids.tolist()


def interface_edge_count(mesh: Mesh, labels) -> int:
    """Interior edges between design triangles carrying different labels."""
    k = mesh.n_design
    tri = mesh.triangles[:k]
    e = np.sort(np.concatenate([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]]), axis=1)
    owner = np.tile(np.arange(k), 3)
    order = np.lexsort((e[:, 1], e[:, 0]))
    e, owner = e[order], owner[order]
    same = np.all(e[1:] == e[:-1], axis=1)
    a, b = owner[:-1][same], owner[1:][same]
    labels = np.asarray(labels)
    return int(np.sum(labels[a] != labels[b]))


# ------------------------------------------------------------------ helpers

def _prepare_out(cfg: RunConfig, out_dir) -> Path:
    out = Path(out_dir if out_dir is not None else cfg.output.directory)
    out.mkdir(parents=True, exist_ok=True)
    save_effective(cfg, out / "effective_config.json")
    return out


def _run(problem: Problem, state: DesignState, cfg: RunConfig, out: Path) -> RunResult:
    scfg = sgp_config(cfg, out)
    resume = None
    if cfg.sgp.resume_from:
        state, resume = load_checkpoint(cfg.resolve(cfg.sgp.resume_from), problem.graph)
    return continuation_run(problem, state, scfg, resume)


def _write_common(art: Artifacts, cfg: RunConfig, mesh, fem, state, res, graph, field_u=None, tag=""):
    out = art.out_dir
    log_path = out / f"history{tag}.csv"
    write_log(log_path, res.records, append=bool(cfg.sgp.resume_from))
    art.files.append(log_path)
    design_path = out / f"design{tag}.csv"
    io.write_design_csv(design_path, state, mesh.centroids[: len(state)] if mesh is not None else None)
    art.files.append(design_path)
    if cfg.output.figures and res.records:
        p = out / f"history{tag}.png"
        plotting.plot_history(res.records, p)
        art.files.append(p)
    if mesh is None:
        return
    mat = material_index(graph, state)
    if cfg.output.vtk:
        pd = io.field_point_data(field_u) if field_u is not None else None
        p = out / f"result{tag}.vtk"
        io.write_vtk(p, mesh, pd, io.design_cell_data(mesh, state, mat))
        art.files.append(p)
    if field_u is not None:
        p = out / f"field{tag}.csv"
        io.write_field_csv(p, mesh, field_u)
        art.files.append(p)
    if cfg.output.figures:
        p = out / f"design{tag}.png"
        if cfg.graph.kind == "rotational":
            ang = np.degrees(np.arctan2(2 * state.tensors[:, 2].real,
                                        (state.tensors[:, 0] - state.tensors[:, 1]).real) / 2) % 180
            plotting.plot_design(mesh, ang, p, label="principal axis angle [deg]", cmap="twilight")
        else:
            plotting.plot_design(mesh, mat, p, label="material index", discrete=True)
        art.files.append(p)
        if field_u is not None:
            p = out / f"field{tag}.png"
            plotting.plot_field(mesh, field_u, p, extent=cfg.geometry.box / 2)
            art.files.append(p)


# ----------------------------------------------------------------- cloaking

def cloaking_problem(cfg: RunConfig, fem: HelmholtzFEM, graph: MaterialGraph, filt, orientations="config"):
    """Finite orientation sets are optimized as discrete designs."""
    obj = ExtinctionObjective(fem, build_waves(cfg), cfg.physics.amplitude)
    n = cfg.graph.orientations if orientations == "config" else orientations
    discrete = cfg.sgp.discrete or (cfg.graph.kind == "rotational" and n is not None)
    return Problem(graph, obj, build_asymptotes(cfg, graph), filt, cfg.regularization.eta, discrete=discrete)


def run_cloaking(cfg: RunConfig, out_dir=None, sweep=None) -> Artifacts:
    t0 = time.perf_counter()
    out = _prepare_out(cfg, out_dir)
    art = Artifacts(out)
    mesh = build_mesh(cfg)
    fem = HelmholtzFEM(build_setup(cfg, mesh))
    filt = build_filter_matrix(mesh, cfg.regularization.r0) if cfg.regularization.eta else None
    graph = build_material_graph(cfg)
    problem = cloaking_problem(cfg, fem, graph, filt)
    state0 = initial_state(cfg, graph, fem.K)
    res = _run(problem, state0, cfg, out)
    initial = res.records[0].J_phys if res.records else problem.evaluate(state0).j_phys
    final_eval = problem.objective(res.state.tensors, gradient=False)
    rel = final_eval.value / initial if initial else float("nan")
    art.result = res
    art.metrics.update(n_triangles=mesh.n_triangles, n_design=fem.K, initial_extinction=initial,
                       final_extinction=final_eval.value, relative_cloaking=rel,
                       iterations=len(res.records) - 1, converged=res.converged)
    _write_common(art, cfg, mesh, fem, res.state, res, graph, final_eval.fields[0])
    art.metrics["main_wall_time"] = time.perf_counter() - t0
    sweep = list(cfg.sweep.orientations) if sweep is None else list(sweep)
    if sweep:
        rows = []
        for entry in sweep:
            n = None if entry in (None, "continuous") else int(entry)
            label = "continuous" if n is None else n
            if n == cfg.graph.orientations and not cfg.sgp.resume_from:
                r, val = res, final_eval.value  # same problem as the main run
            else:
                g = build_material_graph(cfg, n)
                p = cloaking_problem(cfg, fem, g, filt, n)
                r = continuation_run(p, initial_state(cfg, g, fem.K), sgp_config(cfg))
                val = p.objective(r.state.tensors, gradient=False).value
            art.runs[label] = r
            rows.append([label, val, val / initial, len(r.records) - 1])
            log.info("sweep %s: relative cloaking %.4f", label, val / initial)
        p = out / "sweep.csv"
        io.write_table(p, ["orientations", "extinction", "relative_cloaking", "iterations"], rows)
        art.files.append(p)
        art.metrics["sweep"] = {str(r[0]): r[2] for r in rows}
        if cfg.output.figures:
            p = out / "sweep.png"
            plotting.plot_sweep([r[0] for r in rows], [r[2] for r in rows], p)
            art.files.append(p)
    art.metrics["wall_time"] = time.perf_counter() - t0
    io.write_summary(out / "summary.json", art.metrics)
    art.files.append(out / "summary.json")
    return art


# --------------------------------------------------------------- tomography

def reference_data(cfg: RunConfig, fem: HelmholtzFEM, graph: MaterialGraph, waves):
    """Phantom design and (noisy) reference fields, or fields from a cache file."""
    k = fem.K
    ids = phantom_nodes(graph, fem.mesh.centroids[:k], cfg.tomography.phantom)
    phantom = node_state(graph, ids)
    if cfg.objective.reference_file:
        return phantom, ids, load_reference_fields(cfg.resolve(cfg.objective.reference_file), waves)
    clean = forward_fields(fem, phantom.tensors, waves, cfg.physics.amplitude)
    rng = np.random.default_rng(cfg.seed)
    return phantom, ids, add_noise(clean, cfg.tomography.noise_scale, rng)


def tomography_problem(cfg, fem, graph, filt, waves, reference, eta):
    obj = TrackingObjective(fem, waves, reference, cfg.physics.amplitude)
    return Problem(graph, obj, build_asymptotes(cfg, graph), filt, eta, discrete=cfg.sgp.discrete)


def recovery_fraction(graph, state, phantom_ids) -> float:
    ids = np.array([n.id for n in graph.nodes])[material_index(graph, state)]
    ok = on_node(state) & (ids == np.array(phantom_ids, dtype=object))
    return float(np.mean(ok))


def run_tomography(cfg: RunConfig, out_dir=None) -> Artifacts:
    t0 = time.perf_counter()
    out = _prepare_out(cfg, out_dir)
    art = Artifacts(out)
    mesh = build_mesh(cfg)
    fem = HelmholtzFEM(build_setup(cfg, mesh))
    graph = build_material_graph(cfg)
    waves = build_waves(cfg)
    phantom, ids, reference = reference_data(cfg, fem, graph, waves)
    ref_path = out / "reference_fields.npz"
    save_reference_fields(ref_path, waves, reference)
    art.files.append(ref_path)
    filt = build_filter_matrix(mesh, cfg.regularization.r0)

    def reconstruct(eta, tag):
        problem = tomography_problem(cfg, fem, graph, filt, waves, reference, eta)
        res = _run(problem, initial_state(cfg, graph, fem.K), cfg, out)
        final = problem.objective(res.state.tensors, gradient=False)
        j0 = res.records[0].J_phys if res.records else final.value
        metrics = {"initial_misfit": j0, "final_misfit": final.value,
                   "relative_misfit": final.value / j0 if j0 else float("nan"),
                   "grayness": grayness_total(res.state),
                   "recovered_fraction": recovery_fraction(graph, res.state, ids),
                   "interface_edges": interface_edge_count(mesh, material_index(graph, res.state)),
                   "iterations": len(res.records) - 1, "stages": len({r.stage for r in res.records})}
        _write_common(art, cfg, mesh, fem, res.state, res, graph, final.fields[0], tag)
        return res, metrics

    res, metrics = reconstruct(cfg.regularization.eta, "")
    art.result = res
    art.metrics.update(metrics, n_triangles=mesh.n_triangles, n_design=fem.K, n_waves=len(waves),
                       phantom_interface_edges=interface_edge_count(mesh, material_index(graph, phantom)))
    if cfg.output.figures:
        p = out / "phantom.png"
        plotting.plot_design(mesh, material_index(graph, phantom), p, label="material index", discrete=True)
        art.files.append(p)
        obs = np.unique(mesh.observation_edges)
        ang = np.arctan2(mesh.vertices[obs, 1], mesh.vertices[obs, 0])
        p = out / "observation_trace.png"
        plotting.plot_boundary_trace(ang, res_fields_first(cfg, fem, res.state, waves)[obs], reference[0][obs], p)
        art.files.append(p)
    if cfg.tomography.eta_sweep:
        rows = []
        for eta in cfg.tomography.eta_sweep:
            _, m = reconstruct(float(eta), f"_eta{eta:g}")
            rows.append([float(eta), m["relative_misfit"], m["recovered_fraction"], m["interface_edges"]])
        p = out / "eta_sweep.csv"
        io.write_table(p, ["eta", "relative_misfit", "recovered_fraction", "interface_edges"], rows)
        art.files.append(p)
        art.metrics["eta_sweep"] = rows
    art.metrics["wall_time"] = time.perf_counter() - t0
    io.write_summary(out / "summary.json", art.metrics)
    art.files.append(out / "summary.json")
    return art


def res_fields_first(cfg, fem, state, waves):
    return forward_fields(fem, state.tensors, waves[:1], cfg.physics.amplitude)[0]


# ------------------------------------------------------------------- custom

def run_custom(cfg: RunConfig, out_dir=None) -> Artifacts:
    t0 = time.perf_counter()
    out = _prepare_out(cfg, out_dir)
    art = Artifacts(out)
    graph = build_material_graph(cfg)
    mesh = build_mesh(cfg)
    fem = None
    filt = None
    kind = cfg.objective.kind
    field_u = None
    if mesh is None:
        k = cfg.mesh.n_elements
    else:
        fem = HelmholtzFEM(build_setup(cfg, mesh))
        k = fem.K
        if cfg.regularization.eta:
            filt = build_filter_matrix(mesh, cfg.regularization.r0)
    if kind == "quadratic":
        target = np.tile(parse_tensor(cfg.objective.target if cfg.objective.target is not None else 1.0).array,
                         (k, 1))
        if cfg.objective.target_noise:
            rng = np.random.default_rng(cfg.seed)
            target = target + cfg.objective.target_noise * rng.standard_normal(target.shape)
        obj = QuadraticObjective(target)
    elif kind == "extinction":
        obj = ExtinctionObjective(fem, build_waves(cfg), cfg.physics.amplitude)
    else:
        waves = build_waves(cfg)
        _, _, reference = reference_data(cfg, fem, graph, waves)
        obj = TrackingObjective(fem, waves, reference, cfg.physics.amplitude)
    problem = Problem(graph, obj, build_asymptotes(cfg, graph), filt, cfg.regularization.eta,
                      discrete=cfg.sgp.discrete)
    res = _run(problem, initial_state(cfg, graph, k), cfg, out)
    final = obj(res.state.tensors, gradient=False)
    if fem is not None and final.fields:
        field_u = final.fields[0]
    art.result = res
    art.metrics.update(n_design=k, initial_objective=res.records[0].J_phys if res.records else final.value,
                       final_objective=final.value, grayness=grayness_total(res.state),
                       iterations=len(res.records) - 1, converged=res.converged)
    _write_common(art, cfg, mesh, fem, res.state, res, graph, field_u)
    art.metrics["wall_time"] = time.perf_counter() - t0
    io.write_summary(out / "summary.json", art.metrics)
    art.files.append(out / "summary.json")
    return art


RUNNERS = {"cloaking": run_cloaking, "tomography": run_tomography, "custom": run_custom}
