"""Triangular meshes for the scattering domain.

The domain is a square background box surrounded by a square PML frame.
Inside the box sit a circular design region, optionally a circular particle
in its centre and a circular observation curve.  ``generate_structured_mesh``
places points on concentric rings so every circle is resolved by element
edges; Triangle ``.node``/``.ele`` files can be loaded as an alternative.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import Delaunay

log = logging.getLogger(__name__)

DESIGN, PARTICLE, BACKGROUND, PML = 0, 1, 2, 3
REGION_NAMES = {"design": DESIGN, "particle": PARTICLE, "background": BACKGROUND, "pml": PML}


class MeshError(ValueError):
    pass


@dataclass
class Mesh:
    vertices: np.ndarray
    triangles: np.ndarray
    region: np.ndarray
    dirichlet: np.ndarray
    observation_edges: np.ndarray = field(default_factory=lambda: np.zeros((0, 2), dtype=int))
    perm: np.ndarray | None = None

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float)
        self.triangles = np.asarray(self.triangles, dtype=int)
        self.region = np.asarray(self.region, dtype=int)
        # design triangles first, keep the original order otherwise
        order = np.argsort(self.region != DESIGN, kind="stable")
        self.triangles = self.triangles[order]
        self.region = self.region[order]
        self.perm = order if self.perm is None else np.asarray(self.perm)[order]
        self.dirichlet = np.asarray(self.dirichlet, dtype=bool)
        self.observation_edges = np.asarray(self.observation_edges, dtype=int).reshape(-1, 2)
        self.validate()

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def n_design(self) -> int:
        return int(np.sum(self.region == DESIGN))

    @property
    def areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    @property
    def centroids(self) -> np.ndarray:
        return self.vertices[self.triangles].mean(axis=1)

    def edges(self) -> np.ndarray:
        """Unique undirected edges, sorted vertex pairs."""
        t = self.triangles
        e = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        return np.unique(np.sort(e, axis=1), axis=0)

    def validate(self):
        if self.triangles.size and (self.triangles.min() < 0 or self.triangles.max() >= self.n_vertices):
            raise MeshError("triangle references a missing vertex")
        if np.any(self.areas <= 0):
            raise MeshError(f"{np.sum(self.areas <= 0)} triangles have non-positive area")
        _, counts = np.unique(np.round(self.vertices, 12), axis=0, return_counts=True)
        if np.any(counts > 1):
            raise MeshError("duplicate vertices")
        if len(self.observation_edges):
            known = {tuple(e) for e in self.edges()}
            for e in np.sort(self.observation_edges, axis=1):
                if tuple(e) not in known:
                    raise MeshError("observation curve is not resolved by mesh edges")


def boundary_vertices(triangles: np.ndarray, n_vertices: int) -> np.ndarray:
    """Vertices on edges that belong to exactly one triangle."""
    e = np.concatenate([triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]])
    e = np.sort(e, axis=1)
    uniq, counts = np.unique(e, axis=0, return_counts=True)
    mask = np.zeros(n_vertices, dtype=bool)
    mask[uniq[counts == 1].ravel()] = True
    return mask


def _ring(radius, spacing, stagger):
    m = max(6, int(np.ceil(2 * np.pi * radius / spacing)))
    phi = 2 * np.pi * (np.arange(m) + 0.5 * stagger) / m
    return np.column_stack([radius * np.cos(phi), radius * np.sin(phi)])


def _grid(lo, hi, spacing):
    n = max(1, int(np.ceil((hi - lo) / spacing - 1e-9)))
    return np.linspace(lo, hi, n + 1)


def generate_structured_mesh(box=2.0, pml=1.0, design_radius=0.4, particle_radius=0.2,
                             observation_radius=None, h=0.05, h_pml=None) -> Mesh:
    """Mesh the square ``[-box/2 - pml, box/2 + pml]^2``.

    Concentric rings of points (spacing ``h``) fill the disk up to just
    outside the largest circle, the rest of the box is a square grid with
    spacing ``h`` and the PML frame a grid with spacing ``h_pml``
    (defaults to ``h``).  All points are Delaunay-triangulated.
    """
    half = 0.5 * box
    outer = half + pml
    h_pml = h if h_pml is None else h_pml
    particle_radius = particle_radius or 0.0
    if h <= 0 or h_pml <= 0 or box <= 0 or pml < 0:
        raise MeshError("sizes must be positive")
    if not 0 < design_radius < half:
        raise MeshError("design disk must fit in the background box")
    if particle_radius >= design_radius:
        raise MeshError("particle must lie strictly inside the design disk")
    circles = [r for r in (particle_radius, design_radius, observation_radius) if r]
    if observation_radius is not None and not design_radius < observation_radius < half:
        raise MeshError("observation circle must lie between design disk and box")
    gaps = np.diff([0.0] + sorted(circles))
    if np.min(gaps) < 0.5 * h:
        raise MeshError(f"h={h} too coarse to resolve the circular regions")

    # radial layers
    layer = h * np.sqrt(3) / 2
    radii = []
    prev = 0.0
    for r in sorted(circles):
        n = max(1, int(np.round((r - prev) / layer)))
        radii.extend(prev + (r - prev) * np.arange(1, n) / n)
        radii.append(r)
        prev = r
    r_out = half - 1.5 * h
    if r_out > prev + layer:
        n = int(np.floor((r_out - prev) / layer))
        radii.extend(prev + layer * np.arange(1, n + 1))
    r_last = radii[-1]
    rings = [_ring(r, h, j % 2) for j, r in enumerate(radii)]
    pts = [np.zeros((1, 2))] + rings

    g = _grid(-half, half, h)
    X, Y = np.meshgrid(g, g)
    inner = np.column_stack([X.ravel(), Y.ravel()])
    inner = inner[np.hypot(inner[:, 0], inner[:, 1]) > r_last + 0.8 * h]
    pts.append(inner)
    if pml > 0:
        gp = np.unique(np.concatenate([_grid(-outer, -half, h_pml), _grid(half, outer, h_pml)]))
        gp = np.unique(np.concatenate([gp, _grid(-half, half, h_pml)]))
        X, Y = np.meshgrid(gp, gp)
        frame = np.column_stack([X.ravel(), Y.ravel()])
        frame = frame[np.max(np.abs(frame), axis=1) > half + 1e-9]
        pts.append(frame)
    pts = np.concatenate(pts)

    tri = Delaunay(pts).simplices
    p = pts[tri]
    area = 0.5 * ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                  - (p[:, 1, 1] - p[:, 0, 1]) * (p[:, 2, 0] - p[:, 0, 0]))
    tri = np.where((area < 0)[:, None], tri[:, [0, 2, 1]], tri)
    tri = tri[np.abs(area) > 1e-14 * h * h]

    cent = pts[tri].mean(axis=1)
    rc = np.hypot(cent[:, 0], cent[:, 1])
    region = np.full(len(tri), BACKGROUND)
    region[np.max(np.abs(cent), axis=1) > half] = PML
    region[rc < design_radius] = DESIGN
    if particle_radius > 0:
        region[rc < particle_radius] = PARTICLE

    # every vertex of a disk triangle must lie in the closed disk (conformity)
    rv = np.hypot(pts[tri][..., 0], pts[tri][..., 1])
    tol = 1e-10
    for reg, lo, hi in ((DESIGN, particle_radius, design_radius), (PARTICLE, 0.0, particle_radius)):
        sel = region == reg
        if np.any(rv[sel] > hi + tol) or np.any(rv[sel] < lo - tol):
            raise MeshError("circular region boundaries are not resolved; reduce h")

    dirichlet = np.max(np.abs(pts), axis=1) > outer - 1e-9
    obs = np.zeros((0, 2), dtype=int)
    if observation_radius is not None:
        k = radii.index(observation_radius)
        offset = 1 + sum(len(r) for r in rings[:k])
        idx = offset + np.arange(len(rings[k]))
        obs = np.column_stack([idx, np.roll(idx, -1)])
    return Mesh(pts, tri, region, dirichlet, obs)


def rectangle_mesh(nx, ny, xlim=(0.0, 1.0), ylim=(0.0, 1.0), region=BACKGROUND) -> Mesh:
    """Criss-cross-free right-triangle mesh of a rectangle with Dirichlet boundary."""
    x = np.linspace(*xlim, nx + 1)
    y = np.linspace(*ylim, ny + 1)
    X, Y = np.meshgrid(x, y)
    pts = np.column_stack([X.ravel(), Y.ravel()])
    idx = np.arange((nx + 1) * (ny + 1)).reshape(ny + 1, nx + 1)
    a = idx[:-1, :-1].ravel()
    b = idx[:-1, 1:].ravel()
    c = idx[1:, 1:].ravel()
    d = idx[1:, :-1].ravel()
    tri = np.concatenate([np.column_stack([a, b, c]), np.column_stack([a, c, d])])
    dirichlet = boundary_vertices(tri, len(pts))
    return Mesh(pts, tri, np.full(len(tri), region), dirichlet)


def observation_edges_on_circle(mesh_vertices, triangles, radius, tol=1e-8):
    """Mesh edges whose two vertices lie on the circle of given radius."""
    r = np.hypot(mesh_vertices[:, 0], mesh_vertices[:, 1])
    on = np.abs(r - radius) < tol * max(1.0, radius)
    e = np.concatenate([triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]])
    e = np.unique(np.sort(e, axis=1), axis=0)
    return e[on[e[:, 0]] & on[e[:, 1]]]


def _data_lines(path):
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if line:
                yield line.split()


def load_triangle_mesh(node_path, ele_path, region_map, observation_radius=None) -> Mesh:
    """Read a Triangle ``.node``/``.ele`` pair.

    ``region_map`` maps the triangle regional attribute (first attribute in
    the ``.ele`` file) to a region name or code.  Index base (0 or 1) is taken
    from the first vertex number.  Dirichlet vertices are those on the outer
    boundary of the triangulation.
    """
    try:
        lines = _data_lines(Path(node_path))
        nv, dim, nattr, nmark = (int(v) for v in next(lines)[:4])
        if dim != 2:
            raise MeshError(f"{node_path}: only 2D meshes supported")
        rows = [next(lines) for _ in range(nv)]
        ids = np.array([int(r[0]) for r in rows])
        verts = np.array([[float(r[1]), float(r[2])] for r in rows])

        lines = _data_lines(Path(ele_path))
        head = next(lines)
        nt, npt = int(head[0]), int(head[1])
        ntattr = int(head[2]) if len(head) > 2 else 0
        if npt != 3:
            raise MeshError("only linear triangles supported")
        rows = [next(lines) for _ in range(nt)]
        tri = np.array([[int(v) for v in r[1:4]] for r in rows])
        attr = [float(r[4]) if ntattr else None for r in rows]
    except (StopIteration, IndexError, ValueError) as exc:
        if isinstance(exc, MeshError):
            raise
        raise MeshError(f"cannot parse Triangle files: {exc}") from exc

    base = ids.min()
    if base not in (0, 1):
        raise MeshError(f"unexpected vertex numbering base {base}")
    order = np.argsort(ids)
    verts = verts[order]
    tri = tri - base

    codes = {}
    for key, val in region_map.items():
        codes[float(key)] = REGION_NAMES[val] if isinstance(val, str) else int(val)
    region = np.empty(nt, dtype=int)
    for i, a in enumerate(attr):
        if a is None:
            raise MeshError("triangles carry no regional attribute")
        if a not in codes:
            raise MeshError(f"unmapped regional attribute {a:g}")
        region[i] = codes[a]

    p = verts[tri]
    area = 0.5 * ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                  - (p[:, 1, 1] - p[:, 0, 1]) * (p[:, 2, 0] - p[:, 0, 0]))
    if np.any(area <= 0):
        raise MeshError(f"{np.sum(area <= 0)} inverted or degenerate triangles")
    dirichlet = boundary_vertices(tri, len(verts))
    obs = np.zeros((0, 2), dtype=int)
    if observation_radius is not None:
        obs = observation_edges_on_circle(verts, tri, observation_radius)
        if len(obs) == 0:
            raise MeshError("no mesh edges on the observation circle")
    return Mesh(verts, tri, region, dirichlet, obs)


def write_triangle_mesh(mesh: Mesh, stem, base=1):
    """Write ``stem.node`` and ``stem.ele`` with the region code as attribute."""
    stem = Path(stem)
    with open(stem.with_suffix(".node"), "w") as fh:
        fh.write(f"{mesh.n_vertices} 2 0 1\n")
        for i, (x, y) in enumerate(mesh.vertices):
            fh.write(f"{i + base} {x:.17g} {y:.17g} {int(mesh.dirichlet[i])}\n")
    with open(stem.with_suffix(".ele"), "w") as fh:
        fh.write(f"{mesh.n_triangles} 3 1\n")
        for i, (t, r) in enumerate(zip(mesh.triangles, mesh.region)):
            fh.write(f"{i + base} {t[0] + base} {t[1] + base} {t[2] + base} {r}\n")
