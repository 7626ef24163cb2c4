"""Run configuration: parsing, defaults per experiment, validation.

Configs are JSON or YAML mappings with one section per concern.  Complex
numbers are written as ``[re, im]`` pairs (plain numbers are accepted too)
and tensors as ``[b11, b22, b12]`` triples or a single number for an
isotropic tensor.
"""
from __future__ import annotations

import copy
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
import yaml

from .tensor import ComplexSymTensor2

EXPERIMENTS = ("cloaking", "tomography", "custom")


class ConfigError(ValueError):
    pass


# -------------------------------------------------------------- value codecs

def parse_complex(v) -> complex:
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return complex(v)
    if isinstance(v, (list, tuple)) and len(v) == 2 and all(isinstance(x, (int, float)) for x in v):
        return complex(v[0], v[1])
    raise ConfigError(f"cannot read complex number from {v!r}")


def parse_tensor(v) -> ComplexSymTensor2:
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return ComplexSymTensor2.isotropic(v)
    if isinstance(v, (list, tuple)) and len(v) == 2 and all(isinstance(x, (int, float)) for x in v):
        return ComplexSymTensor2.isotropic(parse_complex(v))
    if isinstance(v, (list, tuple)) and len(v) == 3:
        return ComplexSymTensor2(*(parse_complex(x) for x in v))
    raise ConfigError(f"cannot read tensor from {v!r}")


def dump_complex(z):
    z = complex(z)
    return [z.real, z.imag]


def dump_tensor(t: ComplexSymTensor2):
    return [dump_complex(t.b11), dump_complex(t.b22), dump_complex(t.b12)]


def _inv_sq(z):
    z = complex(z) ** -2
    return [z.real, z.imag]


# ------------------------------------------------------------------ sections

@dataclass
class GeometryConfig:
    box: float = 2.0
    pml: float = 1.0
    design_radius: float = 0.4
    particle_radius: float = 0.2
    observation_radius: float | None = None


@dataclass
class MeshConfig:
    kind: str = "structured"  # structured | triangle | none
    h: float = 0.0458
    h_pml: float | None = None
    node: str | None = None
    ele: str | None = None
    region_map: dict = field(default_factory=dict)
    n_elements: int = 1


@dataclass
class PhysicsConfig:
    wavelengths: list = field(default_factory=lambda: [0.55])
    directions_deg: list = field(default_factory=lambda: [0.0])
    amplitude: float = float(np.sqrt(2.0))
    sigma0: float = 100.0
    d_pml: float = 1.0
    background: object = 1.0
    particle: object = field(default_factory=lambda: _inv_sq(0.1 + 2j))


@dataclass
class GraphConfig:
    kind: str = "rotational"  # rotational | cyclic_linear | explicit
    reference: object = field(default_factory=lambda: [1.0, 0.25, 0.0])
    orientations: int | None = None
    nodes: list = field(default_factory=list)
    edges: list = field(default_factory=list)


@dataclass
class ObjectiveConfig:
    kind: str = "extinction"  # extinction | tracking | quadratic
    target: object = None
    target_noise: float = 0.0
    reference_file: str | None = None


@dataclass
class RegularizationConfig:
    eta: float = 0.0
    r0: float = 0.01


@dataclass
class AsymptoteConfig:
    l_real: float | None = None
    u_real: float | None = None
    l_imag: float | None = None
    u_imag: float | None = None
    pad: float = 0.5


@dataclass
class SgpSection:
    theta: float = 2.0
    delta: float | None = None
    tau_init: float | None = None
    eps_stop: float | None = None
    max_outer: int = 200
    max_inner: int = 60
    gammas: list = field(default_factory=list)
    discrete: bool = False
    checkpoint_every: int = 0
    resume_from: str | None = None


@dataclass
class InitialConfig:
    edge: int = 0
    alpha: float = 0.0


@dataclass
class TomographyConfig:
    phantom: list = field(default_factory=list)
    noise_scale: float = 0.0
    eta_sweep: list = field(default_factory=list)


@dataclass
class SweepConfig:
    orientations: list = field(default_factory=list)


@dataclass
class OutputConfig:
    directory: str = "out"
    figures: bool = True
    vtk: bool = True


SECTIONS = {
    "geometry": GeometryConfig, "mesh": MeshConfig, "physics": PhysicsConfig, "graph": GraphConfig,
    "objective": ObjectiveConfig, "regularization": RegularizationConfig,
    "asymptotes": AsymptoteConfig, "sgp": SgpSection, "initial": InitialConfig,
    "tomography": TomographyConfig, "sweep": SweepConfig, "output": OutputConfig,
}


@dataclass
class RunConfig:
    experiment: str
    seed: int = 0
    geometry: GeometryConfig = field(default_factory=GeometryConfig)
    mesh: MeshConfig = field(default_factory=MeshConfig)
    physics: PhysicsConfig = field(default_factory=PhysicsConfig)
    graph: GraphConfig = field(default_factory=GraphConfig)
    objective: ObjectiveConfig = field(default_factory=ObjectiveConfig)
    regularization: RegularizationConfig = field(default_factory=RegularizationConfig)
    asymptotes: AsymptoteConfig = field(default_factory=AsymptoteConfig)
    sgp: SgpSection = field(default_factory=SgpSection)
    initial: InitialConfig = field(default_factory=InitialConfig)
    tomography: TomographyConfig = field(default_factory=TomographyConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    base_dir: str = field(default=".", repr=False)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("base_dir")
        return d

    def resolve(self, path) -> Path:
        """Paths in the config are relative to the config file."""
        p = Path(path)
        return p if p.is_absolute() else Path(self.base_dir) / p


# ------------------------------------------------------------------ defaults

def default_dict(experiment: str) -> dict:
    if experiment == "cloaking":
        return {
            "geometry": {"particle_radius": 0.2},
            "mesh": {"h": 0.0458, "h_pml": 0.0917},  # lambda/12 inside, lambda/6 in the PML frame
            "physics": {"wavelengths": [0.55], "directions_deg": [0.0]},
            "graph": {"kind": "rotational", "reference": [1.0, 0.25, 0.0]},
            "objective": {"kind": "extinction"},
            "regularization": {"eta": 100.0, "r0": 0.01},
            "asymptotes": {"l_real": 0.0, "u_real": 100.0},
            "sgp": {"max_outer": 300, "delta": 0.01},
        }
    if experiment == "tomography":
        return {
            "geometry": {"particle_radius": 0.0, "observation_radius": 0.8},
            "mesh": {"h": 0.06, "h_pml": 0.15},
            "physics": {"wavelengths": [0.4, 0.5, 0.6, 0.7], "directions_deg": [0.0, 90.0, 180.0, 270.0],
                        "amplitude": 1.0, "particle": 1.0},
            "graph": {"kind": "cyclic_linear", "nodes": [1.0, 0.25, _inv_sq(1 + 2j)]},
            "objective": {"kind": "tracking"},
            "regularization": {"eta": 1.0, "r0": 0.12},
            "sgp": {"max_outer": 100, "delta": 0.1, "gammas": [1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0]},
            "tomography": {
                "phantom": [
                    {"shape": "star", "center": [-0.08, 0.06], "radius": 0.24, "inner_radius": 0.11,
                     "points": 5, "node": "m2"},
                    {"shape": "disk", "center": [0.2, -0.18], "radius": 0.11, "node": "m3"},
                ],
                "noise_scale": 0.01,
            },
        }
    if experiment == "custom":
        return {"mesh": {"kind": "none", "n_elements": 1},
                "graph": {"kind": "cyclic_linear", "nodes": [1.0, 0.5]},
                "objective": {"kind": "quadratic", "target": 0.7},
                "sgp": {"delta": 0.5}}
    raise ConfigError(f"unknown experiment {experiment!r}; expected one of {EXPERIMENTS}")


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _section(cls, data, name):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"section {name!r} must be a mapping")
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown keys in section {name!r}: {sorted(unknown)}")
    return cls(**data)


def _positive(value, name, allow_none=False):
    if value is None and allow_none:
        return
    if not isinstance(value, (int, float)) or isinstance(value, bool) or not value > 0:
        raise ConfigError(f"{name} must be a positive number, got {value!r}")


def from_dict(data: dict, experiment: str | None = None, base_dir=".") -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping")
    experiment = experiment or data.get("experiment")
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"experiment must be one of {EXPERIMENTS}, got {experiment!r}")
    if data.get("experiment", experiment) != experiment:
        raise ConfigError(f"config is for experiment {data['experiment']!r}, not {experiment!r}")
    unknown = set(data) - set(SECTIONS) - {"experiment", "seed"}
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
    merged = _merge(default_dict(experiment), {k: v for k, v in data.items() if k in SECTIONS})
    sections = {name: _section(cls, merged.get(name), name) for name, cls in SECTIONS.items()}
    seed = data.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise ConfigError("seed must be a nonnegative integer")
    cfg = RunConfig(experiment=experiment, seed=seed, base_dir=str(base_dir), **sections)
    validate(cfg)
    return cfg


def validate(cfg: RunConfig):
    g, m, ph = cfg.geometry, cfg.mesh, cfg.physics
    for name in ("box", "pml", "design_radius"):
        _positive(getattr(g, name), f"geometry.{name}")
    if g.particle_radius < 0:
        raise ConfigError("geometry.particle_radius must be nonnegative")
    if m.kind not in ("structured", "triangle", "none"):
        raise ConfigError(f"mesh.kind must be structured, triangle or none, got {m.kind!r}")
    if m.kind == "structured":
        _positive(m.h, "mesh.h")
        _positive(m.h_pml, "mesh.h_pml", allow_none=True)
    if m.kind == "triangle":
        for key in ("node", "ele"):
            path = getattr(m, key)
            if not path:
                raise ConfigError(f"mesh.{key} is required for triangle meshes")
            if not cfg.resolve(path).exists():
                raise ConfigError(f"mesh.{key} file not found: {path}")
        if not m.region_map:
            raise ConfigError("mesh.region_map is required for triangle meshes")
    if m.kind == "none":
        if cfg.objective.kind != "quadratic":
            raise ConfigError("mesh.kind 'none' only supports the quadratic objective")
        if not isinstance(m.n_elements, int) or m.n_elements < 1:
            raise ConfigError("mesh.n_elements must be a positive integer")
    if not ph.wavelengths or not ph.directions_deg:
        raise ConfigError("physics.wavelengths and physics.directions_deg must be nonempty")
    for w in ph.wavelengths:
        _positive(w, "physics.wavelengths entry")
    _positive(ph.sigma0, "physics.sigma0")
    _positive(ph.d_pml, "physics.d_pml")
    parse_tensor(ph.background)
    parse_tensor(ph.particle)
    gr = cfg.graph
    if gr.kind == "rotational":
        parse_tensor(gr.reference)
        if gr.orientations is not None and (not isinstance(gr.orientations, int) or gr.orientations < 1):
            raise ConfigError("graph.orientations must be a positive integer or null")
    elif gr.kind == "cyclic_linear":
        if len(gr.nodes) < 2:
            raise ConfigError("graph.nodes needs at least two tensors")
        for t in gr.nodes:
            parse_tensor(t)
    elif gr.kind == "explicit":
        if not gr.nodes or not gr.edges:
            raise ConfigError("explicit graphs need nodes and edges")
    else:
        raise ConfigError(f"unknown graph.kind {gr.kind!r}")
    if cfg.objective.kind not in ("extinction", "tracking", "quadratic"):
        raise ConfigError(f"unknown objective.kind {cfg.objective.kind!r}")
    if cfg.objective.reference_file and not cfg.resolve(cfg.objective.reference_file).exists():
        raise ConfigError(f"objective.reference_file not found: {cfg.objective.reference_file}")
    if cfg.objective.kind == "tracking" and g.observation_radius is None and m.kind == "structured":
        raise ConfigError("tracking objective needs geometry.observation_radius")
    if cfg.regularization.eta < 0:
        raise ConfigError("regularization.eta must be nonnegative")
    _positive(cfg.regularization.r0, "regularization.r0")
    s = cfg.sgp
    if not s.theta > 1:
        raise ConfigError("sgp.theta must exceed 1")
    if any(b <= a for a, b in zip(s.gammas, s.gammas[1:])):
        raise ConfigError("sgp.gammas must be strictly increasing")
    if s.max_outer < 0 or s.max_inner < 1:
        raise ConfigError("sgp.max_outer must be >= 0 and sgp.max_inner >= 1")
    if s.resume_from and not cfg.resolve(s.resume_from).exists():
        raise ConfigError(f"sgp.resume_from not found: {s.resume_from}")
    if not 0 <= cfg.initial.alpha <= 1:
        raise ConfigError("initial.alpha must lie in [0, 1]")
    if cfg.tomography.noise_scale < 0:
        raise ConfigError("tomography.noise_scale must be nonnegative")
    for item in cfg.tomography.phantom:
        if not isinstance(item, dict) or item.get("shape") not in ("disk", "star", "box") or "node" not in item:
            raise ConfigError(f"phantom entries need shape (disk, star, box) and node: {item!r}")
    for entry in cfg.sweep.orientations:
        if entry not in ("continuous", None) and (not isinstance(entry, int) or entry < 1):
            raise ConfigError(f"sweep.orientations entries must be positive integers or 'continuous': {entry!r}")


def load_config(path, experiment: str | None = None) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    text = path.read_text()
    try:
        data = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    return from_dict(data or {}, experiment, base_dir=path.parent)


def save_effective(cfg: RunConfig, path):
    Path(path).write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")
