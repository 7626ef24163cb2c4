"""Physical objectives, their adjoints and design gradients.

Two functionals are provided:

* extinction (cloaking): ``J = Re(u^H (V + V_P) + W + W_P)``, the volume form
  of the extinction cross section, affine in the scattered field ``u``.  It is
  nonnegative for passive scatterers (time dependence ``exp(-i omega t)``);
* boundary tracking (tomography): ``J = int_dU |u - u_D|^2`` written as
  ``Re(u^H Q u + 2 u^H V + W)`` with ``V = -Q u_D`` and ``W = u_D^H Q u_D``.

Gradients are returned as :class:`DesignGradient`, a pair of real symmetric
tensor fields holding the derivatives with respect to ``Re B_k`` and
``Im B_k``.  The off-diagonal slot stores the matrix entry, so a
perturbation of the stored ``b12`` by ``h`` changes the objective by
``2 h G12``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .fem import HelmholtzFEM, direction_from_angle
from .tensor import sym_from_matrix, sym_inner


@dataclass
class DesignGradient:
    real: np.ndarray  # (K, 3)
    imag: np.ndarray  # (K, 3)

    @classmethod
    def zeros(cls, k: int) -> "DesignGradient":
        return cls(np.zeros((k, 3)), np.zeros((k, 3)))

    def __add__(self, other):
        return DesignGradient(self.real + other.real, self.imag + other.imag)

    def __mul__(self, scalar):
        return DesignGradient(self.real * scalar, self.imag * scalar)

    __rmul__ = __mul__

    def directional(self, direction) -> float:
        """Derivative along a complex tensor field ``direction`` (K, 3)."""
        d = np.asarray(direction)
        return float(np.sum(sym_inner(self.real, d.real)) + np.sum(sym_inner(self.imag, d.imag)))

    def element_norms(self) -> np.ndarray:
        return np.sqrt(sym_inner(self.real, self.real) + sym_inner(self.imag, self.imag))


def _gradient_from_bilinear(area, left, right, k):
    """Gradient of ``Re(int left^T Y right)`` for per-point vectors (K, Q, 2).

    With ``M = int left right^T`` one has ``Re tr(Y M^T)``, hence
    ``G^R = Re(sym M)`` and ``G^I = -Im(sym M)``.
    """
    m = np.einsum("tqx,tqy->txy", left, right) * (area / left.shape[1])[:, None, None]
    s = sym_from_matrix(m[:k])
    return DesignGradient(s.real.copy(), -s.imag)


# ---------------------------------------------------------------- extinction

@dataclass
class ExtinctionAssembly:
    """``V + V_P`` (full length) and ``W + W_P`` for one incident wave."""

    v: np.ndarray
    w: complex
    omega: float


def extinction_assembly(fem: HelmholtzFEM, tensors, omega, direction, amplitude=1.0) -> ExtinctionAssembly:
    dB = np.conj(fem.contrast(tensors))
    tris = fem.scatter_tris
    gI = fem.incident_quadrature(omega, direction, amplitude)
    pref = -1j / (2.0 * omega)
    w_q = (fem.area[tris] / 3.0)[:, None]
    intg = gI.sum(axis=1) * w_q  # int_T grad u_I
    flux = np.stack([dB[:, 0] * intg[:, 0] + dB[:, 2] * intg[:, 1],
                     dB[:, 2] * intg[:, 0] + dB[:, 1] * intg[:, 1]], axis=-1)
    local = pref * np.einsum("tx,tix->ti", flux, fem.grad[tris])
    v = np.zeros(fem.n, dtype=complex)
    np.add.at(v, fem.mesh.triangles[tris].ravel(), local.ravel())
    # grad u_I^T conj(dB) conj(grad u_I) at every quadrature point
    a, c = gI, np.conj(gI)
    quad = (dB[:, None, 0] * a[..., 0] * c[..., 0] + dB[:, None, 1] * a[..., 1] * c[..., 1]
            + dB[:, None, 2] * (a[..., 0] * c[..., 1] + a[..., 1] * c[..., 0]))
    w = pref * np.sum(quad * w_q)
    return ExtinctionAssembly(v, complex(w), float(omega))


def extinction_value(assembly: ExtinctionAssembly, u) -> float:
    return float(np.real(np.vdot(u, assembly.v) + assembly.w))


def extinction_volume_integral(fem: HelmholtzFEM, tensors, u, omega, direction, amplitude=1.0) -> float:
    """Re((i/2w) int grad u_I^H (B - B_b)(grad u + grad u_I)) over design and particle."""
    tris = fem.scatter_tris
    dB = fem.contrast(tensors)
    gI = fem.incident_quadrature(omega, direction, amplitude)
    gu = fem.element_gradients(u)[tris][:, None, :] + gI
    bg = np.stack([dB[:, None, 0] * gu[..., 0] + dB[:, None, 2] * gu[..., 1],
                   dB[:, None, 2] * gu[..., 0] + dB[:, None, 1] * gu[..., 1]], axis=-1)
    integrand = np.sum(np.conj(gI) * bg, axis=-1)
    total = np.sum(integrand * (fem.area[tris] / 3.0)[:, None])
    return float(np.real(1j / (2.0 * omega) * total))


def extinction_adjoint_rhs(assembly: ExtinctionAssembly, u=None):
    """-(V + V_P)^*; independent of ``u`` since the functional is affine in it."""
    return -np.conj(assembly.v)


def extinction_gradient(fem: HelmholtzFEM, u, p, omega, direction, amplitude=1.0) -> DesignGradient:
    k = fem.K
    gI = fem.incident_quadrature(omega, direction, amplitude)[:k]
    gu = fem.element_gradients(u)[:k, None, :] + gI
    gp = fem.element_gradients(p)[:k, None, :] + 1j / (2.0 * omega) * np.conj(gI)
    return _gradient_from_bilinear(fem.area[:k], gp, gu, k)


# ------------------------------------------------------------------ tracking

def boundary_mass_matrix(n_vertices, vertices, observation_edges) -> sp.csr_matrix:
    """Q_ij = int_dU phi_i phi_j on the polygonal observation curve."""
    e = np.asarray(observation_edges, dtype=int)
    length = np.linalg.norm(vertices[e[:, 1]] - vertices[e[:, 0]], axis=1)
    local = length[:, None, None] / 6.0 * np.array([[2.0, 1.0], [1.0, 2.0]])
    r = np.repeat(e, 2, axis=1).ravel()
    c = np.tile(e, (1, 2)).ravel()
    return sp.coo_matrix((local.ravel(), (r, c)), shape=(n_vertices, n_vertices)).tocsr()


@dataclass
class TrackingAssembly:
    q: sp.csr_matrix
    v: np.ndarray
    w: float
    u_ref: np.ndarray


def tracking_assembly(q, u_ref) -> TrackingAssembly:
    u_ref = np.asarray(u_ref, dtype=complex)
    qu = q @ u_ref
    return TrackingAssembly(q, -qu, float(np.real(np.vdot(u_ref, qu))), u_ref)


def tracking_value(u, tracking: TrackingAssembly) -> float:
    qu = tracking.q @ u
    return float(np.real(np.vdot(u, qu) + 2.0 * np.vdot(u, tracking.v) + tracking.w))


def tracking_adjoint_rhs(tracking: TrackingAssembly, u):
    return -2.0 * np.conj(tracking.q @ u + tracking.v)


def tracking_gradient(fem: HelmholtzFEM, u, p, omega, direction, amplitude=1.0) -> DesignGradient:
    k = fem.K
    gI = fem.incident_quadrature(omega, direction, amplitude)[:k]
    gu = fem.element_gradients(u)[:k, None, :] + gI
    gp = np.broadcast_to(fem.element_gradients(p)[:k, None, :], gu.shape)
    return _gradient_from_bilinear(fem.area[:k], gu, gp, k)


def physical_gradient(fem: HelmholtzFEM, u, p, omega, direction, kind, amplitude=1.0) -> DesignGradient:
    if kind == "extinction":
        return extinction_gradient(fem, u, p, omega, direction, amplitude)
    if kind == "tracking":
        return tracking_gradient(fem, u, p, omega, direction, amplitude)
    raise ValueError(f"unknown objective kind {kind!r}")


# ----------------------------------------------------------------- evaluators

@dataclass(frozen=True)
class Wave:
    omega: float
    direction: tuple

    @classmethod
    def from_wavelength(cls, wavelength, angle):
        d = direction_from_angle(angle)
        return cls(2 * np.pi / wavelength, (float(d[0]), float(d[1])))

    @property
    def key(self):
        return (round(self.omega, 12), round(self.direction[0], 12), round(self.direction[1], 12))


def group_waves(waves):
    """Waves grouped by wavenumber, preserving the input order within groups."""
    groups = {}
    for j, w in enumerate(waves):
        groups.setdefault(w.omega, []).append(j)
    return groups


@dataclass
class ObjectiveResult:
    value: float
    gradient: DesignGradient | None
    fields: list = field(default_factory=list, repr=False)


class ExtinctionObjective:
    """Extinction of one (or several summed) incident plane waves."""

    kind = "extinction"

    def __init__(self, fem: HelmholtzFEM, waves, amplitude=1.0):
        self.fem = fem
        self.waves = list(waves)
        self.amplitude = amplitude

    def __call__(self, tensors, gradient=True) -> ObjectiveResult:
        fem = self.fem
        value = 0.0
        grad = DesignGradient.zeros(fem.K) if gradient else None
        fields = [None] * len(self.waves)
        for omega, idx in group_waves(self.waves).items():
            fac = fem.factorize(tensors, omega)
            for j in idx:
                d = np.asarray(self.waves[j].direction)
                rhs = fem.assemble_rhs(tensors, omega, d, self.amplitude)
                u = fac.solve_full(rhs)
                asm = extinction_assembly(fem, tensors, omega, d, self.amplitude)
                value += extinction_value(asm, u)
                fields[j] = u
                if gradient:
                    p = fac.solve_full(extinction_adjoint_rhs(asm))
                    grad = grad + extinction_gradient(fem, u, p, omega, d, self.amplitude)
        return ObjectiveResult(value, grad, fields)


class TrackingObjective:
    """Sum over waves of the boundary misfit against reference fields."""

    kind = "tracking"

    def __init__(self, fem: HelmholtzFEM, waves, reference, amplitude=1.0):
        self.fem = fem
        self.waves = list(waves)
        self.amplitude = amplitude
        mesh = fem.mesh
        if mesh.observation_edges is None or len(mesh.observation_edges) == 0:
            raise ValueError("mesh has no observation edges")
        self.q = boundary_mass_matrix(mesh.n_vertices, mesh.vertices, mesh.observation_edges)
        reference = np.asarray(reference, dtype=complex)
        if reference.shape != (len(self.waves), fem.n):
            raise ValueError(f"reference fields must have shape {(len(self.waves), fem.n)}")
        self.tracking = [tracking_assembly(self.q, r) for r in reference]

    def __call__(self, tensors, gradient=True) -> ObjectiveResult:
        return multi_wave_objective(self.fem, tensors, self.waves, self.tracking, self.amplitude, gradient)


def multi_wave_objective(fem: HelmholtzFEM, tensors, waves, tracking, amplitude=1.0, gradient=True):
    """Summed tracking misfit; one factorization per wavenumber, batched solves."""
    value = 0.0
    grad = DesignGradient.zeros(fem.K) if gradient else None
    fields = [None] * len(waves)
    free = fem.free
    for omega, idx in group_waves(waves).items():
        fac = fem.factorize(tensors, omega)
        rhs = np.column_stack([fem.assemble_rhs(tensors, omega, np.asarray(waves[j].direction), amplitude)[free]
                               for j in idx])
        sol = fac.solve(rhs)
        us = [fac.system.expand(sol[:, c]) for c in range(len(idx))]
        for j, u in zip(idx, us):
            value += tracking_value(u, tracking[j])
            fields[j] = u
        if gradient:
            arhs = np.column_stack([tracking_adjoint_rhs(tracking[j], u)[free] for j, u in zip(idx, us)])
            adj = fac.solve(arhs)
            for c, (j, u) in enumerate(zip(idx, us)):
                p = fac.system.expand(adj[:, c])
                grad = grad + tracking_gradient(fem, u, p, omega, np.asarray(waves[j].direction), amplitude)
    return ObjectiveResult(value, grad, fields)


def forward_fields(fem: HelmholtzFEM, tensors, waves, amplitude=1.0) -> np.ndarray:
    """Scattered fields for all waves, shape (n_waves, n)."""
    out = np.zeros((len(waves), fem.n), dtype=complex)
    for omega, idx in group_waves(waves).items():
        fac = fem.factorize(tensors, omega)
        for j in idx:
            out[j] = fac.solve_full(fem.assemble_rhs(tensors, omega, np.asarray(waves[j].direction), amplitude))
    return out


def add_noise(fields, noise_scale, rng):
    """Complex Gaussian perturbation scaled by the RMS of each field."""
    fields = np.asarray(fields, dtype=complex)
    if noise_scale == 0:
        return fields.copy()
    rms = np.sqrt(np.mean(np.abs(fields) ** 2, axis=-1, keepdims=True))
    z = rng.standard_normal(fields.shape) + 1j * rng.standard_normal(fields.shape)
    return fields + noise_scale * rms * z / np.sqrt(2.0)


def save_reference_fields(path, waves, fields):
    np.savez(Path(path), omega=np.array([w.omega for w in waves]),
             direction=np.array([w.direction for w in waves]), fields=np.asarray(fields))


def load_reference_fields(path, waves):
    data = np.load(Path(path))
    lookup = {Wave(float(o), (float(d[0]), float(d[1]))).key: f
              for o, d, f in zip(data["omega"], data["direction"], data["fields"])}
    try:
        return np.array([lookup[w.key] for w in waves])
    except KeyError as exc:
        raise KeyError(f"reference field cache lacks wave {exc}") from None


class QuadraticObjective:
    """Synthetic ``sum_k w_k |B_k - T_k|^2`` (no PDE), for toy problems and tests."""

    kind = "quadratic"

    def __init__(self, target, weights=None):
        self.target = np.asarray(target, dtype=complex)
        k = len(self.target)
        self.weights = np.ones(k) if weights is None else np.asarray(weights, dtype=float)

    def __call__(self, tensors, gradient=True) -> ObjectiveResult:
        d = np.asarray(tensors, dtype=complex) - self.target
        value = float(np.sum(self.weights * sym_inner(d, d)))
        grad = None
        if gradient:
            w = 2.0 * self.weights[:, None]
            grad = DesignGradient(w * d.real, w * d.imag)
        return ObjectiveResult(value, grad)
