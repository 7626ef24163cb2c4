"""P1 finite elements for the scattered-field Helmholtz problem with PML.

The unknown is the scattered field ``u`` of the transverse magnetic wave.
With total field ``u + u_I`` the weak form reads

    int B_Omega A_eps grad u . grad phi - omega^2 A_mu u phi
        = - int (B_Omega - B_b) grad u_I . grad phi

with homogeneous Dirichlet data on the outer PML boundary.  Design tensors
are constant per triangle.  Integrals of the incident wave and of the PML
coefficients use the 3-point mid-edge rule.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .mesh import BACKGROUND, DESIGN, PARTICLE, PML, Mesh
from .tensor import ComplexSymTensor2

# mid-edge rule: barycentric coordinates of the three points, weight area/3 each
MIDEDGE_BARY = np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]])


class SingularSystemError(RuntimeError):
    """The Helmholtz system could not be factorized (resonance or bad PML)."""


def pml_stretch(t, omega, sigma0, d_pml):
    """s(t) = 1 - sigma0 max(0, |t| - d) / (i omega)."""
    t = np.asarray(t, dtype=float)
    return 1.0 - sigma0 * np.maximum(0.0, np.abs(t) - d_pml) / (1j * omega)


def pml_factors(x, y, omega, sigma0=100.0, d_pml=1.0):
    """Return ``(A_eps, A_mu)``; ``A_eps`` as its two diagonal entries (..., 2)."""
    sx = pml_stretch(x, omega, sigma0, d_pml)
    sy = pml_stretch(y, omega, sigma0, d_pml)
    return np.stack([sy / sx, sx / sy], axis=-1), sx * sy


def incident_plane_wave(x, omega, direction, amplitude=1.0):
    """Value and gradient of ``amplitude * exp(i omega d.x)`` at points ``x`` (..., 2)."""
    x = np.asarray(x, dtype=float)
    d = np.asarray(direction, dtype=float)
    if abs(np.linalg.norm(d) - 1.0) > 1e-12:
        raise ValueError("direction must be a unit vector")
    val = amplitude * np.exp(1j * omega * (x @ d))
    return val, 1j * omega * val[..., None] * d


def direction_from_angle(angle):
    return np.array([np.cos(angle), np.sin(angle)])


@dataclass
class ScatterSetup:
    mesh: Mesh
    background: ComplexSymTensor2 = ComplexSymTensor2.isotropic(1.0)
    particle: ComplexSymTensor2 = ComplexSymTensor2.isotropic(1.0)
    sigma0: float = 100.0
    d_pml: float = 1.0

    def __post_init__(self):
        if self.sigma0 <= 0:
            raise ValueError("sigma0 must be positive")
        in_pml = np.max(np.abs(self.mesh.centroids), axis=1) > self.d_pml
        if np.any(in_pml & (self.mesh.region != PML)) and np.any(self.mesh.region == PML):
            raise ValueError("PML onset d_pml is inconsistent with the mesh regions")


@dataclass
class ComplexSparseSystem:
    """Dirichlet-reduced symmetric system ``matrix @ u[free] = rhs``."""

    matrix: sp.csc_matrix
    rhs: np.ndarray | None
    free: np.ndarray
    n: int

    def expand(self, u_free):
        u_free = np.asarray(u_free)
        out = np.zeros((self.n,) + u_free.shape[1:], dtype=complex)
        out[self.free] = u_free
        return out


class Factorization:
    """Sparse LU of a system matrix, reusable for many right-hand sides."""

    def __init__(self, system: ComplexSparseSystem):
        self.system = system
        try:
            # symmetric mode keeps the A + A^T ordering; threshold pivoting stays on
            self._lu = spla.splu(system.matrix, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.1,
                                 options={"SymmetricMode": True})
        except RuntimeError as exc:
            raise SingularSystemError(str(exc)) from exc
        diag = np.abs(self._lu.U.diagonal())
        if diag.min() <= 1e-14 * diag.max():
            raise SingularSystemError("near-singular factorization")

    def solve(self, rhs):
        """Solve for reduced right-hand side(s); columns are independent systems."""
        rhs = np.asarray(rhs, dtype=complex)
        return self._lu.solve(rhs)

    def solve_full(self, rhs_full):
        """Solve with full-length rhs (Dirichlet rows dropped), return full-length solution."""
        rhs_full = np.asarray(rhs_full)
        return self.system.expand(self.solve(rhs_full[self.system.free]))


def solve_sparse(system: ComplexSparseSystem, rhs=None):
    rhs = system.rhs if rhs is None else rhs
    return Factorization(system).solve(rhs)


class HelmholtzFEM:
    """Assembly for one mesh/setup; caches geometric data and per-omega matrices."""

    def __init__(self, setup: ScatterSetup):
        self.setup = setup
        mesh = setup.mesh
        self.mesh = mesh
        p = mesh.vertices[mesh.triangles]
        self.area = mesh.areas
        # gradients of the barycentric basis functions, (T, 3, 2)
        d = np.stack([p[:, 1] - p[:, 2], p[:, 2] - p[:, 0], p[:, 0] - p[:, 1]], axis=1)
        self.grad = np.stack([d[..., 1], -d[..., 0]], axis=-1) / (2 * self.area[:, None, None])
        self.qpoints = np.einsum("qj,tjx->tqx", MIDEDGE_BARY, p)
        self.n = mesh.n_vertices
        self.free = np.flatnonzero(~mesh.dirichlet)
        self.K = mesh.n_design
        self.design = np.arange(self.K)
        self.scatter_tris = np.flatnonzero((mesh.region == DESIGN) | (mesh.region == PARTICLE))
        self._restrict = sp.identity(self.n, format="csr")[self.free]
        # per design triangle the stiffness for unit tensor entries: (K, 3 entries, 3, 3)
        g = self.grad[: self.K]
        a = self.area[: self.K, None, None]
        gx, gy = g[..., 0], g[..., 1]
        self.design_basis = np.stack([
            a * gx[:, :, None] * gx[:, None, :],
            a * gy[:, :, None] * gy[:, None, :],
            a * (gx[:, :, None] * gy[:, None, :] + gy[:, :, None] * gx[:, None, :]),
        ], axis=1)
        self._const_cache = {}
        self._inc_cache = {}

    # tensors on every triangle outside the design
    def _nondesign_tensor(self):
        reg = self.mesh.region
        out = np.empty((self.mesh.n_triangles, 3), dtype=complex)
        out[:] = self.setup.background.array
        out[reg == PARTICLE] = self.setup.particle.array
        return out

    def _element_matrices(self, tensors, tris, omega):
        """Element matrices of B A_eps grad.grad - omega^2 A_mu on triangles ``tris``."""
        s = self.setup
        g = self.grad[tris]
        a = self.area[tris]
        q = self.qpoints[tris]
        aeps, amu = pml_factors(q[..., 0], q[..., 1], omega, s.sigma0, s.d_pml)
        aeps = aeps.mean(axis=1)  # (T, 2) averages of the mid-edge values
        b = tensors
        # coordinate stretching J^-1 B J^-T det J: diagonal entries scaled, off-diagonal unchanged
        c11 = b[:, 0] * aeps[:, 0]
        c22 = b[:, 1] * aeps[:, 1]
        c12 = b[:, 2]
        gx, gy = g[..., 0], g[..., 1]
        stiff = a[:, None, None] * (
            c11[:, None, None] * gx[:, :, None] * gx[:, None, :]
            + c22[:, None, None] * gy[:, :, None] * gy[:, None, :]
            + c12[:, None, None] * (gx[:, :, None] * gy[:, None, :] + gy[:, :, None] * gx[:, None, :]))
        # mass with mid-edge quadrature: sum_q w_q A_mu(q) phi_i(q) phi_j(q)
        mass = (a[:, None, None] / 3.0) * np.einsum("tq,qi,qj->tij", amu, MIDEDGE_BARY, MIDEDGE_BARY)
        return stiff - omega ** 2 * mass

    def _assemble(self, elem, tris):
        rows = self.mesh.triangles[tris]
        r = np.repeat(rows, 3, axis=1).ravel()
        c = np.tile(rows, (1, 3)).ravel()
        m = sp.coo_matrix((elem.ravel(), (r, c)), shape=(self.n, self.n)).tocsc()
        return m

    def constant_matrix(self, omega):
        """A_C plus the design-region mass term, full size."""
        if omega not in self._const_cache:
            tris = np.arange(self.mesh.n_triangles)
            tensors = self._nondesign_tensor()
            elem = self._element_matrices(tensors, tris, omega)
            elem[: self.K] = -omega ** 2 * (self.area[: self.K, None, None] / 3.0) * np.einsum(
                "qi,qj->ij", MIDEDGE_BARY, MIDEDGE_BARY)[None]
            self._const_cache[omega] = self._assemble(elem, tris)
        return self._const_cache[omega]

    def design_matrix(self, tensors):
        """A(B) stiffness part, full size."""
        elem = np.einsum("ke,keij->kij", np.asarray(tensors, dtype=complex), self.design_basis)
        return self._assemble(elem, self.design)

    def reduce(self, matrix):
        return (self._restrict @ matrix @ self._restrict.T).tocsc()

    def assemble_system(self, tensors, omega) -> ComplexSparseSystem:
        tensors = self._check(tensors)
        full = self.constant_matrix(omega) + self.design_matrix(tensors)
        return ComplexSparseSystem(self.reduce(full), None, self.free, self.n)

    def _check(self, tensors):
        tensors = np.asarray(tensors, dtype=complex)
        if tensors.shape != (self.K, 3):
            raise ValueError(f"expected {self.K} design tensors, got shape {tensors.shape}")
        return tensors

    def incident_quadrature(self, omega, direction, amplitude=1.0, tris=None):
        """grad u_I at the mid-edge points of ``tris`` (default: design+particle), (T, 3, 2)."""
        key = (omega, tuple(np.round(direction, 15)), amplitude)
        if tris is None:
            if key not in self._inc_cache:
                q = self.qpoints[self.scatter_tris]
                self._inc_cache[key] = incident_plane_wave(q, omega, direction, amplitude)[1]
            return self._inc_cache[key]
        return incident_plane_wave(self.qpoints[tris], omega, direction, amplitude)[1]

    def contrast(self, tensors):
        """B_Omega - B_b on the design and particle triangles (scatter_tris order)."""
        tensors = self._check(tensors)
        full = np.empty((self.mesh.n_triangles, 3), dtype=complex)
        full[: self.K] = tensors
        full[self.K:] = self._nondesign_tensor()[self.K:]
        return full[self.scatter_tris] - self.setup.background.array

    def assemble_rhs(self, tensors, omega, direction, amplitude=1.0):
        """Full-length load vector; nonzero only next to design/particle triangles."""
        dB = self.contrast(tensors)
        gI = self.incident_quadrature(omega, direction, amplitude)
        tris = self.scatter_tris
        intg = gI.sum(axis=1) * (self.area[tris] / 3.0)[:, None]  # int_T grad u_I
        flux = np.stack([dB[:, 0] * intg[:, 0] + dB[:, 2] * intg[:, 1],
                         dB[:, 2] * intg[:, 0] + dB[:, 1] * intg[:, 1]], axis=-1)
        local = -np.einsum("tx,tix->ti", flux, self.grad[tris])
        f = np.zeros(self.n, dtype=complex)
        np.add.at(f, self.mesh.triangles[tris].ravel(), local.ravel())
        return f

    def factorize(self, tensors, omega) -> Factorization:
        return Factorization(self.assemble_system(tensors, omega))

    def solve(self, tensors, omega, direction, amplitude=1.0):
        fac = self.factorize(tensors, omega)
        return fac.solve_full(self.assemble_rhs(tensors, omega, direction, amplitude))

    def element_gradients(self, u):
        """Constant gradient of the P1 field ``u`` (full length) per triangle, (T, 2)."""
        u = np.asarray(u)
        return np.einsum("ti,tix->tx", u[self.mesh.triangles], self.grad)

    def assemble_source(self, func, tris=None):
        """Load vector int f phi_i with the mid-edge rule (for manufactured solutions)."""
        tris = np.arange(self.mesh.n_triangles) if tris is None else tris
        fq = func(self.qpoints[tris])  # (T, 3)
        local = (self.area[tris] / 3.0)[:, None] * (fq @ MIDEDGE_BARY)
        f = np.zeros(self.n, dtype=complex)
        np.add.at(f, self.mesh.triangles[tris].ravel(), local.ravel())
        return f


def assemble_system(setup: ScatterSetup, tensors, omega) -> ComplexSparseSystem:
    return HelmholtzFEM(setup).assemble_system(tensors, omega)


def assemble_rhs(setup: ScatterSetup, tensors, omega, direction, amplitude=1.0):
    return HelmholtzFEM(setup).assemble_rhs(tensors, omega, direction, amplitude)


def region_l2_norm(fem: HelmholtzFEM, u, regions=(BACKGROUND,)):
    """L2 norm of a P1 field over triangles of the given regions (exact for P1)."""
    sel = np.isin(fem.mesh.region, regions)
    ut = np.asarray(u)[fem.mesh.triangles[sel]]
    a = fem.area[sel]
    m = np.array([[2, 1, 1], [1, 2, 1], [1, 1, 2]]) / 12.0
    val = np.einsum("ti,ij,tj->t", np.conj(ut), m, ut).real * a
    return float(np.sqrt(val.sum()))
