"""Symmetric 2x2 tensors.

Tensors are stored by their three independent entries ``(b11, b22, b12)``.
Single values use :class:`ComplexSymTensor2` / :class:`RealSymTensor2`; fields
of tensors (one per element) are plain arrays of shape ``(..., 3)`` and the
``sym_*`` helpers below operate on them with numpy broadcasting.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def sym_from_matrix(m):
    """Symmetric storage of a (..., 2, 2) array; off-diagonal is averaged."""
    m = np.asarray(m)
    return np.stack([m[..., 0, 0], m[..., 1, 1], 0.5 * (m[..., 0, 1] + m[..., 1, 0])], axis=-1)


def sym_to_matrix(s):
    s = np.asarray(s)
    out = np.empty(s.shape[:-1] + (2, 2), dtype=s.dtype)
    out[..., 0, 0] = s[..., 0]
    out[..., 1, 1] = s[..., 1]
    out[..., 0, 1] = s[..., 2]
    out[..., 1, 0] = s[..., 2]
    return out


def sym_inner(a, b):
    """Re(tr(A^H B)) for stacks of symmetric tensors."""
    a = np.asarray(a)
    b = np.asarray(b)
    p = np.conj(a) * b
    return np.real(p[..., 0] + p[..., 1] + 2.0 * p[..., 2])


def sym_norm2(a):
    return sym_inner(a, a)


def sym_square(x):
    """X @ X for symmetric X (result is symmetric)."""
    x = np.asarray(x)
    x11, x22, x12 = x[..., 0], x[..., 1], x[..., 2]
    return np.stack([x11 * x11 + x12 * x12, x22 * x22 + x12 * x12, x12 * (x11 + x22)], axis=-1)


def sym_congruence(w, g):
    """W @ G @ W for symmetric W and G."""
    w11, w22, w12 = w[..., 0], w[..., 1], w[..., 2]
    g11, g22, g12 = g[..., 0], g[..., 1], g[..., 2]
    # rows of W @ G
    a11 = w11 * g11 + w12 * g12
    a12 = w11 * g12 + w12 * g22
    a21 = w12 * g11 + w22 * g12
    a22 = w12 * g12 + w22 * g22
    return np.stack([a11 * w11 + a12 * w12, a21 * w12 + a22 * w22, a11 * w12 + a12 * w22], axis=-1)


def sym_det(x):
    return x[..., 0] * x[..., 1] - x[..., 2] * x[..., 2]


def sym_adj(x):
    return np.stack([x[..., 1], x[..., 0], -x[..., 2]], axis=-1)


def sym_inv(x):
    return sym_adj(x) / sym_det(x)[..., None]


def sym_eigh(s):
    """Closed-form eigen-decomposition of real symmetric 2x2 stacks.

    Returns ``(lam, vecs)`` with ``lam[..., 0] <= lam[..., 1]`` and the
    eigenvectors in the columns of ``vecs`` (shape ``(..., 2, 2)``).
    Repeated eigenvalues give axis-aligned eigenvectors.
    """
    s = np.asarray(s, dtype=float)
    a, c, b = s[..., 0], s[..., 1], s[..., 2]
    mean = 0.5 * (a + c)
    half = 0.5 * (a - c)
    rad = np.hypot(half, b)
    lam = np.stack([mean - rad, mean + rad], axis=-1)
    # angle of the eigenvector of the larger eigenvalue; atan2(0, 0) = 0 keeps ties on the axes
    phi = 0.5 * np.arctan2(b, half)
    cp, sp = np.cos(phi), np.sin(phi)
    vecs = np.empty(s.shape[:-1] + (2, 2))
    vecs[..., 0, 0] = -sp
    vecs[..., 1, 0] = cp
    vecs[..., 0, 1] = cp
    vecs[..., 1, 1] = sp
    return lam, vecs


def _recompose(lam, vecs):
    v1 = vecs[..., :, 0]
    v2 = vecs[..., :, 1]
    l1 = lam[..., 0:1]
    l2 = lam[..., 1:2]
    return (l1 * np.stack([v1[..., 0] ** 2, v1[..., 1] ** 2, v1[..., 0] * v1[..., 1]], axis=-1)
            + l2 * np.stack([v2[..., 0] ** 2, v2[..., 1] ** 2, v2[..., 0] * v2[..., 1]], axis=-1))


def sym_project_pos(s):
    """Projection onto the positive semidefinite cone (negative eigenvalues clamped)."""
    lam, vecs = sym_eigh(s)
    return _recompose(np.maximum(lam, 0.0), vecs)


def sym_project_neg(s):
    lam, vecs = sym_eigh(s)
    return _recompose(np.minimum(lam, 0.0), vecs)


def sym_rotate(b, angle):
    """R(angle) B R(angle)^T for stacks of symmetric tensors."""
    b = np.asarray(b)
    angle = np.asarray(angle, dtype=float)
    c = np.cos(angle)
    s = np.sin(angle)
    b11, b22, b12 = b[..., 0], b[..., 1], b[..., 2]
    r11 = c * c * b11 - 2 * c * s * b12 + s * s * b22
    r22 = s * s * b11 + 2 * c * s * b12 + c * c * b22
    r12 = c * s * (b11 - b22) + (c * c - s * s) * b12
    return np.stack([r11, r22, r12], axis=-1)


@dataclass(frozen=True)
class ComplexSymTensor2:
    """Symmetric complex 2x2 tensor (an inverse relative permittivity)."""

    b11: complex
    b22: complex
    b12: complex = 0j

    @classmethod
    def from_array(cls, a) -> "ComplexSymTensor2":
        a = np.asarray(a, dtype=complex)
        if a.shape == (2, 2):
            a = sym_from_matrix(a)
        return cls(complex(a[0]), complex(a[1]), complex(a[2]))

    @classmethod
    def isotropic(cls, value: complex) -> "ComplexSymTensor2":
        return cls(complex(value), complex(value), 0j)

    @classmethod
    def diag(cls, d1: complex, d2: complex) -> "ComplexSymTensor2":
        return cls(complex(d1), complex(d2), 0j)

    @property
    def array(self) -> np.ndarray:
        return np.array([self.b11, self.b22, self.b12], dtype=complex)

    def matrix(self) -> np.ndarray:
        return sym_to_matrix(self.array)

    @property
    def real(self) -> "RealSymTensor2":
        return RealSymTensor2(self.b11.real, self.b22.real, self.b12.real)

    @property
    def imag(self) -> "RealSymTensor2":
        return RealSymTensor2(self.b11.imag, self.b22.imag, self.b12.imag)

    def __add__(self, other):
        return ComplexSymTensor2.from_array(self.array + other.array)

    def __sub__(self, other):
        return ComplexSymTensor2.from_array(self.array - other.array)

    def __mul__(self, scalar):
        return ComplexSymTensor2.from_array(self.array * scalar)

    __rmul__ = __mul__

    def norm(self) -> float:
        return float(np.sqrt(frob_inner(self, self)))


@dataclass(frozen=True)
class RealSymTensor2:
    s11: float
    s22: float
    s12: float = 0.0

    @classmethod
    def from_array(cls, a) -> "RealSymTensor2":
        a = np.asarray(a, dtype=float)
        if a.shape == (2, 2):
            a = sym_from_matrix(a)
        return cls(float(a[0]), float(a[1]), float(a[2]))

    @property
    def array(self) -> np.ndarray:
        return np.array([self.s11, self.s22, self.s12])

    def matrix(self) -> np.ndarray:
        return sym_to_matrix(self.array)

    def __add__(self, other):
        return RealSymTensor2.from_array(self.array + other.array)


def frob_inner(a: ComplexSymTensor2, b: ComplexSymTensor2) -> float:
    """Standard scalar product Re(tr(A^H B))."""
    return float(sym_inner(a.array, b.array))


def eig_sym2(s: RealSymTensor2):
    """Return ``(lam1, lam2, vectors)`` with lam1 <= lam2; eigenvectors are the columns."""
    lam, vecs = sym_eigh(s.array)
    return float(lam[0]), float(lam[1]), vecs


def project_pos(s: RealSymTensor2) -> RealSymTensor2:
    return RealSymTensor2.from_array(sym_project_pos(s.array))


def project_neg(s: RealSymTensor2) -> RealSymTensor2:
    return RealSymTensor2.from_array(sym_project_neg(s.array))


def rotate_tensor(b: ComplexSymTensor2, delta: float) -> ComplexSymTensor2:
    """Rotate by the angle pi * delta."""
    return ComplexSymTensor2.from_array(sym_rotate(b.array, np.pi * delta))
