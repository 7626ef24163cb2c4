"""Separable convex first-order model of the objective.

For every design element ``i`` and part ``s`` (real / imaginary) the model uses

    phi(Y) = <C_U + tau (Y - Bbar)^2, (U - Y)^-1> + <C_L - tau (Y - Bbar)^2, (L - Y)^-1>

with ``C_U = (U - Bbar) G+ (U - Bbar)``, ``C_L = (L - Bbar) G- (L - Bbar)`` built from
the positive / negative semidefinite parts of the gradient, and the offset
``c = <G+, U - Bbar> + <G-, L - Bbar>``.  The element contributes ``phi - c``,
which is zero at ``Bbar`` and has gradient ``G`` there.  Asymptotes are scalar multiples of the identity.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import MaterialGraph
from .objectives import DesignGradient
from .tensor import sym_congruence, sym_eigh, sym_inner, sym_project_neg, sym_project_pos

ASYMPTOTE_MARGIN = 1e-9
_EYE = np.array([1.0, 1.0, 0.0])


class AsymptoteError(ValueError):
    pass


@dataclass(frozen=True)
class AsymptotePair:
    l_real: float
    u_real: float
    l_imag: float = -1.0
    u_imag: float = 1.0
    imag_active: bool = True

    def bounds(self, part: str):
        return (self.l_real, self.u_real) if part == "R" else (self.l_imag, self.u_imag)

    @classmethod
    def from_graph(cls, graph: MaterialGraph, pad: float = 0.5, samples: int = 65) -> "AsymptotePair":
        """Eigenvalue range of the sampled graph, widened by ``pad`` times its width."""
        y = graph.sample(samples)

        def padded(part):
            lam, _ = sym_eigh(part)
            lo, hi = float(lam.min()), float(lam.max())
            width = max(hi - lo, 1e-3 * max(1.0, abs(lo), abs(hi)))
            return lo - pad * width, hi + pad * width

        lr, ur = padded(y.real)
        active = not graph.is_real
        li, ui = padded(y.imag) if active else (-1.0, 1.0)
        return cls(lr, ur, li, ui, active)

    def for_graph(self, graph: MaterialGraph) -> "AsymptotePair":
        """Copy with the imaginary part switched off for real-valued graphs."""
        if graph.is_real and self.imag_active:
            return AsymptotePair(self.l_real, self.u_real, self.l_imag, self.u_imag, False)
        return self

    def validate(self, graph: MaterialGraph, samples: int = 65):
        y = graph.sample(samples)
        parts = [("R", y.real)] + ([("I", y.imag)] if self.imag_active else [])
        for name, part in parts:
            lo, hi = self.bounds(name)
            if not lo < hi:
                raise AsymptoteError(f"asymptotes of part {name} must satisfy l < u")
            lam, _ = sym_eigh(part)
            if lam.min() <= lo + ASYMPTOTE_MARGIN or lam.max() >= hi - ASYMPTOTE_MARGIN:
                raise AsymptoteError(
                    f"graph tensors (eigenvalues in [{lam.min():.4g}, {lam.max():.4g}]) not strictly "
                    f"inside the {name} asymptotes ({lo:.4g}, {hi:.4g})")
        if not self.imag_active and np.any(y.imag != 0):
            raise AsymptoteError("imaginary asymptotes are inactive but the graph is complex")


@dataclass
class _Part:
    lower: float
    upper: float
    center: np.ndarray  # (K, 3) real
    c_u: np.ndarray
    c_l: np.ndarray
    offset: np.ndarray  # (K,)


@dataclass
class HyperModel:
    center: np.ndarray
    value: float
    tau: float
    asymptotes: AsymptotePair
    parts: dict
    gradient: DesignGradient

    @property
    def n_elements(self) -> int:
        return len(self.center)

    def with_tau(self, tau: float) -> "HyperModel":
        """Same expansion point and gradient, new proximal parameter."""
        return HyperModel(self.center, self.value, float(tau), self.asymptotes, self.parts, self.gradient)


def _part(center, grad, lo, hi) -> _Part:
    gp = sym_project_pos(grad)
    gm = sym_project_neg(grad)
    du = hi * _EYE - center
    dl = lo * _EYE - center
    c_u = sym_congruence(du, gp)
    c_l = sym_congruence(dl, gm)
    offset = sym_inner(gp, du) + sym_inner(gm, dl)
    return _Part(lo, hi, center, c_u, c_l, offset)


def build_model(center, value, gradient: DesignGradient, asymptotes: AsymptotePair, tau: float,
                graph: MaterialGraph | None = None) -> HyperModel:
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    if graph is not None:
        asymptotes.validate(graph)
    center = np.asarray(center, dtype=complex)
    parts = {"R": _part(center.real, gradient.real, asymptotes.l_real, asymptotes.u_real)}
    if asymptotes.imag_active:
        parts["I"] = _part(center.imag, gradient.imag, asymptotes.l_imag, asymptotes.u_imag)
    return HyperModel(center, float(value), float(tau), asymptotes, parts, gradient)


def _shifted(shift, y11, y22, y12):
    """Diagonal entries and determinant of ``shift I - Y``."""
    a = shift - y11
    c = shift - y22
    return a, c, a * c - y12 * y12


def _phi(part: _Part, y, tau, idx):
    # <X, (sI - Y)^-1> = (x11 (s - y22) + x22 (s - y11) + 2 x12 y12) / det(sI - Y), written
    # out entrywise to keep the temporaries small on large evaluation grids
    y11, y22, y12 = y[..., 0], y[..., 1], y[..., 2]
    cen = part.center[idx]
    d11 = y11 - cen[..., 0]
    d22 = y22 - cen[..., 1]
    d12 = y12 - cen[..., 2]
    s11 = tau * (d11 * d11 + d12 * d12)
    s22 = tau * (d22 * d22 + d12 * d12)
    s12 = tau * d12 * (d11 + d22)
    au, cu, det_u = _shifted(part.upper, y11, y22, y12)
    al, cl, det_l = _shifted(part.lower, y11, y22, y12)
    if np.any((det_u <= 0) | (au <= 0)) or np.any((det_l <= 0) | (al >= 0)):
        raise AsymptoteError("tensor at or beyond an asymptote")
    ku = part.c_u[idx]
    kl = part.c_l[idx]
    upper = ((ku[..., 0] + s11) * cu + (ku[..., 1] + s22) * au + 2 * (ku[..., 2] + s12) * y12) / det_u
    lower = ((kl[..., 0] - s11) * cl + (kl[..., 1] - s22) * al + 2 * (kl[..., 2] - s12) * y12) / det_l
    return upper + lower - part.offset[idx]


def eval_elements(model: HyperModel, tensors, idx=None) -> np.ndarray:
    """Element contributions for tensors (..., 3) placed on elements ``idx``.

    ``idx`` broadcasts against the leading dimensions of ``tensors``; by
    default the leading dimension runs over all elements.
    """
    y = np.asarray(tensors, dtype=complex)
    if idx is None:
        idx = np.arange(model.n_elements)
    out = _phi(model.parts["R"], y.real, model.tau, idx)
    if "I" in model.parts:
        out = out + _phi(model.parts["I"], y.imag, model.tau, idx)
    return out


def eval_element(model: HyperModel, i: int, tensor) -> float:
    t = tensor.array if hasattr(tensor, "array") else np.asarray(tensor)
    return float(eval_elements(model, t, i))


def eval_total(model: HyperModel, tensors) -> float:
    return model.value + float(np.sum(eval_elements(model, tensors)))
