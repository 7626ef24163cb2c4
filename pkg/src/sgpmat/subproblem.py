"""Global solution of the separable model problem, element by element.

For every design element and every graph edge the one-dimensional problem

    min_{delta in [0, 1]}  model_i(psi_l(delta)) + gamma delta (1 - delta)

is solved to global optimality:

* rotational edges with a real diagonal reference tensor reduce to
  ``const - (a cos 2 theta - b sin 2 theta) / 2``; for ``gamma = 0`` on a closed
  edge the minimizer is explicit, otherwise the stationarity equation is
  bracketed on a grid and bisected;
* polynomial edges give a rational function ``p / q`` whose stationary points
  are roots of ``q p' - q' p + gamma (1 - 2 delta) q^2``.

All candidates (stationary points and both endpoints) are compared with the
exact model value.  Everything is vectorized over elements.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import Polynomial

from .graph import DesignState, GraphError, MaterialGraph, PolynomialEdge, RotationalEdge
from .hyper import HyperModel, eval_elements

TRIM_RTOL = 1e-14
ROOT_IMAG_TOL = 1e-8
EDGE_ROOT_IMAG_TOL = 1e-6
ROT_GRID = 256
BISECT_TOL = 1e-12
GAMMA_GRID = 64


@dataclass
class EdgeSolveResult:
    alpha: float
    value: float
    candidates: list = field(default_factory=list)


def grayness_term(alpha, gamma):
    return gamma * alpha * (1.0 - alpha)


def _edge_values(model, edge, idx, delta, gamma):
    """Model plus grayness for elements ``idx`` at coordinates ``delta`` (same shape)."""
    return eval_elements(model, edge.evaluate(delta), idx) + grayness_term(delta, gamma)


def _select(idx_cand, delta, values, n):
    """Per element the candidate with the lowest value; ties go to the lowest delta."""
    order = np.lexsort((delta, values, idx_cand))
    first = np.ones(len(order), dtype=bool)
    first[1:] = idx_cand[order][1:] != idx_cand[order][:-1]
    best = order[first]
    alpha = np.empty(n)
    val = np.empty(n)
    alpha[idx_cand[best]] = delta[best]
    val[idx_cand[best]] = values[best]
    return alpha, val


# ---------------------------------------------------------------- rotational

def rotational_coefficients(model: HyperModel, edge: RotationalEdge, idx=None):
    """Coefficients (a, b) with d(model)/d(alpha) = pi (a sin 2 pi alpha + b cos 2 pi alpha).

    Here ``alpha`` is the rotation angle divided by pi.  Only the real part
    varies along the edge since the reference tensor is real.
    """
    if not edge.is_closed_form:
        raise GraphError("closed-form rotational solve needs a real diagonal reference tensor")
    idx = np.arange(model.n_elements) if idx is None else np.asarray(idx)
    part = model.parts["R"]
    r11, r22 = edge.reference.b11.real, edge.reference.b22.real
    bl11, bl22 = 1.0 / (part.lower - r11), 1.0 / (part.lower - r22)
    bu11, bu22 = 1.0 / (part.upper - r11), 1.0 / (part.upper - r22)
    bbar = part.center[idx]
    cu = part.c_u[idx]
    cl = part.c_l[idx]
    tau = model.tau
    c0 = (2 * (bl11 - bu11) * r11 + 2 * (bu22 - bl22) * r22
          + ((bu11 - bu22) + (bl22 - bl11)) * (bbar[:, 0] + bbar[:, 1]))
    c1 = (bu11 - bu22) * (cu[:, 1] - cu[:, 0]) + (bl11 - bl22) * (cl[:, 1] - cl[:, 0])
    c2 = (bu11 - bu22) * 2 * cu[:, 2] + (bl11 - bl22) * 2 * cl[:, 2]
    a = tau * (bbar[:, 1] - bbar[:, 0]) * c0 + c1
    b = tau * 2 * bbar[:, 2] * c0 + c2
    return a, b


def rotational_alpha(a, b):
    """Closed-form minimizer on the closed edge, in [0, 1)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        base = np.arctan(-b / a)
    x = np.where(a < 0, base + np.pi,
                 np.where(a > 0, np.mod(base, 2 * np.pi), 0.5 * np.pi * np.sign(b) + np.pi))
    return np.mod(x, 2 * np.pi) / (2 * np.pi)


def _bracket_roots(fun, n, grid=ROT_GRID):
    """All sign changes of ``fun(delta)`` (vectorized over n rows) refined by bisection."""
    d = np.linspace(0.0, 1.0, grid + 1)
    vals = fun(np.broadcast_to(d, (n, grid + 1)), np.arange(n)[:, None])
    s = np.sign(vals)
    rows, cols = np.nonzero(s[:, :-1] * s[:, 1:] < 0)
    exact_r, exact_c = np.nonzero(vals == 0)
    lo = d[cols].copy()
    hi = d[cols + 1].copy()
    flo = vals[rows, cols]
    while lo.size and np.max(hi - lo) > BISECT_TOL:
        mid = 0.5 * (lo + hi)
        fm = fun(mid, rows)
        left = np.sign(fm) == np.sign(flo)
        lo = np.where(left, mid, lo)
        flo = np.where(left, fm, flo)
        hi = np.where(left, hi, mid)
    return np.concatenate([rows, exact_r]), np.concatenate([0.5 * (lo + hi), d[exact_c]])


def solve_rotational_edges(model: HyperModel, edge: RotationalEdge, gamma=0.0, idx=None):
    """Global minimizers on a rotational edge for elements ``idx``; returns (alpha, value)."""
    idx = np.arange(model.n_elements) if idx is None else np.asarray(idx)
    n = len(idx)
    a, b = rotational_coefficients(model, edge, idx)
    closed = edge.offset == 0.0 and edge.span == np.pi
    if closed and gamma == 0:
        alpha = rotational_alpha(a, b)
        return alpha, _edge_values(model, edge, idx, alpha, 0.0)

    def deriv(delta, rows):
        theta = edge.offset + edge.span * delta
        return (edge.span * (a[rows] * np.sin(2 * theta) + b[rows] * np.cos(2 * theta))
                + gamma * (1 - 2 * delta))

    rows, roots = _bracket_roots(deriv, n)
    cand_i = np.concatenate([np.arange(n), np.arange(n), rows])
    cand_d = np.concatenate([np.zeros(n), np.ones(n), roots])
    vals = _edge_values(model, edge, idx[cand_i], cand_d, gamma)
    return _select(cand_i, cand_d, vals, n)


def solve_rotational_edge(model: HyperModel, i: int, edge: RotationalEdge, gamma=0.0) -> EdgeSolveResult:
    alpha, value = solve_rotational_edges(model, edge, gamma, np.array([i]))
    a, b = rotational_coefficients(model, edge, np.array([i]))
    return EdgeSolveResult(float(alpha[0]), float(value[0]), [float(a[0]), float(b[0])])


# ---------------------------------------------------------------- polynomial

def _pmul(x, y):
    """Row-wise products of ascending coefficient arrays (n, dx), (n, dy)."""
    out = np.zeros((x.shape[0], x.shape[1] + y.shape[1] - 1))
    for j in range(x.shape[1]):
        out[:, j:j + y.shape[1]] += x[:, j:j + 1] * y
    return out


def _padd(*polys):
    width = max(p.shape[1] for p in polys)
    out = np.zeros((polys[0].shape[0], width))
    for p in polys:
        out[:, :p.shape[1]] += p
    return out


def _pder(x):
    if x.shape[1] == 1:
        return np.zeros_like(x)
    return x[:, 1:] * np.arange(1, x.shape[1])


def _part_rational(part, coef, tau, idx):
    """Numerator and denominator of phi - c for one part; ``coef`` is (deg+1, 3) real."""
    n = len(idx)
    y = np.broadcast_to(coef.T[:, None, :], (3, n, coef.shape[0]))
    y11, y22, y12 = y[0], y[1], y[2]
    one = np.ones((n, 1))
    bb = part.center[idx]
    # Y - Bbar
    d11 = y11.copy()
    d22 = y22.copy()
    d12 = y12.copy()
    d11[:, 0] -= bb[:, 0]
    d22[:, 0] -= bb[:, 1]
    d12[:, 0] -= bb[:, 2]
    sq11 = _padd(_pmul(d11, d11), _pmul(d12, d12)) * tau
    sq22 = _padd(_pmul(d22, d22), _pmul(d12, d12)) * tau
    sq12 = _pmul(d12, _padd(d11, d22)) * tau

    def shifted(s):
        a = -y11.copy()
        c = -y22.copy()
        a[:, 0] += s
        c[:, 0] += s
        det = _padd(_pmul(a, c), -_pmul(y12, y12))
        # adj(sI - Y) stored entries: (s - y22, s - y11, y12)
        return det, (c, a, y12)

    def numer(cmat, sign, adj):
        m11 = _padd(cmat[:, 0:1] * one, sign * sq11)
        m22 = _padd(cmat[:, 1:2] * one, sign * sq22)
        m12 = _padd(cmat[:, 2:3] * one, sign * sq12)
        return _padd(_pmul(m11, adj[0]), _pmul(m22, adj[1]), 2 * _pmul(m12, adj[2]))

    det_u, adj_u = shifted(part.upper)
    det_l, adj_l = shifted(part.lower)
    n_u = numer(part.c_u[idx], 1.0, adj_u)
    n_l = numer(part.c_l[idx], -1.0, adj_l)
    q = _pmul(det_u, det_l)
    p = _padd(_pmul(n_u, det_l), _pmul(n_l, det_u), -part.offset[idx][:, None] * q)
    return p, q


def rational_batch(model: HyperModel, edge: PolynomialEdge, idx):
    """Untrimmed ascending coefficients of p and q for all elements ``idx``."""
    coef = edge.power_coefficients()
    p, q = _part_rational(model.parts["R"], coef.real, model.tau, idx)
    if "I" in model.parts:
        pi, qi = _part_rational(model.parts["I"], coef.imag, model.tau, idx)
        p, q = _padd(_pmul(p, qi), _pmul(pi, q)), _pmul(q, qi)
    return p, q


def trim(coef, rtol=TRIM_RTOL):
    """Drop trailing coefficients below ``rtol`` times the largest magnitude."""
    coef = np.asarray(coef, dtype=float)
    scale = np.max(np.abs(coef)) if coef.size else 0.0
    if scale == 0.0:
        return coef[:1] * 0.0
    keep = np.flatnonzero(np.abs(coef) > rtol * scale)
    return coef[: keep[-1] + 1]


def build_rational(model: HyperModel, i: int, edge: PolynomialEdge):
    """(p, q) as trimmed polynomials with p / q the element model along the edge."""
    p, q = rational_batch(model, edge, np.array([i]))
    qt = trim(q[0])
    probe = Polynomial(qt)(np.linspace(0.0, 1.0, 33))
    if np.any(probe <= 0):
        raise GraphError("denominator vanishes on [0, 1]: asymptotes violated along the edge")
    return Polynomial(trim(p[0])), Polynomial(qt)


def _newton(coef, x, steps=3):
    dcoef = coef[1:] * np.arange(1, len(coef))
    for _ in range(steps):
        f = np.polynomial.polynomial.polyval(x, coef)
        df = np.polynomial.polynomial.polyval(x, dcoef)
        ok = df != 0
        x = np.where(ok, x - np.where(ok, f / np.where(ok, df, 1.0), 0.0), x)
    return x


def _roots_batch(coefs, imag_tol):
    """Real roots in (0, 1) of every row; returns (row index, root) arrays."""
    rows_out, roots_out = [], []
    scale = np.max(np.abs(coefs), axis=1)
    mask = np.abs(coefs) > TRIM_RTOL * scale[:, None]
    deg = np.where(mask.any(axis=1), coefs.shape[1] - 1 - np.argmax(mask[:, ::-1], axis=1), 0)
    for d in np.unique(deg):
        if d < 1:
            continue
        rows = np.flatnonzero(deg == d)
        c = coefs[rows, : d + 1]
        comp = np.zeros((len(rows), d, d))
        if d > 1:
            comp[:, np.arange(1, d), np.arange(d - 1)] = 1.0
        comp[:, :, -1] = -c[:, :-1] / c[:, -1:]
        ev = np.linalg.eigvals(comp)
        keep = (np.abs(ev.imag) < imag_tol * (1 + np.abs(ev.real))) & (ev.real > 0) & (ev.real < 1)
        r, j = np.nonzero(keep)
        x = ev.real[r, j]
        for g in np.unique(r):
            sel = r == g
            xs = _newton(c[g], x[sel])
            rows_out.append(np.full(sel.sum(), rows[g]))
            roots_out.append(xs)
    if not rows_out:
        return np.zeros(0, dtype=int), np.zeros(0)
    return np.concatenate(rows_out), np.concatenate(roots_out)


def poly_real_roots_01(poly, imag_tol=ROOT_IMAG_TOL):
    """Real roots in (0, 1), Newton-polished and deduplicated, ascending."""
    coef = trim(poly.coef if isinstance(poly, Polynomial) else poly)
    if not np.any(coef):
        raise ValueError("zero polynomial has no isolated roots")
    _, roots = _roots_batch(coef[None, :], imag_tol)
    roots = np.sort(roots[(roots > 0) & (roots < 1)])
    if roots.size:
        roots = roots[np.concatenate([[True], np.diff(roots) > 1e-10])]
    return roots.tolist()


def stationarity_numerator(p, q, gamma):
    """Row-wise q p' - q' p + gamma (1 - 2 delta) q^2, the numerator of j'."""
    num = _padd(_pmul(q, _pder(p)), -_pmul(_pder(q), p))
    if gamma:
        lin = np.tile(np.array([[1.0, -2.0]]) * gamma, (q.shape[0], 1))
        num = _padd(num, _pmul(lin, _pmul(q, q)))
    return num


def solve_polynomial_edges(model: HyperModel, edge: PolynomialEdge, gamma=0.0, idx=None):
    idx = np.arange(model.n_elements) if idx is None else np.asarray(idx)
    n = len(idx)
    p, q = rational_batch(model, edge, idx)
    rows, roots = _roots_batch(stationarity_numerator(p, q, gamma), EDGE_ROOT_IMAG_TOL)
    inside = (roots > 0) & (roots < 1)
    rows, roots = rows[inside], roots[inside]
    cand_i = np.concatenate([np.arange(n), np.arange(n), rows])
    cand_d = np.concatenate([np.zeros(n), np.ones(n), roots])
    vals = _edge_values(model, edge, idx[cand_i], cand_d, gamma)
    return _select(cand_i, cand_d, vals, n)


def solve_polynomial_edge(model: HyperModel, i: int, edge: PolynomialEdge, gamma=0.0) -> EdgeSolveResult:
    build_rational(model, i, edge)  # validates the denominator
    p, q = rational_batch(model, edge, np.array([i]))
    num = stationarity_numerator(p, q, gamma)[0]
    roots = poly_real_roots_01(num, EDGE_ROOT_IMAG_TOL) if np.any(trim(num)) else []
    cand = np.array([0.0, *roots, 1.0])
    vals = _edge_values(model, edge, np.full(len(cand), i), cand, gamma)
    alpha, value = _select(np.zeros(len(cand), dtype=int), cand, vals, 1)
    return EdgeSolveResult(float(alpha[0]), float(value[0]), cand.tolist())


# ------------------------------------------------------------------ elements

def solve_edges(model: HyperModel, edge, gamma=0.0, idx=None):
    if isinstance(edge, RotationalEdge):
        return solve_rotational_edges(model, edge, gamma, idx)
    if isinstance(edge, PolynomialEdge):
        return solve_polynomial_edges(model, edge, gamma, idx)
    raise TypeError(f"unsupported edge type {type(edge).__name__}")


def solve_all(model: HyperModel, graph: MaterialGraph, gamma=0.0, idx=None):
    """Best (edge, alpha, value) per element over all edges; ties keep the lower edge index."""
    idx = np.arange(model.n_elements) if idx is None else np.asarray(idx)
    alphas = np.empty((graph.n_edges, len(idx)))
    values = np.empty((graph.n_edges, len(idx)))
    for l, edge in enumerate(graph.edges):
        alphas[l], values[l] = solve_edges(model, edge, gamma, idx)
    best = np.argmin(values, axis=0)
    cols = np.arange(len(idx))
    return best, alphas[best, cols], values[best, cols]


def solve_element(model: HyperModel, i: int, graph: MaterialGraph, gamma=0.0):
    l, a, v = solve_all(model, graph, gamma, np.array([i]))
    return int(l[0]), float(a[0]), float(v[0])


def node_values(model: HyperModel, graph: MaterialGraph, idx=None):
    """Model value of every node on every element, shape (len(idx), n_nodes)."""
    idx = np.arange(model.n_elements) if idx is None else np.asarray(idx)
    nodes = graph.node_array()
    return eval_elements(model, nodes[None, :, :], idx[:, None])


def node_enumeration_all(model: HyperModel, graph: MaterialGraph, idx=None):
    vals = node_values(model, graph, idx)
    best = np.argmin(vals, axis=1)
    return best, vals[np.arange(len(best)), best]


def node_enumeration(model: HyperModel, i: int, graph: MaterialGraph):
    best, val = node_enumeration_all(model, graph, np.array([i]))
    return graph.nodes[int(best[0])].id, float(val[0])


def estimate_gamma_max_all(model: HyperModel, graph: MaterialGraph, idx=None):
    """Half of a curvature bound of the model along every edge, per element."""
    idx = np.arange(model.n_elements) if idx is None else np.asarray(idx)
    d = np.linspace(0.0, 1.0, GAMMA_GRID)
    h = d[1] - d[0]
    sigma = np.zeros(len(idx))
    for edge in graph.edges:
        vals = eval_elements(model, edge.evaluate(d)[None, :, :], idx[:, None])
        second = np.abs(vals[:, 2:] - 2 * vals[:, 1:-1] + vals[:, :-2]) / h ** 2
        sigma = np.maximum(sigma, 2.0 * second.max(axis=1))
    return sigma / 2.0


def estimate_gamma_max(model: HyperModel, i: int, graph: MaterialGraph) -> float:
    return float(estimate_gamma_max_all(model, graph, np.array([i]))[0])


def solve_subproblem(model: HyperModel, graph: MaterialGraph, gamma=0.0, discrete=False) -> DesignState:
    """Globally optimal design of the separable model problem."""
    if discrete:
        best, _ = node_enumeration_all(model, graph)
        loc = graph.node_locations()
        edge = np.array([loc[b][0] for b in best], dtype=int)
        alpha = np.array([loc[b][1] for b in best])
        return DesignState.from_coordinates(graph, edge, alpha)
    edge, alpha, _ = solve_all(model, graph, gamma)
    return DesignState.from_coordinates(graph, edge, alpha)
