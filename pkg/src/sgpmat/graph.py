"""Admissible material sets described by a graph of tensors.

Nodes carry fixed material tensors, edges carry a smooth parametrization
``psi(delta)``, ``delta in [0, 1]``, connecting their endpoint tensors.
Edge indices are 0-based throughout the package.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import ComplexSymTensor2, sym_norm2, sym_rotate

INTERPOLATION_TOL = 1e-9


class GraphError(ValueError):
    pass


@dataclass(frozen=True)
class MaterialNode:
    id: str
    tensor: ComplexSymTensor2


@dataclass(frozen=True)
class RotationalEdge:
    """psi(delta) = R(offset + span*delta) B_ref R(offset + span*delta)^T.

    The default ``span = pi`` with ``offset = 0`` is a closed edge whose
    endpoints coincide.
    """

    start: str
    end: str
    reference: ComplexSymTensor2
    offset: float = 0.0
    span: float = np.pi

    kind = "rotational"

    def evaluate(self, delta):
        delta = np.asarray(delta, dtype=float)
        return sym_rotate(self.reference.array, self.offset + self.span * delta)

    def derivative(self, delta):
        delta = np.asarray(delta, dtype=float)
        theta = self.offset + self.span * delta
        b = self.reference.array
        c2, s2 = np.cos(2 * theta), np.sin(2 * theta)
        diff = b[0] - b[1]
        d11 = -s2 * diff - 2 * c2 * b[2]
        d12 = c2 * diff - 2 * s2 * b[2]
        return self.span * np.stack([d11, -d11, d12], axis=-1)

    @property
    def is_closed_form(self) -> bool:
        """True when the analytic global solution applies (real diagonal reference)."""
        b = self.reference
        return (abs(b.b12) == 0 and b.b11.imag == 0 and b.b22.imag == 0)


@dataclass(frozen=True)
class PolynomialEdge:
    """psi(delta) = B1 (1-delta) + B2 delta + delta (1-delta) sum_i A_i delta^i."""

    start: str
    end: str
    b_start: ComplexSymTensor2
    b_end: ComplexSymTensor2
    coefficients: tuple = ()

    kind = "polynomial"

    @property
    def order(self) -> int:
        return len(self.coefficients) + 1

    def power_coefficients(self) -> np.ndarray:
        """Ascending power-basis coefficients, shape (order+1, 3)."""
        k = len(self.coefficients)
        out = np.zeros((k + 2, 3), dtype=complex)
        out[0] += self.b_start.array
        out[1] += self.b_end.array - self.b_start.array
        for i, a in enumerate(self.coefficients):
            out[i + 1] += a.array
            out[i + 2] -= a.array
        return out

    def evaluate(self, delta):
        delta = np.asarray(delta, dtype=float)
        coef = self.power_coefficients()
        res = np.zeros(delta.shape + (3,), dtype=complex)
        for c in coef[::-1]:
            res = res * delta[..., None] + c
        return res

    def derivative(self, delta):
        delta = np.asarray(delta, dtype=float)
        coef = self.power_coefficients()
        dcoef = coef[1:] * np.arange(1, len(coef))[:, None]
        res = np.zeros(delta.shape + (3,), dtype=complex)
        for c in dcoef[::-1]:
            res = res * delta[..., None] + c
        return res


@dataclass
class MaterialGraph:
    nodes: list
    edges: list
    _index: dict = field(default_factory=dict, repr=False)

    def node_tensor(self, node_id) -> ComplexSymTensor2:
        return self.nodes[self._index[node_id]].tensor

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def node_array(self) -> np.ndarray:
        return np.array([n.tensor.array for n in self.nodes])

    def node_locations(self):
        """(edge, alpha) pair for every node, taken from the first edge touching it."""
        loc = []
        for node in self.nodes:
            for l, e in enumerate(self.edges):
                if e.start == node.id:
                    loc.append((l, 0.0))
                    break
                if e.end == node.id:
                    loc.append((l, 1.0))
                    break
        return loc

    def sample(self, n: int = 65) -> np.ndarray:
        """Tensors sampled along every edge, shape (n_edges * n, 3)."""
        d = np.linspace(0.0, 1.0, n)
        return np.concatenate([e.evaluate(d) for e in self.edges])

    @property
    def is_real(self) -> bool:
        return bool(np.all(self.sample().imag == 0.0))


def build_graph(nodes, edges) -> MaterialGraph:
    """Validate and assemble a material graph."""
    if not edges:
        raise GraphError("graph needs at least one edge")
    index = {}
    for i, n in enumerate(nodes):
        if n.id in index:
            raise GraphError(f"duplicate node id {n.id!r}")
        index[n.id] = i
    used = set()
    for l, e in enumerate(edges):
        for end, delta in ((e.start, 0.0), (e.end, 1.0)):
            if end not in index:
                raise GraphError(f"edge {l} references unknown node {end!r}")
            used.add(end)
            mismatch = np.sqrt(sym_norm2(e.evaluate(delta) - nodes[index[end]].tensor.array))
            if mismatch > INTERPOLATION_TOL:
                raise GraphError(
                    f"edge {l}: psi({delta:g}) differs from node {end!r} by {mismatch:.3e}")
    orphans = [n.id for n in nodes if n.id not in used]
    if orphans:
        raise GraphError(f"nodes not on any edge: {orphans}")
    return MaterialGraph(list(nodes), list(edges), index)


def eval_param(graph: MaterialGraph, l: int, delta) -> np.ndarray:
    if not 0 <= l < graph.n_edges:
        raise IndexError(f"edge index {l} out of range [0, {graph.n_edges})")
    d = np.asarray(delta, dtype=float)
    if np.any((d < 0) | (d > 1)) or np.any(~np.isfinite(d)):
        raise ValueError("edge coordinate must lie in [0, 1]")
    return graph.edges[l].evaluate(d)


def rotational_graph(reference: ComplexSymTensor2, n_orientations: int | None = None) -> MaterialGraph:
    """Orientations of ``reference``: one closed edge, or ``n`` nodes at angles pi*l/n."""
    if n_orientations is None:
        node = MaterialNode("r0", reference)
        return build_graph([node], [RotationalEdge("r0", "r0", reference)])
    n = int(n_orientations)
    if n < 1:
        raise GraphError("need at least one orientation")
    span = np.pi / n
    nodes = [MaterialNode(f"r{l}", ComplexSymTensor2.from_array(sym_rotate(reference.array, l * span)))
             for l in range(n)]
    edges = [RotationalEdge(f"r{l}", f"r{(l + 1) % n}", reference, offset=l * span, span=span)
             for l in range(n)]
    return build_graph(nodes, edges)


def cyclic_linear_graph(tensors, ids=None) -> MaterialGraph:
    """Nodes joined in a cycle by linear edges (a single edge for two nodes)."""
    ids = ids or [f"m{i + 1}" for i in range(len(tensors))]
    nodes = [MaterialNode(i, t) for i, t in zip(ids, tensors)]
    n = len(nodes)
    pairs = [(0, 1)] if n == 2 else [(i, (i + 1) % n) for i in range(n)]
    edges = [PolynomialEdge(nodes[a].id, nodes[b].id, nodes[a].tensor, nodes[b].tensor) for a, b in pairs]
    return build_graph(nodes, edges)


@dataclass
class DesignState:
    """Per design element: edge index, edge coordinate and the resulting tensor."""

    edge: np.ndarray
    alpha: np.ndarray
    tensors: np.ndarray

    @classmethod
    def from_coordinates(cls, graph: MaterialGraph, edge, alpha) -> "DesignState":
        edge = np.asarray(edge, dtype=int).copy()
        alpha = np.asarray(alpha, dtype=float).copy()
        if edge.shape != alpha.shape:
            raise ValueError("edge and alpha must have equal shape")
        if np.any((alpha < 0) | (alpha > 1)):
            raise ValueError("alpha must lie in [0, 1]")
        if np.any((edge < 0) | (edge >= graph.n_edges)):
            raise ValueError("edge index out of range")
        tensors = np.empty(edge.shape + (3,), dtype=complex)
        for l in np.unique(edge):
            mask = edge == l
            tensors[mask] = graph.edges[l].evaluate(alpha[mask])
        return cls(edge, alpha, tensors)

    @classmethod
    def uniform(cls, graph: MaterialGraph, n_elements: int, edge: int = 0, alpha: float = 0.0):
        return cls.from_coordinates(graph, np.full(n_elements, edge), np.full(n_elements, alpha))

    def __len__(self):
        return len(self.alpha)

    def copy(self) -> "DesignState":
        return DesignState(self.edge.copy(), self.alpha.copy(), self.tensors.copy())

    def distance2(self, other: "DesignState") -> float:
        """Squared extended Frobenius distance between two designs."""
        return float(np.sum(sym_norm2(self.tensors - other.tensors)))


def grayness_element(alpha):
    alpha = np.asarray(alpha, dtype=float)
    return alpha * (1.0 - alpha)


def grayness_total(state: DesignState) -> float:
    return float(np.sum(grayness_element(state.alpha)))
