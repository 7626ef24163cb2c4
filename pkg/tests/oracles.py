"""Independent brute-force references shared by the test modules."""
import numpy as np

from sgpmat.graph import PolynomialEdge, RotationalEdge, build_graph, MaterialNode
from sgpmat.hyper import AsymptotePair, build_model, eval_elements
from sgpmat.objectives import DesignGradient
from sgpmat.tensor import ComplexSymTensor2 as T

GOLDEN = (np.sqrt(5) - 1) / 2


def edge_objective(model, edge, idx, gamma):
    """Vectorized j(delta) for elements ``idx`` (n,) at coordinates (n, m)."""
    def f(delta):
        return eval_elements(model, edge.evaluate(delta), idx[:, None]) + gamma * delta * (1 - delta)
    return f


def grid_golden_min(f, n, grid=4096, n_local=4, iters=50):
    """Minimum of f on [0, 1] by a uniform grid plus golden-section refinement.

    ``f`` maps an (n, m) array of coordinates to values; the best ``n_local``
    grid minima per row are refined inside their neighbouring grid cells.
    """
    d = np.linspace(0.0, 1.0, grid + 1)
    vals = f(np.broadcast_to(d, (n, grid + 1)))
    best = vals.min(axis=1)
    arg = d[np.argmin(vals, axis=1)]
    order = np.argsort(vals, axis=1)[:, :n_local]
    h = d[1] - d[0]
    lo = np.clip(d[order] - h, 0.0, 1.0)
    hi = np.clip(d[order] + h, 0.0, 1.0)
    x1 = hi - GOLDEN * (hi - lo)
    x2 = lo + GOLDEN * (hi - lo)
    f1, f2 = f(x1), f(x2)
    for _ in range(iters):
        left = f1 < f2
        hi = np.where(left, x2, hi)
        lo = np.where(left, lo, x1)
        x2n = np.where(left, x1, lo + GOLDEN * (hi - lo))
        x1n = np.where(left, hi - GOLDEN * (hi - lo), x2)
        x1, x2 = x1n, x2n
        f1, f2 = f(x1), f(x2)
    xs = np.concatenate([x1, x2], axis=1)
    fs = np.concatenate([f1, f2], axis=1)
    j = np.argmin(fs, axis=1)
    rows = np.arange(n)
    better = fs[rows, j] < best
    return np.where(better, fs[rows, j], best), np.where(better, xs[rows, j], arg)


def random_sym(rng, n, lo, hi):
    lam = rng.uniform(lo, hi, (n, 2))
    phi = rng.uniform(0, np.pi, n)
    c, s = np.cos(phi), np.sin(phi)
    return np.stack([lam[:, 0] * c * c + lam[:, 1] * s * s, lam[:, 0] * s * s + lam[:, 1] * c * c,
                     (lam[:, 0] - lam[:, 1]) * c * s], axis=-1)


def random_polynomial_edge(rng, k, complex_valued=True):
    """Random order-k edge whose real parts stay positive definite."""
    b = random_sym(rng, 2, 0.3, 2.0).astype(complex)
    if complex_valued:
        b = b + 1j * random_sym(rng, 2, -0.8, 0.8)
    coefs = []
    for _ in range(k - 1):
        a = 0.3 * rng.normal(size=3)
        if complex_valued:
            a = a + 0.3j * rng.normal(size=3)
        coefs.append(T.from_array(a))
    return PolynomialEdge("a", "b", T.from_array(b[0]), T.from_array(b[1]), tuple(coefs))


def polynomial_instances(rng, edge, n, tau_max=3.0):
    """Graph, asymptotes and an n-element model for one random edge."""
    graph = build_graph([MaterialNode("a", edge.b_start), MaterialNode("b", edge.b_end)], [edge])
    asym = AsymptotePair.from_graph(graph).for_graph(graph)
    centers = edge.evaluate(rng.uniform(0, 1, n))
    grad = DesignGradient(rng.normal(size=(n, 3)), rng.normal(size=(n, 3)))
    model = build_model(centers, 0.0, grad, asym, rng.uniform(0, tau_max), graph)
    return graph, model


def rotational_instances(rng, n, reference=None, tau_max=10.0):
    ref = reference or T.diag(1.0, rng.uniform(0.05, 0.9))
    edge = RotationalEdge("r", "r", ref)
    graph = build_graph([MaterialNode("r", ref)], [edge])
    asym = AsymptotePair(0.0, 100.0).for_graph(graph)
    centers = edge.evaluate(rng.uniform(0, 1, n))
    grad = DesignGradient(rng.normal(size=(n, 3)) * rng.uniform(0.01, 10, (n, 1)), np.zeros((n, 3)))
    model = build_model(centers, 0.0, grad, asym, rng.uniform(0, tau_max), graph)
    return graph, edge, model
