import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.polynomial import Polynomial

from oracles import (edge_objective, grid_golden_min, polynomial_instances, random_polynomial_edge,
                     rotational_instances)
from sgpmat.graph import GraphError, MaterialNode, PolynomialEdge, RotationalEdge, build_graph, \
    cyclic_linear_graph, rotational_graph
from sgpmat.hyper import AsymptoteError, AsymptotePair, build_model, eval_element, eval_elements
from sgpmat.objectives import DesignGradient
from sgpmat.subproblem import (build_rational, estimate_gamma_max, estimate_gamma_max_all, node_enumeration,
                               poly_real_roots_01, rational_batch, rotational_alpha, rotational_coefficients,
                               solve_all, solve_element, solve_polynomial_edge, solve_polynomial_edges,
                               solve_rotational_edge, solve_rotational_edges, solve_subproblem, trim)
from sgpmat.tensor import ComplexSymTensor2 as T


# ----------------------------------------------------------- rotational

def test_rotational_alpha_branches():
    assert rotational_alpha(0.0, 1.0) == pytest.approx(0.75)
    assert rotational_alpha(0.0, -1.0) == pytest.approx(0.25)
    for a, b in [(1.0, 0.3), (-1.0, 0.3), (2.0, -1.0), (-0.5, -2.0)]:
        x = rotational_alpha(a, b)
        # stationary with positive curvature of the integrated model
        assert a * np.sin(2 * np.pi * x) + b * np.cos(2 * np.pi * x) == pytest.approx(0.0, abs=1e-12)
        assert a * np.cos(2 * np.pi * x) - b * np.sin(2 * np.pi * x) > 0


def test_rotational_isotropic_is_flat(rng):
    _, edge, model = rotational_instances(rng, 5, reference=T.isotropic(0.7))
    res = solve_rotational_edge(model, 2, edge)
    vals = eval_elements(model, edge.evaluate(np.linspace(0, 1, 11)), 2)
    assert np.ptp(vals) < 1e-12
    assert res.value == pytest.approx(vals[0], abs=1e-12)


@pytest.mark.parametrize("gamma", [0.0, 0.05, 1.0])
def test_rotational_matches_oracle(rng, gamma):
    _, edge, model = rotational_instances(rng, 200)
    alpha, value = solve_rotational_edges(model, edge, gamma)
    idx = np.arange(200)
    ref, _ = grid_golden_min(edge_objective(model, edge, idx, gamma), 200)
    assert np.max(np.abs(value - ref)) < 1e-9
    assert np.all((alpha >= 0) & (alpha <= 1))


def test_rotational_subedges_match_oracle(rng):
    g = rotational_graph(T.diag(1.0, 0.25), 6)
    asym = AsymptotePair(0.0, 100.0).for_graph(g)
    n = 100
    centers = g.edges[0].evaluate(rng.uniform(0, 1, n))
    model = build_model(centers, 0.0, DesignGradient(rng.normal(size=(n, 3)), np.zeros((n, 3))), asym, 0.5, g)
    for edge in g.edges[:3]:
        _, value = solve_rotational_edges(model, edge, 0.0)
        ref, _ = grid_golden_min(edge_objective(model, edge, np.arange(n), 0.0), n)
        assert np.max(np.abs(value - ref)) < 1e-9


def test_rotational_requires_diagonal_real_reference(rng):
    edge = RotationalEdge("r", "r", T(1.0, 0.5, 0.1))
    g = build_graph([MaterialNode("r", edge.reference)], [edge])
    model = build_model(edge.evaluate(np.array([0.2])), 0.0, DesignGradient.zeros(1),
                        AsymptotePair(0.0, 10.0).for_graph(g), 1.0)
    with pytest.raises(GraphError):
        rotational_coefficients(model, edge)


# ----------------------------------------------------------- polynomials

def test_poly_roots_examples(rng):
    assert poly_real_roots_01(Polynomial([-0.25, 0, 1])) == pytest.approx([0.5])
    p = Polynomial.fromroots([0.2, 0.7, 1.5])
    assert poly_real_roots_01(p) == pytest.approx([0.2, 0.7])
    with pytest.raises(ValueError):
        poly_real_roots_01(Polynomial([0.0]))
    planted = np.sort(rng.uniform(0.05, 0.95, 5))
    others = list(rng.uniform(1.5, 3.0, 6)) + [complex(0.5, 0.7), complex(0.5, -0.7),
                                                complex(-0.3, 0.2), complex(-0.3, -0.2),
                                                complex(2.0, 1.0), complex(2.0, -1.0)]
    p = Polynomial(np.real(np.polynomial.polynomial.polyfromroots(list(planted) + others)))
    assert p.degree() == 17
    assert np.allclose(poly_real_roots_01(p), planted, atol=1e-8)


def test_trim():
    assert len(trim([1.0, 2.0, 1e-20])) == 2
    assert np.array_equal(trim([0.0, 0.0]), [0.0])


def test_rational_real_isotropic_example():
    edge = PolynomialEdge("a", "b", T.isotropic(0.5), T.isotropic(1.5))
    g = build_graph([MaterialNode("a", edge.b_start), MaterialNode("b", edge.b_end)], [edge])
    asym = AsymptotePair(-1.0, 2.0).for_graph(g)
    grad = DesignGradient(np.array([[0.3, -0.2, 0.1]]), np.zeros((1, 3)))
    model = build_model(edge.evaluate(np.array([0.3])), 0.0, grad, asym, 0.8, g)
    p, q = build_rational(model, 0, edge)
    # imaginary part inactive for a real model: only the real factor contributes
    assert q.degree() == 4 and p.degree() <= 5
    for d in (0.0, 0.5, 1.0):
        assert p(d) / q(d) == pytest.approx(eval_element(model, 0, edge.evaluate(d)), abs=1e-10)


def test_rational_empty_model():
    edge = PolynomialEdge("a", "b", T.isotropic(0.5), T.isotropic(1.5))
    model = build_model(np.array([[1.0, 1.0, 0.0]]), 0.0, DesignGradient.zeros(1), AsymptotePair(-1.0, 2.0, imag_active=False), 0.0)
    p, _ = build_rational(model, 0, edge)
    assert np.all(p.coef == 0)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_rational_cross_evaluation_and_degrees(rng, k):
    edge = random_polynomial_edge(rng, k)
    _, model = polynomial_instances(rng, edge, 3)
    d = np.linspace(0, 1, 50)
    p, q = build_rational(model, 1, edge)
    ref = eval_elements(model, edge.evaluate(d), 1)
    assert np.allclose(p(d) / q(d), ref, rtol=1e-9, atol=1e-9 * np.max(np.abs(ref)))
    # active imaginary part doubles the bounds: per part deg q <= 4k, deg p <= 4k + 2k... total 8k / 9k
    assert q.degree() <= 8 * k and p.degree() <= 9 * k


def test_violated_asymptotes_rejected():
    edge = PolynomialEdge("a", "b", T.isotropic(0.5), T.isotropic(1.5))
    g = build_graph([MaterialNode("a", edge.b_start), MaterialNode("b", edge.b_end)], [edge])
    with pytest.raises(AsymptoteError):
        AsymptotePair(-1.0, 1.2).validate(g)


@pytest.mark.parametrize("k", [1, 2, 3])
@pytest.mark.parametrize("gamma", [0.0, 1e-3, 1.0])
@pytest.mark.parametrize("complex_valued", [False, True])
def test_polynomial_matches_oracle(rng, k, gamma, complex_valued):
    for _ in range(4):
        edge = random_polynomial_edge(rng, k, complex_valued)
        _, model = polynomial_instances(rng, edge, 25)
        _, value = solve_polynomial_edges(model, edge, gamma)
        ref, _ = grid_golden_min(edge_objective(model, edge, np.arange(25), gamma), 25)
        assert np.max(np.abs(value - ref)) < 1e-8


def test_single_and_batched_polynomial_agree(rng):
    edge = random_polynomial_edge(rng, 2)
    _, model = polynomial_instances(rng, edge, 6)
    alpha, value = solve_polynomial_edges(model, edge, 1e-3)
    for i in range(6):
        res = solve_polynomial_edge(model, i, edge, 1e-3)
        assert res.value == pytest.approx(value[i], abs=1e-12)
        assert 0.0 in res.candidates and 1.0 in res.candidates


def test_linear_isotropic_edge_tau_zero(rng):
    edge = PolynomialEdge("a", "b", T.isotropic(1.0), T.isotropic(0.25))
    g = build_graph([MaterialNode("a", edge.b_start), MaterialNode("b", edge.b_end)], [edge])
    asym = AsymptotePair.from_graph(g).for_graph(g)
    n = 50
    model = build_model(edge.evaluate(rng.uniform(0, 1, n)), 0.0,
                        DesignGradient(rng.normal(size=(n, 3)), np.zeros((n, 3))), asym, 0.0, g)
    _, value = solve_polynomial_edges(model, edge)
    ref, _ = grid_golden_min(edge_objective(model, edge, np.arange(n), 0.0), n)
    assert np.max(np.abs(value - ref)) < 1e-9


# ----------------------------------------------------------- elements

def tomography_graph():
    return cyclic_linear_graph([T.isotropic(1.0), T.isotropic(0.25), T.isotropic((1 + 2j) ** -2)])


def tomography_model(rng, n, tau=1.0):
    g = tomography_graph()
    asym = AsymptotePair.from_graph(g)
    edge = rng.integers(0, 3, n)
    centers = np.array([g.edges[l].evaluate(a) for l, a in zip(edge, rng.uniform(0, 1, n))])
    grad = DesignGradient(rng.normal(size=(n, 3)), rng.normal(size=(n, 3)))
    return g, build_model(centers, 0.0, grad, asym, tau, g)


def test_solve_element_matches_exhaustive_oracle(rng):
    g, model = tomography_model(rng, 40)
    best, alpha, value = solve_all(model, g, 1e-3)
    per_edge = np.stack([grid_golden_min(edge_objective(model, e, np.arange(40), 1e-3), 40)[0] for e in g.edges])
    assert np.max(np.abs(value - per_edge.min(axis=0))) < 1e-8
    l, a, v = solve_element(model, 7, g, 1e-3)
    assert (l, a, v) == (best[7], alpha[7], value[7])


def test_single_edge_graph_equals_edge_solve(rng):
    edge = random_polynomial_edge(rng, 2)
    g, model = polynomial_instances(rng, edge, 5)
    _, alpha, value = solve_all(model, g)
    a2, v2 = solve_polynomial_edges(model, edge)
    assert np.array_equal(alpha, a2) and np.array_equal(value, v2)


def test_duplicate_edges_first_index_wins(rng):
    edge = random_polynomial_edge(rng, 1, complex_valued=False)
    nodes = [MaterialNode("a", edge.b_start), MaterialNode("b", edge.b_end)]
    g = build_graph(nodes, [edge, edge])
    _, model = polynomial_instances(rng, edge, 8)
    best, _, _ = solve_all(model, g)
    assert np.all(best == 0)


def test_gamma_monotonicity(rng):
    g, model = tomography_model(rng, 30)
    prev = None
    for gamma in (0.0, 1e-3, 1e-2, 0.1, 1.0, 10.0):
        _, alpha, _ = solve_all(model, g, gamma)
        gray = alpha * (1 - alpha)
        if prev is not None:
            assert np.all(gray <= prev + 1e-9)
        prev = gray


def test_gamma_max_examples(rng):
    g = tomography_graph()
    model = build_model(np.tile([1.0, 1.0, 0.0], (2, 1)).astype(complex), 0.0, DesignGradient.zeros(2),
                        AsymptotePair.from_graph(g), 0.0, g)
    assert estimate_gamma_max(model, 0, g) == pytest.approx(0.0, abs=1e-9)
    # pure proximal model along a real linear edge: j(d) = tau * phi(d) has curvature c
    edge = PolynomialEdge("a", "b", T.isotropic(1.0), T.isotropic(0.5))
    lin = build_graph([MaterialNode("a", edge.b_start), MaterialNode("b", edge.b_end)], [edge])
    asym = AsymptotePair(-50.0, 50.0).for_graph(lin)
    model = build_model(np.array([[0.75, 0.75, 0.0]]), 0.0, DesignGradient.zeros(1), asym, 3.0, lin)
    d = np.linspace(0, 1, 2001)
    vals = eval_elements(model, edge.evaluate(d), 0)
    c = np.max(np.abs(np.diff(vals, 2))) / (d[1] - d[0]) ** 2
    assert estimate_gamma_max(model, 0, lin) >= c / 2


def test_double_gamma_max_lands_on_nodes(rng):
    for _ in range(5):
        g, model = tomography_model(rng, 40, tau=rng.uniform(0.1, 3))
        gamma = 2 * float(np.max(estimate_gamma_max_all(model, g)))
        state = solve_subproblem(model, g, gamma)
        assert np.all((state.alpha == 0) | (state.alpha == 1))


def test_node_enumeration(rng):
    single = rotational_graph(T.diag(1.0, 0.25))
    model = build_model(np.tile([1.0, 0.25, 0.0], (1, 1)).astype(complex), 0.0,
                        DesignGradient(rng.normal(size=(1, 3)), np.zeros((1, 3))),
                        AsymptotePair(0.0, 100.0).for_graph(single), 1.0)
    assert node_enumeration(model, 0, single)[0] == "r0"
    g4 = rotational_graph(T.diag(1.0, 0.25), 4)
    n = 30
    centers = g4.edges[0].evaluate(rng.uniform(0, 1, n))
    model = build_model(centers, 0.0, DesignGradient(rng.normal(size=(n, 3)), np.zeros((n, 3))),
                        AsymptotePair(0.0, 100.0).for_graph(g4), 0.5, g4)
    gamma = 2 * float(np.max(estimate_gamma_max_all(model, g4)))
    cont = solve_subproblem(model, g4, gamma)
    disc = solve_subproblem(model, g4, discrete=True)
    assert np.allclose(cont.tensors, disc.tensors, atol=1e-12)
    flat = build_model(centers, 0.0, DesignGradient.zeros(n), AsymptotePair(0.0, 100.0).for_graph(g4), 0.0)
    assert node_enumeration(flat, 3, g4)[0] == "r0"


@given(st.integers(0, 2 ** 31))
def test_solver_never_worse_than_nodes(seed):
    rng = np.random.default_rng(seed)
    g, model = tomography_model(rng, 8, tau=rng.uniform(0, 2))
    _, _, value = solve_all(model, g)
    nodes = eval_elements(model, g.node_array()[None], np.arange(8)[:, None])
    assert np.all(value <= nodes.min(axis=1) + 1e-12)
    assert np.all(value <= 1e-12)  # the expansion point itself lies on the graph
