import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sgpmat.graph import cyclic_linear_graph, rotational_graph
from sgpmat.hyper import AsymptoteError, AsymptotePair, build_model, eval_element, eval_elements, eval_total
from sgpmat.objectives import DesignGradient
from sgpmat.tensor import ComplexSymTensor2 as T

ASYM = AsymptotePair(-1.0, 3.0, -2.0, 2.0)


def random_inside(rng, k, lo=-0.5, hi=2.5, ilo=-1.5, ihi=1.5):
    """Random complex symmetric tensors with real/imag eigenvalues inside the bounds."""
    def part(a, b):
        lam = rng.uniform(a, b, (k, 2))
        phi = rng.uniform(0, np.pi, k)
        c, s = np.cos(phi), np.sin(phi)
        return np.stack([lam[:, 0] * c * c + lam[:, 1] * s * s, lam[:, 0] * s * s + lam[:, 1] * c * c,
                         (lam[:, 0] - lam[:, 1]) * c * s], axis=-1)
    return part(lo, hi) + 1j * part(ilo, ihi)


def random_model(rng, k=6, tau=0.7, asym=ASYM):
    center = random_inside(rng, k)
    grad = DesignGradient(rng.normal(size=(k, 3)), rng.normal(size=(k, 3)))
    return build_model(center, 1.234, grad, asym, tau)


def symbolic_element(center, gr, gi, asym, tau, y):
    """Dense-matrix evaluation of the model contribution of one element."""
    def m(v):
        return np.array([[v[0], v[2]], [v[2], v[1]]])

    def part(c, g, lo, hi, yy):
        w, v = np.linalg.eigh(m(g))
        gp = v @ np.diag(np.maximum(w, 0)) @ v.T
        gm = v @ np.diag(np.minimum(w, 0)) @ v.T
        eye = np.eye(2)
        cu = (hi * eye - m(c)) @ gp @ (hi * eye - m(c))
        cl = (lo * eye - m(c)) @ gm @ (lo * eye - m(c))
        d = m(yy) - m(c)
        val = (np.trace((cu + tau * d @ d) @ np.linalg.inv(hi * eye - m(yy)))
               + np.trace((cl - tau * d @ d) @ np.linalg.inv(lo * eye - m(yy))))
        off = np.trace(gp @ (hi * eye - m(c))) + np.trace(gm @ (lo * eye - m(c)))
        return val - off
    out = part(center.real, gr, asym.l_real, asym.u_real, y.real)
    if asym.imag_active:
        out += part(center.imag, gi, asym.l_imag, asym.u_imag, y.imag)
    return out


def test_value_at_expansion_point(rng):
    model = random_model(rng)
    assert eval_total(model, model.center) == pytest.approx(1.234, rel=1e-12)
    assert np.allclose(eval_elements(model, model.center), 0.0, atol=1e-12)


def test_zero_gradient_tau_zero_is_constant(rng):
    k = 4
    model = build_model(random_inside(rng, k), 2.0, DesignGradient.zeros(k), ASYM, 0.0)
    assert eval_total(model, random_inside(rng, k)) == pytest.approx(2.0, abs=1e-14)


def test_proximal_terms_positive(rng):
    k = 4
    model = build_model(random_inside(rng, k), 0.0, DesignGradient.zeros(k), ASYM, 0.5)
    y = random_inside(rng, k)
    assert np.all(eval_elements(model, y) > 0)


def test_gradient_matches(rng):
    model = random_model(rng)
    h = 1e-6
    for i in range(model.n_elements):
        for e in range(3):
            for unit, g in ((1.0, model.gradient.real), (1j, model.gradient.imag)):
                yp = model.center[i].copy()
                ym = model.center[i].copy()
                yp[e] += h * unit
                ym[e] -= h * unit
                fd = (eval_element(model, i, yp) - eval_element(model, i, ym)) / (2 * h)
                pred = g[i, e] * (2.0 if e == 2 else 1.0)
                assert fd == pytest.approx(pred, rel=1e-6, abs=1e-8)


def test_matches_symbolic_evaluation(rng):
    for _ in range(20):
        model = random_model(rng, k=3, tau=rng.uniform(0, 5))
        y = random_inside(rng, 3)
        for i in range(3):
            ref = symbolic_element(model.center[i], model.gradient.real[i], model.gradient.imag[i],
                                   ASYM, model.tau, y[i])
            assert eval_element(model, i, y[i]) == pytest.approx(ref, rel=1e-12, abs=1e-12)


def test_separability(rng):
    model = random_model(rng)
    y = model.center.copy()
    y[2] = random_inside(rng, 1)[0]
    vals = eval_elements(model, y)
    assert np.count_nonzero(np.abs(vals) > 1e-14) == 1 and abs(vals[2]) > 0


@given(st.integers(0, 2 ** 31), st.floats(0.0, 1.0))
def test_convexity_on_segments(seed, t):
    rng = np.random.default_rng(seed)
    model = random_model(rng, k=3, tau=rng.uniform(0, 3))
    x, y = random_inside(rng, 3), random_inside(rng, 3)
    lhs = eval_elements(model, t * x + (1 - t) * y)
    rhs = t * eval_elements(model, x) + (1 - t) * eval_elements(model, y)
    assert np.all(lhs <= rhs + 1e-10 * (1 + np.abs(rhs)))


@given(st.integers(0, 2 ** 31))
def test_monotone_in_tau(seed):
    rng = np.random.default_rng(seed)
    model = random_model(rng, k=3, tau=0.1)
    y = random_inside(rng, 3)
    a = eval_elements(model, y)
    b = eval_elements(model.with_tau(2.0), y)
    assert np.all(b >= a - 1e-12)


def test_asymptote_errors(rng):
    model = random_model(rng)
    with pytest.raises(AsymptoteError):
        eval_element(model, 0, np.array([3.5, 1.0, 0.0]))
    g = cyclic_linear_graph([T.isotropic(1.0), T.isotropic(5.0)])
    with pytest.raises(AsymptoteError):
        AsymptotePair(0.0, 4.0).for_graph(g).validate(g)
    with pytest.raises(ValueError):
        build_model(model.center, 0.0, model.gradient, ASYM, -1.0)


def test_real_graph_deactivates_imaginary_part(rng):
    g = rotational_graph(T.diag(1.0, 0.25))
    asym = AsymptotePair(0.0, 100.0).for_graph(g)
    assert not asym.imag_active
    asym.validate(g)
    k = 3
    center = np.tile(T.diag(1.0, 0.25).array, (k, 1))
    grad = DesignGradient(rng.normal(size=(k, 3)), rng.normal(size=(k, 3)))
    m1 = build_model(center, 0.0, grad, asym, 1.0, g)
    m2 = build_model(center, 0.0, DesignGradient(grad.real, 0 * grad.imag), asym, 1.0, g)
    y = g.sample(9)[:k]
    assert np.array_equal(eval_elements(m1, y), eval_elements(m2, y))
    tom = cyclic_linear_graph([T.isotropic(1.0), T.isotropic(0.25), T.isotropic((1 + 2j) ** -2)])
    auto = AsymptotePair.from_graph(tom)
    assert auto.imag_active
    auto.validate(tom)
