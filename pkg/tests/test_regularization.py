import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sgpmat.mesh import generate_structured_mesh
from sgpmat.regularization import build_filter_matrix, filter_from_points, j_reg, j_reg_gradient

W = np.array([1.0, 1.0, 2.0])


@pytest.fixture(scope="module")
def filt():
    mesh = generate_structured_mesh(h=0.1, h_pml=0.5)
    return build_filter_matrix(mesh, 0.25)


def random_state(k, rng):
    return rng.normal(size=(k, 3)) + 1j * rng.normal(size=(k, 3))


def test_single_element_and_tiny_radius():
    f = filter_from_points([[0.0, 0.0]], [1.0], 0.1)
    assert f.m.nnz == 0
    with pytest.warns(RuntimeWarning, match="below the centroid spacing"):
        f = filter_from_points([[0.0, 0.0], [1.0, 0.0]], [1.0, 1.0], 0.5)
    assert np.allclose(f.s.toarray(), np.eye(2)) and f.m.nnz == 0
    with pytest.raises(ValueError):
        filter_from_points([[0.0, 0.0]], [1.0], 0.0)


def test_two_element_hand_case():
    area = np.array([0.5, 0.5])
    f = filter_from_points([[0.0, 0.0], [0.1, 0.0]], area, 1e12)
    s = np.full((2, 2), 0.5)
    assert np.allclose(f.s.toarray(), s, rtol=1e-9)
    ims = np.eye(2) - s
    assert np.allclose(f.m.toarray(), ims.T @ np.diag(area) @ ims, atol=1e-9)
    b = np.array([[1.0, 2.0, 0.5j], [0.2, 1.0 + 1j, -0.3]])
    diff = b[0] - b[1]
    expected = 0.5 * 0.5 * np.sum(W * np.abs(diff) ** 2)  # sum_i area_i |b_i - mean|^2
    assert j_reg(b, f) == pytest.approx(expected, rel=1e-9)


def test_properties(filt, rng):
    m = filt.m.toarray()
    assert np.allclose(m, m.T)
    assert np.linalg.eigvalsh(m).min() > -1e-12
    assert np.allclose(np.asarray(filt.s.sum(axis=1)).ravel(), 1.0)
    k = m.shape[0]
    uniform = np.tile([1.0 + 0.5j, 0.3, 0.2j], (k, 1))
    assert j_reg(uniform, filt) == pytest.approx(0.0, abs=1e-12)
    g = j_reg_gradient(uniform, filt)
    assert np.allclose(g.real, 0, atol=1e-12) and np.allclose(g.imag, 0, atol=1e-12)


def test_value_matches_dense_loop(filt, rng):
    m = filt.m.toarray()
    b = random_state(m.shape[0], rng)
    brute = 0.0
    for e in range(3):
        brute += W[e] * np.real(np.conj(b[:, e]) @ m @ b[:, e])
    assert j_reg(b, filt) == pytest.approx(brute, rel=1e-12)


def test_gradient_fd(filt, rng):
    k = filt.m.shape[0]
    b = random_state(k, rng)
    g = j_reg_gradient(b, filt)
    h = 1e-4
    for i in rng.choice(k, 5, replace=False):
        for e in range(3):
            for part, unit, gv in ((0, 1.0, g.real), (1, 1j, g.imag)):
                bp, bm = b.copy(), b.copy()
                bp[i, e] += h * unit
                bm[i, e] -= h * unit
                fd = (j_reg(bp, filt) - j_reg(bm, filt)) / (2 * h)
                pred = gv[i, e] * (2.0 if e == 2 else 1.0)
                assert fd == pytest.approx(pred, rel=1e-8, abs=1e-10)


@given(st.integers(0, 2 ** 31))
def test_nonnegative_and_linear_gradient(seed):
    rng = np.random.default_rng(seed)
    pts = rng.uniform(0, 1, (12, 2))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        f = filter_from_points(pts, rng.uniform(0.5, 1.5, 12), 0.4)
    a, b = random_state(12, rng), random_state(12, rng)
    assert j_reg(a, f) >= -1e-12
    ga, gb, gab = j_reg_gradient(a, f), j_reg_gradient(b, f), j_reg_gradient(a + 2 * b, f)
    assert np.allclose(gab.real, ga.real + 2 * gb.real, atol=1e-12)
    assert np.allclose(gab.imag, ga.imag + 2 * gb.imag, atol=1e-12)
