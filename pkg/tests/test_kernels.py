"""The compiled kernels and the numpy fallback must agree."""

import numpy as np
import pytest
from hypothesis import given, strategies as st

from thurston import _kernels_py as py
from thurston import kernels

cy = pytest.importorskip("thurston._kernels")


def _coeffs(rng, n, d):
    return rng.standard_normal((n, d + 1)) + 1j * rng.standard_normal((n, d + 1))


def test_backend_selected():
    assert kernels.BACKEND in ("cython", "python")


@given(st.integers(0, 2**32 - 1), st.integers(1, 6))
def test_poly_eval_agrees(seed, d):
    rng = np.random.default_rng(seed)
    c = _coeffs(rng, 7, d)
    t = rng.standard_normal((7, 3)) + 1j * rng.standard_normal((7, 3))
    assert np.allclose(cy.poly_eval(c, t), py.poly_eval(c, t), rtol=1e-13, atol=1e-13)


def test_poly_eval_matches_numpy():
    rng = np.random.default_rng(0)
    c = _coeffs(rng, 4, 5)
    t = rng.standard_normal((4, 2)) + 0j
    want = np.array([[np.polyval(c[i, ::-1], x) for x in t[i]] for i in range(4)])
    assert np.allclose(py.poly_eval(c, t), want)


@given(st.integers(0, 2**32 - 1))
def test_polish_roots_agrees(seed):
    rng = np.random.default_rng(seed)
    c = _coeffs(rng, 5, 4)
    roots = np.array([np.roots(row[::-1]) for row in c]) + 1e-6
    assert np.allclose(cy.polish_roots(c, roots), py.polish_roots(c, roots), rtol=1e-12, atol=1e-14)


def test_polish_roots_improves_residual():
    rng = np.random.default_rng(1)
    c = _coeffs(rng, 3, 3)
    roots = np.array([np.roots(row[::-1]) for row in c]) * (1 + 1e-7)
    before = np.abs(py.poly_eval(c, roots)).max()
    after = np.abs(py.poly_eval(c, py.polish_roots(c, roots))).max()
    assert after < before


@given(st.integers(0, 2**32 - 1))
def test_polygon_test_agrees(seed):
    rng = np.random.default_rng(seed)
    poly = np.exp(2j * np.pi * np.sort(rng.random(7))) * (1 + 0.3 * rng.random(7))
    pts = 1.5 * (rng.standard_normal(50) + 1j * rng.standard_normal(50))
    i1, d1 = cy.polygon_test(poly, pts)
    i2, d2 = py.polygon_test(poly, pts)
    assert np.array_equal(i1, i2)
    assert np.allclose(d1, d2)


def test_polygon_test_square():
    sq = np.array([0, 1, 1 + 1j, 1j])
    inside, dist = py.polygon_test(sq, np.array([0.5 + 0.5j, 2 + 0j, np.inf]))
    assert inside.tolist() == [True, False, False]
    assert np.isclose(dist[0], 0.5) and np.isclose(dist[1], 1.0) and np.isinf(dist[2])


@given(st.integers(0, 2**32 - 1), st.floats(0.05, 0.5))
def test_greedy_separated_agrees_and_is_separated(seed, eps):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((300, 3, 3))
    x /= np.linalg.norm(x, axis=-1, keepdims=True)
    a = cy.greedy_separated(x, eps)
    b = py.greedy_separated(x, eps)
    assert list(a) == list(b)
    sel = x[b]
    gap = np.linalg.norm(sel[:, None] - sel[None, :], axis=-1).max(axis=-1) / 2
    np.fill_diagonal(gap, np.inf)
    assert gap.min() > eps
