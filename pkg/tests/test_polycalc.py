"""
Polynomial calculus in scaled monomial and edge Legendre bases
"""
import sys
from pathlib import Path

project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

import numpy as np
import pytest
import sympy as sp

from src.core.polycalc import (
    EdgePoly,
    PolyCoeffs,
    ScaledMonomialBasis,
    basis_count,
    differentiate,
    index_of,
    laplacian_power,
    legendre_vandermonde,
    monomial,
    multi_indices,
    multiply,
    rebase,
)
from src.utils.error_handler import IncompatibleBasisError

X, Y = sp.symbols("x y")


def _sympy_poly(p: PolyCoeffs):
    cx, cy = p.basis.center
    h = p.basis.scale
    return sum(
        c * ((X - cx) / h) ** a * ((Y - cy) / h) ** b
        for c, (a, b) in zip(p.coeffs, p.basis.indices)
    )


def _points(n=12, seed=3):
    return np.random.default_rng(seed).uniform(-0.5, 1.5, size=(n, 2))


def test_basis_count():
    assert basis_count(-1) == 0
    assert basis_count(0) == 1
    assert basis_count(3) == 10


def test_index_order_is_graded_lex():
    idx = multi_indices(2)
    assert idx[:6] == ((0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2))
    for k, nu in enumerate(multi_indices(5)):
        assert index_of(nu) == k


def test_evaluate_matches_definition():
    basis = ScaledMonomialBasis((0.5, 0.25), 2.0, 2)
    vand = basis.evaluate(np.array([[1.5, 1.25]]))
    assert np.allclose(vand[0], [1.0, 0.5, 0.5, 0.25, 0.25, 0.25])


def test_differentiate_scales_with_h():
    basis = ScaledMonomialBasis((0.0, 0.0), 0.5, 3)
    d = differentiate(monomial(basis, (2, 0)), (2, 0))
    assert d.degree == 1
    assert np.allclose(d.coeffs, [2.0 / 0.25, 0.0, 0.0])


def test_differentiate_below_zero_degree_is_empty():
    basis = ScaledMonomialBasis((0.0, 0.0), 1.0, 1)
    d = differentiate(monomial(basis, (1, 0)), (2, 0))
    assert d.coeffs.size == 0
    assert np.allclose(d.evaluate(_points()), 0.0)


def test_laplacian_power_matches_sympy():
    rng = np.random.default_rng(11)
    basis = ScaledMonomialBasis((0.3, -0.2), 0.7, 6)
    p = PolyCoeffs(basis, rng.standard_normal(basis.count))
    expr = _sympy_poly(p)
    lap2 = sp.diff(expr, X, 4) + 2 * sp.diff(expr, X, 2, Y, 2) + sp.diff(expr, Y, 4)
    fn = sp.lambdify((X, Y), lap2, "numpy")
    pts = _points()
    got = laplacian_power(p, 2).evaluate(pts)
    assert np.allclose(got, fn(pts[:, 0], pts[:, 1]), rtol=1e-9, atol=1e-8)


def test_multiply_matches_pointwise_product():
    rng = np.random.default_rng(5)
    basis = ScaledMonomialBasis((0.1, 0.4), 0.9, 3)
    p = PolyCoeffs(basis, rng.standard_normal(basis.count))
    q = PolyCoeffs(basis.with_degree(2), rng.standard_normal(basis_count(2)))
    pts = _points()
    pq = multiply(p, q)
    assert pq.degree == 5
    assert np.allclose(pq.evaluate(pts), p.evaluate(pts) * q.evaluate(pts))


def test_multiply_rejects_different_frames():
    a = monomial(ScaledMonomialBasis((0.0, 0.0), 1.0, 1), (1, 0))
    b = monomial(ScaledMonomialBasis((0.5, 0.0), 1.0, 1), (1, 0))
    with pytest.raises(IncompatibleBasisError):
        multiply(a, b)
    with pytest.raises(IncompatibleBasisError):
        a + b


def test_rebase_preserves_values():
    rng = np.random.default_rng(8)
    source = ScaledMonomialBasis((0.5, 0.5), np.sqrt(2.0), 4)
    target = ScaledMonomialBasis((0.2, 0.9), 0.3, 0)
    p = PolyCoeffs(source, rng.standard_normal(source.count))
    q = rebase(p, target)
    assert q.degree == 4
    pts = _points()
    assert np.allclose(q.evaluate(pts), p.evaluate(pts), rtol=1e-9, atol=1e-9)


def test_padded_and_add():
    basis = ScaledMonomialBasis((0.0, 0.0), 1.0, 1)
    p = monomial(basis, (0, 1))
    q = monomial(basis.with_degree(2), (1, 1))
    s = p + q
    assert s.degree == 2
    pts = _points()
    assert np.allclose(s.evaluate(pts), pts[:, 1] + pts[:, 0] * pts[:, 1])
    with pytest.raises(ValueError):
        q.padded(1)


def test_legendre_vandermonde_derivative():
    xi = np.linspace(-1.0, 1.0, 5)
    vals = legendre_vandermonde(xi, 2, derivative=1)
    assert np.allclose(vals[:, 0], 0.0)
    assert np.allclose(vals[:, 1], 1.0)
    assert np.allclose(vals[:, 2], 3.0 * xi)


def test_edge_poly_derivative():
    h = 0.4
    # s^2 = h^2/4 xi^2 = h^2/4 (2/3 L2 + 1/3 L0)
    p = EdgePoly(edge=0, length=h, coeffs=[h * h / 12.0, 0.0, h * h / 6.0])
    s = np.linspace(-h / 2, h / 2, 7)
    assert np.allclose(p.evaluate(s), s ** 2)
    assert np.allclose(p.derivative().evaluate(s), 2.0 * s)
    assert np.allclose(p.derivative(2).evaluate(s), 2.0)
    assert p.derivative(0) is p
