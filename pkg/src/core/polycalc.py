"""
Exact calculus on bivariate polynomials in scaled monomial bases and on
univariate edge polynomials in a scaled Legendre basis.

Multi-indices of total degree <= k are enumerated in graded lexicographic
order: degree by degree, and inside one degree by decreasing nu1, i.e.

    (0,0), (1,0), (0,1), (2,0), (1,1), (0,2), (3,0), ...

so that ``index_of(nu) = |nu|(|nu|+1)/2 + nu2`` independently of k. A
coefficient vector of degree d is therefore a prefix of the same polynomial
written in any basis of degree k >= d.
"""
from dataclasses import dataclass, field
from functools import lru_cache
from math import perm
from typing import NamedTuple, Sequence

import numpy as np
from numpy.polynomial import legendre

from src.utils.error_handler import IncompatibleBasisError


class MultiIndex(NamedTuple):
    nu1: int
    nu2: int

    @property
    def order(self) -> int:
        return self.nu1 + self.nu2


def basis_count(k: int) -> int:
    """Dimension of P_k in two variables; 0 for k < 0."""
    if k < 0:
        return 0
    return (k + 1) * (k + 2) // 2


@lru_cache(maxsize=None)
def multi_indices(k: int) -> tuple[MultiIndex, ...]:
    return tuple(
        MultiIndex(a, d - a) for d in range(k + 1) for a in range(d, -1, -1)
    )


def index_of(nu: Sequence[int]) -> int:
    d = nu[0] + nu[1]
    return d * (d + 1) // 2 + nu[1]


@dataclass(frozen=True)
class ScaledMonomialBasis:
    """m_ν(x) = ((x - center) / scale)^ν for |ν| <= degree"""
    center: tuple[float, float]
    scale: float
    degree: int

    def __post_init__(self):
        if not self.scale > 0.0:
            raise ValueError(f"basis scale must be positive, got {self.scale}")
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))
        object.__setattr__(self, "scale", float(self.scale))

    @property
    def count(self) -> int:
        return basis_count(self.degree)

    @property
    def indices(self) -> tuple[MultiIndex, ...]:
        return multi_indices(self.degree)

    def with_degree(self, degree: int) -> "ScaledMonomialBasis":
        return ScaledMonomialBasis(self.center, self.scale, degree)

    def same_frame(self, other: "ScaledMonomialBasis") -> bool:
        return self.center == other.center and self.scale == other.scale

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        """Vandermonde matrix of shape (n_points, count)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if self.degree < 0:
            return np.zeros((pts.shape[0], 0))
        xi = (pts - np.asarray(self.center)) / self.scale
        powers = np.arange(self.degree + 1)
        px = xi[:, 0:1] ** powers
        py = xi[:, 1:2] ** powers
        cols = [px[:, a] * py[:, b] for a, b in self.indices]
        return np.stack(cols, axis=1)


@dataclass(frozen=True)
class PolyCoeffs:
    basis: ScaledMonomialBasis
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float).reshape(-1)
        if c.size != self.basis.count:
            raise ValueError(
                f"{c.size} coefficients for a basis of size {self.basis.count}"
            )
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def degree(self) -> int:
        return self.basis.degree

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        return self.basis.evaluate(points) @ self.coeffs

    def padded(self, degree: int) -> "PolyCoeffs":
        """Same polynomial written in the degree-`degree` basis (degree >= current)."""
        if degree < self.degree:
            raise ValueError("padding cannot lower the degree")
        c = np.zeros(basis_count(degree))
        c[: self.coeffs.size] = self.coeffs
        return PolyCoeffs(self.basis.with_degree(degree), c)

    def __add__(self, other: "PolyCoeffs") -> "PolyCoeffs":
        _check_frames(self.basis, other.basis)
        k = max(self.degree, other.degree)
        return PolyCoeffs(
            self.basis.with_degree(k),
            self.padded(k).coeffs + other.padded(k).coeffs,
        )

    def scaled(self, factor: float) -> "PolyCoeffs":
        return PolyCoeffs(self.basis, factor * self.coeffs)


def _check_frames(a: ScaledMonomialBasis, b: ScaledMonomialBasis) -> None:
    if not a.same_frame(b):
        raise IncompatibleBasisError(
            f"bases differ: center {a.center} scale {a.scale} "
            f"vs center {b.center} scale {b.scale}"
        )


def monomial(basis: ScaledMonomialBasis, nu: Sequence[int]) -> PolyCoeffs:
    c = np.zeros(basis.count)
    c[index_of(nu)] = 1.0
    return PolyCoeffs(basis, c)


def differentiation_matrix(basis: ScaledMonomialBasis, nu: Sequence[int]) -> np.ndarray:
    """Matrix mapping coefficients of degree k to those of D^ν p (degree k - |ν|)."""
    a, b = nu
    target = basis_count(basis.degree - a - b)
    mat = np.zeros((target, basis.count))
    if target == 0:
        return mat
    factor = basis.scale ** (-(a + b))
    for i, (m1, m2) in enumerate(basis.indices):
        if m1 >= a and m2 >= b:
            mat[index_of((m1 - a, m2 - b)), i] = perm(m1, a) * perm(m2, b) * factor
    return mat


def differentiate(p: PolyCoeffs, nu: Sequence[int]) -> PolyCoeffs:
    mat = differentiation_matrix(p.basis, nu)
    return PolyCoeffs(p.basis.with_degree(p.degree - nu[0] - nu[1]), mat @ p.coeffs)


def laplacian_matrix(basis: ScaledMonomialBasis, m: int) -> np.ndarray:
    """Matrix of Δ^m from degree k to degree k - 2m."""
    mat = np.eye(basis.count)
    current = basis
    for _ in range(m):
        step = differentiation_matrix(current, (2, 0)) + differentiation_matrix(current, (0, 2))
        mat = step @ mat
        current = current.with_degree(current.degree - 2)
    return mat


def laplacian_power(p: PolyCoeffs, m: int) -> PolyCoeffs:
    mat = laplacian_matrix(p.basis, m)
    return PolyCoeffs(p.basis.with_degree(p.degree - 2 * m), mat @ p.coeffs)


def multiply(p: PolyCoeffs, q: PolyCoeffs) -> PolyCoeffs:
    _check_frames(p.basis, q.basis)
    if p.basis.count == 0 or q.basis.count == 0:
        return PolyCoeffs(p.basis.with_degree(-1), np.zeros(0))
    k = p.degree + q.degree
    out = np.zeros(basis_count(k))
    for i, (a1, a2) in enumerate(p.basis.indices):
        if p.coeffs[i] == 0.0:
            continue
        for j, (b1, b2) in enumerate(q.basis.indices):
            out[index_of((a1 + b1, a2 + b2))] += p.coeffs[i] * q.coeffs[j]
    return PolyCoeffs(p.basis.with_degree(k), out)


def rebase(p: PolyCoeffs, basis: ScaledMonomialBasis) -> PolyCoeffs:
    """Re-expand p in another scaled frame; the result has degree p.degree."""
    k = p.degree
    target = basis.with_degree(max(k, 0))
    if k < 0:
        return PolyCoeffs(basis.with_degree(-1), np.zeros(0))
    ratio = basis.scale / p.basis.scale
    shift = (np.asarray(basis.center) - np.asarray(p.basis.center)) / p.basis.scale
    one = monomial(target.with_degree(0), (0, 0))
    lx = PolyCoeffs(target.with_degree(1), [shift[0], ratio, 0.0])
    ly = PolyCoeffs(target.with_degree(1), [shift[1], 0.0, ratio])
    px, py = [one], [one]
    for _ in range(k):
        px.append(multiply(px[-1], lx))
        py.append(multiply(py[-1], ly))
    out = np.zeros(basis_count(k))
    for i, (a, b) in enumerate(p.basis.indices):
        if p.coeffs[i] == 0.0:
            continue
        term = multiply(px[a], py[b])
        out[: term.coeffs.size] += p.coeffs[i] * term.coeffs
    return PolyCoeffs(target, out)


def gram_condition(basis: ScaledMonomialBasis, rule) -> float:
    """Condition number of the L² Gram matrix of `basis` under a quadrature rule."""
    vand = basis.evaluate(rule.points)
    gram = vand.T @ (rule.weights[:, None] * vand)
    return float(np.linalg.cond(gram))


def legendre_vandermonde(xi: np.ndarray, degree: int, derivative: int = 0) -> np.ndarray:
    """Values of d^ℓ/dξ^ℓ L_k(ξ) for k = 0..degree, shape (len(xi), degree+1)."""
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    if derivative == 0:
        return legendre.legvander(xi, degree)
    out = np.zeros((xi.size, degree + 1))
    for k in range(derivative, degree + 1):
        c = np.zeros(k + 1)
        c[k] = 1.0
        out[:, k] = legendre.legval(xi, legendre.legder(c, derivative))
    return out


@dataclass(frozen=True)
class EdgePoly:
    """Polynomial on an edge in the scaled Legendre basis L_k(2s/h_E).

    s is arclength measured from the edge midpoint along the traversal
    direction, so s ranges over [-h_E/2, h_E/2].
    """
    edge: int
    length: float
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float).reshape(-1)
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def degree(self) -> int:
        return self.coeffs.size - 1

    def evaluate(self, s: np.ndarray) -> np.ndarray:
        xi = 2.0 * np.asarray(s, dtype=float) / self.length
        if self.coeffs.size == 0:
            return np.zeros_like(xi)
        return legendre.legval(xi, self.coeffs)

    def derivative(self, order: int = 1) -> "EdgePoly":
        if order == 0 or self.coeffs.size == 0:
            return self
        c = legendre.legder(self.coeffs, order) * (2.0 / self.length) ** order
        return EdgePoly(self.edge, self.length, c)
