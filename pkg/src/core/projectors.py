"""
Computable per-cell projections.

All maps here act on the regular local DOF vector of a cell and return
coefficients in the cell's scaled monomial frame (center x_P, scale h_P).

The consistency right-hand sides a^P(v, q) are obtained by integrating by
parts until every volume derivative sits on the polynomial q. What remains
of v is a set of boundary traces ∂_t^ℓ ∂_n^j v with j <= p1 - 1 (rebuilt
from D1/D2) and the moments of v against P_{r-2p1} (read from D3).
"""
from dataclasses import dataclass
from enum import Enum
from math import comb
from typing import Optional

import numpy as np
import scipy.linalg
import structlog

from src.config import settings
from src.core.mesh import Mesh
from src.core.polycalc import (
    PolyCoeffs,
    ScaledMonomialBasis,
    basis_count,
    differentiation_matrix,
    laplacian_matrix,
    multi_indices,
)
from src.core.quadrature import QuadratureRule
from src.core.space import (
    LocalSpace,
    cartesian_from_frame_weights,
    edge_laplacian_expansion,
    extra_dof_count,
)
from src.models.data_models import SpaceParams
from src.utils.error_handler import (
    IncompatibleBasisError,
    NumericalError,
    ProjectorUnavailableError,
)

logger = structlog.get_logger()


class BilinearKind(str, Enum):
    FULL = "full"            # Σ_{|α|=p1} (p1!/α!) ∫ D^α u D^α v
    LAPLACIAN = "laplacian"  # ∫ Δ^ℓ u Δ^ℓ v  or  ∫ ∇Δ^ℓ u · ∇Δ^ℓ v


def derivative_terms(
    p1: int, kind: BilinearKind = BilinearKind.FULL
) -> list[tuple[float, dict[tuple[int, int], float]]]:
    """(weight, {ν: c_ν}) pairs with a^P(u, v) = Σ weight ∫ (Σ c_ν D^ν u)(Σ c_ν D^ν v)."""
    if BilinearKind(kind) is BilinearKind.FULL:
        return [(float(comb(p1, a)), {(a, p1 - a): 1.0}) for a in range(p1, -1, -1)]
    ell = p1 // 2
    lap = {(2 * (ell - i), 2 * i): float(comb(ell, i)) for i in range(ell + 1)}
    if p1 % 2 == 0:
        return [(1.0, lap)]
    return [
        (1.0, {(a + 1, b): c for (a, b), c in lap.items()}),
        (1.0, {(a, b + 1): c for (a, b), c in lap.items()}),
    ]


def form_terms(
    basis: ScaledMonomialBasis, p1: int, kind: BilinearKind = BilinearKind.FULL
) -> list[tuple[float, np.ndarray]]:
    """Operator form of derivative_terms: each matrix maps degree k to k - p1."""
    return [
        (weight, sum(c * differentiation_matrix(basis, nu) for nu, c in combo.items()))
        for weight, combo in derivative_terms(p1, kind)
    ]


def bilinear_matrix(
    basis: ScaledMonomialBasis,
    p1: int,
    rule: QuadratureRule,
    kind: BilinearKind = BilinearKind.FULL,
) -> np.ndarray:
    """Gram matrix a^P(m_i, m_j) over a cell rule."""
    lowered = basis.with_degree(basis.degree - p1).evaluate(rule.points)
    out = np.zeros((basis.count, basis.count))
    for weight, op in form_terms(basis, p1, kind):
        values = lowered @ op
        out += weight * values.T @ (rule.weights[:, None] * values)
    return 0.5 * (out + out.T)


def poly_bilinear(
    a: PolyCoeffs,
    b: PolyCoeffs,
    p1: int,
    rule: QuadratureRule,
    kind: BilinearKind = BilinearKind.FULL,
) -> float:
    if not a.basis.same_frame(b.basis):
        raise IncompatibleBasisError("poly_bilinear needs both polynomials in one frame")
    k = max(a.degree, b.degree)
    if k < p1:
        return 0.0
    gram = bilinear_matrix(a.basis.with_degree(k), p1, rule, kind)
    return float(a.padded(k).coeffs @ gram @ b.padded(k).coeffs)


# ----------------------------------------------------------------------
# a^P(v_h, q) from DOFs
# ----------------------------------------------------------------------

class _ConsistencyBuilder:
    """Rows a^P(v, q_c) as linear functionals of the DOFs, for columns q_c."""

    def __init__(self, space: LocalSpace):
        self.space = space
        self.params = space.params
        self.basis = space.basis
        self.rules = [space.edge_rule(i) for i in range(len(space.frames))]
        self._traces: dict[tuple[int, int, int], np.ndarray] = {}

    def trace(self, i: int, j: int, ell: int) -> np.ndarray:
        key = (i, j, ell)
        if key not in self._traces:
            self._traces[key] = self.space.trace_values(i, j, ell, self.rules[i])
        return self._traces[key]

    def cartesian_trace(self, i: int, gamma) -> np.ndarray:
        frame = self.space.frames[i]
        out = np.zeros((self.rules[i].weights.size, self.space.n_dof))
        for (ell, j), w in cartesian_from_frame_weights(gamma, frame.normal, frame.tangent).items():
            out += w * self.trace(i, j, ell)
        return out

    def laplacian_trace(self, i: int, mu: int, normal: bool) -> np.ndarray:
        out = np.zeros((self.rules[i].weights.size, self.space.n_dof))
        for coeff, tangential, normal_order in edge_laplacian_expansion(mu):
            out += coeff * self.trace(i, normal_order + int(normal), tangential)
        return out

    def volume(self, wmat: np.ndarray) -> np.ndarray:
        """∫_P v w from D3, w given by coefficient columns of degree r - 2p1."""
        return wmat.T @ self.space.cell_moment_rows()

    def boundary(self, trace_of, wmat: np.ndarray, degree: int) -> np.ndarray:
        """Σ_E ∫_E (trace of v) · w, trace_of(i) giving (points × dofs) values."""
        out = np.zeros((wmat.shape[1], self.space.n_dof))
        if wmat.shape[0] == 0:
            return out
        basis = self.basis.with_degree(degree)
        for i, rule in enumerate(self.rules):
            w_values = basis.evaluate(rule.points) @ wmat
            out += (w_values * rule.weights[:, None]).T @ trace_of(i)
        return out

    def normal_derivative(self, i: int, wmat: np.ndarray, degree: int) -> np.ndarray:
        basis = self.basis.with_degree(degree)
        n = self.space.frames[i].normal
        lowered = self.basis.with_degree(degree - 1).evaluate(self.rules[i].points)
        return lowered @ (
            n[0] * differentiation_matrix(basis, (1, 0)) + n[1] * differentiation_matrix(basis, (0, 1))
        ) @ wmat

    # -- full form -----------------------------------------------------

    def _peel(self, beta: tuple[int, int], wmat: np.ndarray, degree: int) -> np.ndarray:
        """∫_P D^β v · w, moving one derivative at a time onto w."""
        if beta == (0, 0):
            return self.volume(wmat)
        d = 0 if beta[0] > 0 else 1
        gamma = (beta[0] - 1, beta[1]) if d == 0 else (beta[0], beta[1] - 1)
        boundary = np.zeros((wmat.shape[1], self.space.n_dof))
        if wmat.shape[0]:
            basis = self.basis.with_degree(degree)
            for i, rule in enumerate(self.rules):
                n_d = self.space.frames[i].normal[d]
                if n_d == 0.0:
                    continue
                w_values = basis.evaluate(rule.points) @ wmat
                boundary += n_d * (w_values * rule.weights[:, None]).T @ self.cartesian_trace(i, gamma)
        step = (1, 0) if d == 0 else (0, 1)
        inner = self._peel(
            gamma, differentiation_matrix(self.basis.with_degree(degree), step) @ wmat, degree - 1
        )
        return boundary - inner

    def full(self) -> np.ndarray:
        p1, r = self.params.p1, self.params.r
        basis = self.basis.with_degree(r)
        out = np.zeros((basis.count, self.space.n_dof))
        for nu in multi_indices(p1):
            if nu[0] + nu[1] != p1:
                continue
            out += comb(p1, nu[0]) * self._peel(tuple(nu), differentiation_matrix(basis, nu), r - p1)
        return out

    # -- Laplacian form ------------------------------------------------

    def _green(self, mu: int, wmat: np.ndarray, degree: int) -> np.ndarray:
        """∫_P Δ^μ v · w via the swapped Green identity."""
        if mu == 0:
            return self.volume(wmat)
        flux = self.boundary(lambda i: self.laplacian_trace(i, mu - 1, normal=True), wmat, degree)
        value = np.zeros_like(flux)
        if wmat.shape[0]:
            for i, rule in enumerate(self.rules):
                dn_w = self.normal_derivative(i, wmat, degree)
                value += (dn_w * rule.weights[:, None]).T @ self.laplacian_trace(i, mu - 1, normal=False)
        lap = laplacian_matrix(self.basis.with_degree(degree), 1) @ wmat
        return self._green(mu - 1, lap, degree - 2) + flux - value

    def laplacian(self) -> np.ndarray:
        p1, r = self.params.p1, self.params.r
        ell = p1 // 2
        basis = self.basis.with_degree(r)
        wmat = laplacian_matrix(basis, ell)
        degree = r - 2 * ell
        if p1 % 2 == 0:
            return self._green(ell, wmat, degree)
        out = np.zeros((basis.count, self.space.n_dof))
        if wmat.shape[0]:
            for i, rule in enumerate(self.rules):
                dn_w = self.normal_derivative(i, wmat, degree)
                out += (dn_w * rule.weights[:, None]).T @ self.laplacian_trace(i, ell, normal=False)
        lap = laplacian_matrix(self.basis.with_degree(degree), 1) @ wmat
        return out - self._green(ell, lap, degree - 2)


def consistency_matrix(space: LocalSpace, kind: BilinearKind = BilinearKind.FULL) -> np.ndarray:
    """B with B[i] · dofs = a^P(v, m_i) for every monomial m_i of P_r."""
    builder = _ConsistencyBuilder(space)
    if BilinearKind(kind) is BilinearKind.FULL:
        return builder.full()
    return builder.laplacian()


def a_poly_vs_dofs(
    q: PolyCoeffs,
    dof_values: np.ndarray,
    space: LocalSpace,
    kind: BilinearKind = BilinearKind.FULL,
) -> float:
    if not q.basis.same_frame(space.basis):
        raise IncompatibleBasisError("q must be written in the cell's monomial frame")
    if q.degree > space.params.r:
        raise IncompatibleBasisError(f"q has degree {q.degree} > r = {space.params.r}")
    coeffs = q.padded(space.params.r).coeffs if q.degree >= 0 else np.zeros(space.basis.count)
    return float(coeffs @ consistency_matrix(space, kind) @ np.asarray(dof_values, dtype=float))


# ----------------------------------------------------------------------
# element operators
# ----------------------------------------------------------------------

@dataclass
class ElementOperators:
    cell: int
    params: SpaceParams
    space: LocalSpace
    D: np.ndarray
    G: np.ndarray
    B: np.ndarray
    boundary_gram: np.ndarray
    pi_star: np.ndarray
    pi_star_low: np.ndarray
    pi0_low: np.ndarray
    pi0_enh: Optional[np.ndarray] = None

    @property
    def n_dof(self) -> int:
        return self.space.n_dof

    def preservation_residual(self) -> float:
        return float(np.abs(self.pi_star @ self.D - np.eye(self.D.shape[1])).max())


def _boundary_gram(space: LocalSpace, degree: int) -> np.ndarray:
    basis = space.basis.with_degree(degree)
    out = np.zeros((basis.count, basis.count))
    for i in range(len(space.frames)):
        rule = space.edge_rule(i)
        values = basis.evaluate(rule.points)
        out += values.T @ (rule.weights[:, None] * values)
    return out


def _closure_rhs(space: LocalSpace, degree: int) -> np.ndarray:
    """∫_∂P v m_k ds for m_k in P_degree, as rows over the DOFs."""
    basis = space.basis.with_degree(degree)
    out = np.zeros((basis.count, space.n_dof))
    for i in range(len(space.frames)):
        rule = space.edge_rule(i)
        values = basis.evaluate(rule.points)
        out += (values * rule.weights[:, None]).T @ space.trace_values(i, 0, 0, rule)
    return out


def elliptic_projector(
    space: LocalSpace,
    s: int,
    G: np.ndarray,
    B: np.ndarray,
    boundary_gram: np.ndarray,
    closure_rhs: np.ndarray,
) -> np.ndarray:
    """Π^P_s as a (card P_s × n_dof) matrix.

    Consistency rows only involve coefficients of degree >= p1 and are
    solved first by Cholesky; the closure rows then fix the P_{p1-1} part.
    """
    p1 = space.params.p1
    n_s = basis_count(s)
    n_k = basis_count(min(s, p1 - 1))
    if n_s > n_k:
        g_hh = G[n_k:n_s, n_k:n_s]
        cond = np.linalg.cond(g_hh)
        if cond > settings.projector_condition_limit:
            logger.warning("Ill-conditioned projector block", cell=space.cell, s=s, cond=cond)
        try:
            c_high = scipy.linalg.cho_solve(scipy.linalg.cho_factor(g_hh), B[n_k:n_s])
        except np.linalg.LinAlgError as e:
            raise ProjectorUnavailableError(
                f"a^P is not positive definite on P_{s} modulo P_{p1 - 1} (cell {space.cell})"
            ) from e
    else:
        c_high = np.zeros((0, space.n_dof))
    rhs = closure_rhs[:n_k] - boundary_gram[:n_k, n_k:n_s] @ c_high
    try:
        c_low = scipy.linalg.solve(boundary_gram[:n_k, :n_k], rhs, assume_a="pos")
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as e:
        raise NumericalError(
            f"boundary closure Gram on P_{min(s, p1 - 1)} is singular on cell {space.cell}"
        ) from e
    return np.vstack([c_low, c_high])


def _moment_selector(space: LocalSpace) -> np.ndarray:
    """Rows picking the D3 values out of the DOF vector."""
    p = space.params
    rows = np.zeros((basis_count(p.r - 2 * p.p1), space.n_dof))
    for row, nu in enumerate(multi_indices(p.r - 2 * p.p1)):
        rows[row, space.layout.cell_index(nu)] = 1.0
    return rows


def l2_projector_low(space: LocalSpace) -> np.ndarray:
    p = space.params
    degree = p.r - 2 * p.p1
    if degree < 0:
        return np.zeros((0, space.n_dof))
    # D3 are the coordinates of Π⁰ v in the orthonormal moment basis
    return scipy.linalg.solve_triangular(
        space.moment_factor(degree), _moment_selector(space), lower=True, trans="T"
    )


def _extra_moments(space: LocalSpace, pi_star_low: np.ndarray) -> np.ndarray:
    """h_P^{-2} ∫_P q_k Π^P_{r-p1} v for the moment polynomials beyond P_{r-2p1}."""
    p = space.params
    low = basis_count(p.r - 2 * p.p1)
    return space.moment_factor(p.r - p.p1).T[low:] @ pi_star_low


def l2_projector_enhanced(space: LocalSpace, pi_star_low: np.ndarray) -> np.ndarray:
    """Π⁰_{r-p1} on the enhanced space.

    Moments against P_{r-2p1} come from D3; the remaining ones are taken
    from Π^P_{r-p1} v, as the enhancement constraints prescribe.
    """
    p = space.params
    if not p.enhanced:
        raise ProjectorUnavailableError(
            f"Π⁰_{{r-p1}} needs the enhanced space for {p.label}"
        )
    moments = np.vstack([_moment_selector(space), _extra_moments(space, pi_star_low)])
    return scipy.linalg.solve_triangular(
        space.moment_factor(p.r - p.p1), moments, lower=True, trans="T"
    )


def enhancement_constraints(space: LocalSpace, pi_star_low: np.ndarray) -> np.ndarray:
    """Rows h_P^{-2} ∫ q_k Π^P_{r-p1} v - D̃3_k(v) on the extended layout."""
    n_extra = extra_dof_count(space.params)
    n_regular = pi_star_low.shape[1]
    out = np.zeros((n_extra, n_regular + n_extra))
    out[:, :n_regular] = _extra_moments(space, pi_star_low)
    out[:, n_regular:] = -np.eye(n_extra)
    return out


def build_element_operators(
    params: SpaceParams,
    mesh: Mesh,
    cell: int,
    kind: BilinearKind = BilinearKind.FULL,
) -> ElementOperators:
    space = LocalSpace(params, mesh, cell)
    rule = space.cell_rule()
    G = bilinear_matrix(space.basis, params.p1, rule, kind)
    B = consistency_matrix(space, kind)
    bgram = _boundary_gram(space, params.r)
    closure = _closure_rhs(space, min(params.r, params.p1 - 1))
    pi_star = elliptic_projector(space, params.r, G, B, bgram, closure)
    pi_star_low = elliptic_projector(space, params.r - params.p1, G, B, bgram, closure)
    ops = ElementOperators(
        cell=cell,
        params=params,
        space=space,
        D=space.dof_matrix(),
        G=G,
        B=B,
        boundary_gram=bgram,
        pi_star=pi_star,
        pi_star_low=pi_star_low,
        pi0_low=l2_projector_low(space),
        pi0_enh=l2_projector_enhanced(space, pi_star_low) if params.enhanced else None,
    )
    logger.debug("Element operators built", cell=cell, n_dof=space.n_dof, params=params.label)
    return ops
