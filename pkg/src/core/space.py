"""
The conforming virtual element space for (p1, p2, r).

Degrees of freedom per cell, in layout order:

  D1  h_V^{|ν|} D^ν v(V),             |ν| <= p2-1, vertex-major
  D2  h_E^{-1+j} ∫_E L_k ∂_n^j v ds,  j = 0..p2-1, k < edge_moment_count(j), edge-major
  D3  h_P^{-2} ∫_P q_ν v,             |ν| <= r-2p1
  D3~ h_P^{-2} ∫_P q_ν v,             r-2p1 < |ν| <= r-p1 (extended layout only)

L_k is the Legendre polynomial composed with ξ = 2s/h_E, s being arclength
from the edge midpoint along the traversal direction. q_ν are the scaled
monomials orthonormalized in graded-lex order under h_P^{-2} ∫_P, so the
first card(P_k) of them span P_k for every k (see moment_factor).
"""
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg
import structlog
from scipy.special import comb

from src.core.mesh import Mesh
from src.core.polycalc import (
    EdgePoly,
    MultiIndex,
    PolyCoeffs,
    ScaledMonomialBasis,
    basis_count,
    differentiation_matrix,
    index_of,
    legendre_vandermonde,
    multi_indices,
    rebase,
)
from src.core.quadrature import QuadratureRule, cell_rule, edge_rule
from src.models.data_models import (
    CellMoment,
    CellMomentExtra,
    DofDescriptor,
    DofKind,
    EdgeMoment,
    SpaceParams,
    TraceDegreeRow,
    VertexDerivative,
)
from src.utils.error_handler import ConfigurationError, NumericalError

logger = structlog.get_logger()


# ----------------------------------------------------------------------
# counting
# ----------------------------------------------------------------------

def _check_order(j: int, params: SpaceParams) -> None:
    if not 0 <= j <= params.p2 - 1:
        raise ConfigurationError(f"derivative order j={j} outside 0..{params.p2 - 1}")


def alpha(j: int, params: SpaceParams) -> int:
    """Degree of the edge trace of ∂_n^j v."""
    _check_order(j, params)
    return max(2 * (params.p2 - j) - 1, params.r - j)


def beta(j: int, params: SpaceParams) -> int:
    """Degree of the moment test space on edges for ∂_n^j v (negative: none)."""
    _check_order(j, params)
    return params.r - (2 * params.p2 - j)


def edge_moment_count(j: int, params: SpaceParams) -> int:
    return max(0, beta(j, params) + 1)


def vertex_dof_count(params: SpaceParams) -> int:
    return params.p2 * (params.p2 + 1) // 2


def edge_dof_count(params: SpaceParams) -> int:
    return sum(edge_moment_count(j, params) for j in range(params.p2))


def cell_dof_count(params: SpaceParams) -> int:
    return basis_count(params.r - 2 * params.p1)


def extra_dof_count(params: SpaceParams) -> int:
    return basis_count(params.r - params.p1) - basis_count(params.r - 2 * params.p1)


def local_dim_from_edges(params: SpaceParams, n_edges: int, extended: bool = False) -> int:
    """Closed-form local dimension for a polygon with `n_edges` edges."""
    p2, r = params.p2, params.r
    n_vertices = n_edges
    vertex_overlap = n_vertices * p2 * (p2 + 1) // 2
    if r <= 2 * p2 - 2:
        per_edge = sum(alpha(j, params) + 1 for j in range(p2))
    else:
        per_edge = p2 * (2 * r + 3 - p2) // 2
    dim = cell_dof_count(params) + n_edges * per_edge - vertex_overlap
    if extended:
        dim += extra_dof_count(params)
    return dim


def local_dim(params: SpaceParams, mesh: Mesh, cell: int, extended: bool = False) -> int:
    return local_dim_from_edges(params, len(mesh.cells[cell]), extended)


def trace_table(params: SpaceParams) -> list[TraceDegreeRow]:
    return [
        TraceDegreeRow(
            j=j,
            alpha=alpha(j, params),
            beta=beta(j, params),
            moments=edge_moment_count(j, params),
            endpoint_conditions=2 * (params.p2 - j),
        )
        for j in range(params.p2)
    ]


# ----------------------------------------------------------------------
# layouts
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class LocalDofLayout:
    params: SpaceParams
    cell: int
    vertex_ids: tuple[int, ...]
    edge_ids: tuple[int, ...]
    extended: bool
    descriptors: tuple[DofDescriptor, ...] = field(repr=False)

    @property
    def count(self) -> int:
        return len(self.descriptors)

    @cached_property
    def counts(self) -> dict[str, int]:
        out = {kind.value: 0 for kind in DofKind}
        for d in self.descriptors:
            out[d.kind.value] += 1
        return out

    @cached_property
    def index(self) -> dict[DofDescriptor, int]:
        return {d: i for i, d in enumerate(self.descriptors)}

    @cached_property
    def _offsets(self) -> tuple[int, int, int, int]:
        nv = vertex_dof_count(self.params)
        ne = edge_dof_count(self.params)
        edge_base = len(self.vertex_ids) * nv
        cell_base = edge_base + len(self.edge_ids) * ne
        return nv, ne, edge_base, cell_base

    def vertex_index(self, local_vertex: int, nu) -> int:
        nv, _, _, _ = self._offsets
        return local_vertex * nv + index_of(nu)

    def edge_index(self, local_edge: int, j: int, k: int) -> int:
        _, ne, edge_base, _ = self._offsets
        offset = sum(edge_moment_count(i, self.params) for i in range(j))
        return edge_base + local_edge * ne + offset + k

    def cell_index(self, nu) -> int:
        _, _, _, cell_base = self._offsets
        return cell_base + index_of(nu)

    def extra_index(self, nu) -> int:
        _, _, _, cell_base = self._offsets
        return cell_base + index_of(nu)  # extra moments continue the graded-lex count

    @property
    def regular_count(self) -> int:
        return self.count - (extra_dof_count(self.params) if self.extended else 0)


def enumerate_local(
    params: SpaceParams, mesh: Mesh, cell: int, extended: bool = False
) -> LocalDofLayout:
    p1, p2, r = params.p1, params.p2, params.r
    vertex_ids = mesh.cells[cell]
    edge_ids = mesh.cell_edges[cell]
    descriptors: list[DofDescriptor] = []
    for v in vertex_ids:
        descriptors += [VertexDerivative(vertex=v, nu=tuple(nu)) for nu in multi_indices(p2 - 1)]
    for e in edge_ids:
        for j in range(p2):
            descriptors += [EdgeMoment(edge=e, j=j, k=k) for k in range(edge_moment_count(j, params))]
    descriptors += [CellMoment(cell=cell, nu=tuple(nu)) for nu in multi_indices(r - 2 * p1)]
    if extended:
        low = basis_count(r - 2 * p1)
        descriptors += [
            CellMomentExtra(cell=cell, nu=tuple(nu)) for nu in multi_indices(r - p1)[low:]
        ]
    return LocalDofLayout(params, cell, vertex_ids, edge_ids, extended, tuple(descriptors))


# ----------------------------------------------------------------------
# frame changes
# ----------------------------------------------------------------------

def _expand_linear_forms(first, p: int, second, q: int) -> np.ndarray:
    """Coefficients of (a0 S + a1 U)^p (b0 S + b1 U)^q, indexed by the power of S."""
    c = np.array([1.0])
    for _ in range(p):
        c = np.convolve(c, [first[1], first[0]])
    for _ in range(q):
        c = np.convolve(c, [second[1], second[0]])
    return c


def frame_change_weights(ell: int, j: int, normal, tangent) -> dict[MultiIndex, float]:
    """∂_t^ℓ ∂_n^j = Σ_ν w_ν D^ν (|ν| = ℓ + j)."""
    c = _expand_linear_forms(tangent, ell, normal, j)
    order = ell + j
    return {MultiIndex(i, order - i): float(c[i]) for i in range(order + 1) if c[i] != 0.0}


def cartesian_from_frame_weights(nu, normal, tangent) -> dict[tuple[int, int], float]:
    """D^ν = Σ w_(ℓ,j) ∂_t^ℓ ∂_n^j with ∂_x = t_x∂_t + n_x∂_n, ∂_y = t_y∂_t + n_y∂_n."""
    c = _expand_linear_forms((tangent[0], normal[0]), nu[0], (tangent[1], normal[1]), nu[1])
    order = nu[0] + nu[1]
    return {(i, order - i): float(c[i]) for i in range(order + 1) if c[i] != 0.0}


def vertex_frame_change(derivatives: dict, normal, tangent) -> dict[tuple[int, int], float]:
    """Frame derivatives ∂_t^ℓ ∂_n^j v (j + ℓ <= p2 - 1) from Cartesian ones D^ν v."""
    top = max(nu[0] + nu[1] for nu in derivatives)
    out = {}
    for order in range(top + 1):
        for j in range(order + 1):
            ell = order - j
            weights = frame_change_weights(ell, j, normal, tangent)
            out[(ell, j)] = sum(w * derivatives[tuple(nu)] for nu, w in weights.items())
    return out


def edge_laplacian_expansion(mu: int) -> list[tuple[int, int, int]]:
    """Δ^μ = Σ_ν C(μ,ν) ∂_t^{2(μ-ν)} ∂_n^{2ν} on a straight edge."""
    if mu < 0:
        raise ConfigurationError(f"Laplacian power must be non-negative, got {mu}")
    return [(int(comb(mu, nu, exact=True)), 2 * (mu - nu), 2 * nu) for nu in range(mu + 1)]


# ----------------------------------------------------------------------
# per-cell space: traces and DOFs of polynomials
# ----------------------------------------------------------------------

def moment_factor(basis: ScaledMonomialBasis, rule: QuadratureRule) -> np.ndarray:
    """Lower Cholesky factor L of h_P^{-2} ∫_P m m^T, so that m = L q.

    Leading blocks of L are the factors of the lower-degree Grams.
    """
    values = basis.evaluate(rule.points)
    gram = values.T @ (rule.weights[:, None] * values) / basis.scale ** 2
    try:
        return scipy.linalg.cholesky(gram, lower=True)
    except np.linalg.LinAlgError as e:
        raise NumericalError(f"cell Gram of P_{basis.degree} is not positive definite") from e


def cell_quadrature_degree(params: SpaceParams) -> int:
    return 2 * params.r + 2 * params.p1 + 2


def edge_quadrature_degree(params: SpaceParams) -> int:
    return max(cell_quadrature_degree(params), alpha(0, params) + params.r)


class LocalSpace:
    """Geometry, layout and DOF-level machinery of one cell."""

    def __init__(self, params: SpaceParams, mesh: Mesh, cell: int, extended: bool = False):
        self.params = params
        self.mesh = mesh
        self.cell = cell
        self.layout = enumerate_local(params, mesh, cell, extended)
        self.geometry = mesh.geometry(cell)
        self.frames = self.geometry.frames
        self.h = self.geometry.diameter
        self.vertex_h = mesh.vertex_h[list(self.layout.vertex_ids)]
        self.basis = ScaledMonomialBasis(tuple(self.geometry.centroid), self.h, params.r)
        self.cell_degree = cell_quadrature_degree(params)
        self.edge_degree = edge_quadrature_degree(params)
        self._cell_rules: dict[int, QuadratureRule] = {}
        self._edge_rules: dict[tuple[int, int], QuadratureRule] = {}
        self._traces: dict[tuple[int, int], np.ndarray] = {}
        self._moment_factors: dict[int, np.ndarray] = {}

    @property
    def n_dof(self) -> int:
        return self.layout.count

    def cell_rule(self, degree: int | None = None) -> QuadratureRule:
        degree = max(degree or 0, self.cell_degree)
        if degree not in self._cell_rules:
            self._cell_rules[degree] = cell_rule(self.mesh, self.cell, degree)
        return self._cell_rules[degree]

    def edge_rule(self, local_edge: int, degree: int | None = None) -> QuadratureRule:
        degree = max(degree or 0, self.edge_degree)
        key = (local_edge, degree)
        if key not in self._edge_rules:
            self._edge_rules[key] = edge_rule(self.frames[local_edge], degree)
        return self._edge_rules[key]

    # -- traces ---------------------------------------------------------

    def trace_matrix(self, local_edge: int, j: int) -> np.ndarray:
        """Map from local DOF values to Legendre coefficients of ∂_n^j v on the edge.

        Rows of the interpolation system: Hermite data ∂_t^ℓ ∂_n^j v at both
        endpoints for ℓ < p2 - j, then the scaled edge moments of order j.
        """
        key = (local_edge, j)
        if key in self._traces:
            return self._traces[key]
        params, layout = self.params, self.layout
        frame = self.frames[local_edge]
        length = frame.length
        degree = alpha(j, params)
        n_moments = edge_moment_count(j, params)
        n_vertices = len(layout.vertex_ids)

        lhs = np.zeros((degree + 1, degree + 1))
        rhs = np.zeros((degree + 1, self.n_dof))
        row = 0
        for local_vertex, xi in ((local_edge, -1.0), ((local_edge + 1) % n_vertices, 1.0)):
            h_v = self.vertex_h[local_vertex]
            for ell in range(params.p2 - j):
                lhs[row] = legendre_vandermonde([xi], degree, ell)[0]
                factor = (0.5 * length) ** ell / h_v ** (ell + j)
                for nu, w in frame_change_weights(ell, j, frame.normal, frame.tangent).items():
                    rhs[row, layout.vertex_index(local_vertex, nu)] += factor * w
                row += 1
        for k in range(n_moments):
            lhs[row, k] = 1.0
            rhs[row, layout.edge_index(local_edge, j, k)] = (2 * k + 1) * length ** (-j)
            row += 1
        if row != degree + 1:
            raise NumericalError(
                f"trace system for j={j} has {row} conditions for degree {degree}"
            )
        try:
            mat = scipy.linalg.solve(lhs, rhs)
        except scipy.linalg.LinAlgError as e:
            raise NumericalError(
                f"singular trace interpolation on cell {self.cell}, edge {local_edge}, j={j}"
            ) from e
        self._traces[key] = mat
        return mat

    def build_edge_trace(self, dof_values: np.ndarray, local_edge: int, j: int) -> EdgePoly:
        _check_order(j, self.params)
        frame = self.frames[local_edge]
        coeffs = self.trace_matrix(local_edge, j) @ np.asarray(dof_values, dtype=float)
        return EdgePoly(frame.edge, frame.length, coeffs)

    def trace_values(self, local_edge: int, j: int, ell: int, rule: QuadratureRule) -> np.ndarray:
        """Matrix (n_points × n_dof): ∂_t^ℓ ∂_n^j v at the rule's points."""
        length = self.frames[local_edge].length
        degree = alpha(j, self.params)
        xi = 2.0 * rule.params / length
        vand = legendre_vandermonde(xi, degree, ell) * (2.0 / length) ** ell
        return vand @ self.trace_matrix(local_edge, j)

    # -- cell moments ---------------------------------------------------

    def moment_factor(self, degree: int) -> np.ndarray:
        if degree not in self._moment_factors:
            self._moment_factors[degree] = moment_factor(
                self.basis.with_degree(degree), self.cell_rule(2 * degree)
            )
        return self._moment_factors[degree]

    def cell_moment_rows(self) -> np.ndarray:
        """Rows R with R · dofs = ∫_P v m_ν, |ν| <= r - 2p1, read from D3."""
        top = self.params.r - 2 * self.params.p1
        rows = np.zeros((basis_count(top), self.n_dof))
        if top >= 0:
            cols = [self.layout.cell_index(nu) for nu in multi_indices(top)]
            rows[:, cols] = self.h ** 2 * self.moment_factor(top)
        return rows

    # -- DOFs of polynomials --------------------------------------------

    def _in_frame(self, degree: int) -> ScaledMonomialBasis:
        return self.basis.with_degree(degree)

    def dof_matrix(self, degree: int | None = None) -> np.ndarray:
        """D matrix: column i holds the DOFs of the i-th scaled monomial."""
        params, layout = self.params, self.layout
        degree = params.r if degree is None else degree
        basis = self._in_frame(degree)
        mat = np.zeros((self.n_dof, basis.count))
        if basis.count == 0:
            return mat

        coords = self.geometry.coords
        for lv in range(len(layout.vertex_ids)):
            point = coords[lv : lv + 1]
            for nu in multi_indices(params.p2 - 1):
                order = nu[0] + nu[1]
                values = self._in_frame(degree - order).evaluate(point) @ differentiation_matrix(basis, nu)
                mat[layout.vertex_index(lv, nu)] = self.vertex_h[lv] ** order * values[0]

        for i, frame in enumerate(self.frames):
            rule = self.edge_rule(i, degree + params.r)
            xi = 2.0 * rule.params / frame.length
            for j in range(params.p2):
                n_moments = edge_moment_count(j, params)
                if n_moments == 0:
                    continue
                normal_derivative = np.zeros((rule.weights.size, basis.count))
                for nu, w in frame_change_weights(0, j, frame.normal, frame.tangent).items():
                    normal_derivative += w * (
                        self._in_frame(degree - j).evaluate(rule.points)
                        @ differentiation_matrix(basis, nu)
                    )
                legendre = legendre_vandermonde(xi, n_moments - 1)
                moments = (legendre * rule.weights[:, None]).T @ normal_derivative
                for k in range(n_moments):
                    mat[layout.edge_index(i, j, k)] = frame.length ** (j - 1) * moments[k]

        top = params.r - params.p1 if layout.extended else params.r - 2 * params.p1
        if top >= 0:
            rule = self.cell_rule(degree + top)
            tests = self._in_frame(top).evaluate(rule.points)
            values = basis.evaluate(rule.points)
            moments = scipy.linalg.solve_triangular(
                self.moment_factor(top),
                (tests * rule.weights[:, None]).T @ values / self.h ** 2,
                lower=True,
            )
            low = basis_count(params.r - 2 * params.p1)
            for idx, nu in enumerate(multi_indices(top)):
                target = layout.cell_index(nu) if idx < low else layout.extra_index(nu)
                mat[target] = moments[idx]
        return mat

    def dofs_of_polynomial(self, q: PolyCoeffs) -> np.ndarray:
        if not q.basis.same_frame(self.basis):
            q = rebase(q, self.basis)
        return self.dof_matrix(q.degree) @ q.coeffs if q.degree >= 0 else np.zeros(self.n_dof)


def build_edge_trace(space: LocalSpace, dof_values: np.ndarray, local_edge: int, j: int) -> EdgePoly:
    return space.build_edge_trace(dof_values, local_edge, j)


def dofs_of_polynomial(q: PolyCoeffs, space: LocalSpace) -> np.ndarray:
    return space.dofs_of_polynomial(q)


# ----------------------------------------------------------------------
# global numbering
# ----------------------------------------------------------------------

class GlobalDofMap:
    """Global numbering: vertex blocks, then edge blocks, then cell blocks.

    Edge moments are stored w.r.t. the global edge direction. A cell that
    traverses an edge against it sees the moment (j, k) with sign (-1)^{j+k}:
    (-1)^j from the flipped normal, (-1)^k from the Legendre parity.
    """

    def __init__(self, mesh: Mesh, params: SpaceParams):
        self.mesh = mesh
        self.params = params
        self.nv = vertex_dof_count(params)
        self.ne = edge_dof_count(params)
        self.nc = cell_dof_count(params)
        self.edge_base = mesh.n_vertices * self.nv
        self.cell_base = self.edge_base + mesh.n_edges * self.ne
        self.n_dofs = self.cell_base + mesh.n_cells * self.nc
        self._edge_offsets = np.cumsum(
            [0] + [edge_moment_count(j, params) for j in range(params.p2)]
        )

    @property
    def global_dim(self) -> int:
        return self.n_dofs

    def vertex_index(self, vertex: int, nu) -> int:
        return vertex * self.nv + index_of(nu)

    def edge_index(self, edge: int, j: int, k: int) -> int:
        return self.edge_base + edge * self.ne + int(self._edge_offsets[j]) + k

    def cell_index(self, cell: int, nu) -> int:
        return self.cell_base + cell * self.nc + index_of(nu)

    def index(self, descriptor: DofDescriptor) -> int:
        if isinstance(descriptor, VertexDerivative):
            return self.vertex_index(descriptor.vertex, descriptor.nu)
        if isinstance(descriptor, EdgeMoment):
            return self.edge_index(descriptor.edge, descriptor.j, descriptor.k)
        if isinstance(descriptor, CellMoment):
            return self.cell_index(descriptor.cell, descriptor.nu)
        raise ConfigurationError(f"{descriptor.kind.value} DOFs have no global index")

    @cached_property
    def descriptors(self) -> list[DofDescriptor]:
        p = self.params
        out: list[DofDescriptor] = []
        for v in range(self.mesh.n_vertices):
            out += [VertexDerivative(vertex=v, nu=tuple(nu)) for nu in multi_indices(p.p2 - 1)]
        for e in range(self.mesh.n_edges):
            for j in range(p.p2):
                out += [EdgeMoment(edge=e, j=j, k=k) for k in range(edge_moment_count(j, p))]
        for c in range(self.mesh.n_cells):
            out += [CellMoment(cell=c, nu=tuple(nu)) for nu in multi_indices(p.r - 2 * p.p1)]
        return out

    def local_map(self, cell: int) -> tuple[np.ndarray, np.ndarray]:
        """Global indices and signs for the regular local layout of `cell`."""
        p = self.params
        indices, signs = [], []
        for v in self.mesh.cells[cell]:
            indices += range(v * self.nv, (v + 1) * self.nv)
            signs += [1.0] * self.nv
        for frame in self.mesh.edge_frames(cell):
            base = self.edge_base + frame.edge * self.ne
            for j in range(p.p2):
                for k in range(edge_moment_count(j, p)):
                    indices.append(base + int(self._edge_offsets[j]) + k)
                    signs.append(1.0 if frame.orientation > 0 else (-1.0) ** (j + k))
        indices += range(self.cell_base + cell * self.nc, self.cell_base + (cell + 1) * self.nc)
        signs += [1.0] * self.nc
        return np.asarray(indices, dtype=int), np.asarray(signs)

    def boundary_edge_dofs(self) -> list[int]:
        """Edge moments fixed by clamped conditions (j <= p1 - 1 on boundary edges)."""
        p = self.params
        out = []
        for e in np.flatnonzero(self.mesh.boundary_edges):
            for j in range(p.p1):
                out += [self.edge_index(int(e), j, k) for k in range(edge_moment_count(j, p))]
        return out
