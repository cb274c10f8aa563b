"""
Local stabilized forms, global assembly, clamped boundary conditions,
the linear solve and error norms.
"""
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg
import structlog

from src.config import settings
from src.core.manufactured import ManufacturedSolution
from src.core.mesh import EdgeFrame, Mesh
from src.core.polycalc import (
    ScaledMonomialBasis,
    basis_count,
    index_of,
    legendre_vandermonde,
    multi_indices,
)
from src.core.projectors import (
    BilinearKind,
    ElementOperators,
    build_element_operators,
    derivative_terms,
    form_terms,
)
from src.core.quadrature import cell_rule, edge_rule
from src.core.space import (
    GlobalDofMap,
    edge_moment_count,
    edge_quadrature_degree,
    frame_change_weights,
    moment_factor,
)
from src.models.data_models import ErrorReport, LoadCase, SpaceParams
from src.utils.error_handler import (
    InconsistentConstraintError,
    ProjectorUnavailableError,
    SingularSystemError,
)

logger = structlog.get_logger()


# ----------------------------------------------------------------------
# local forms
# ----------------------------------------------------------------------

def stabilization(ops: ElementOperators) -> np.ndarray:
    """Diagonal dofi-dofi form.

    Entry i is max(h_P^{2(1-p1)}, a^P(Π φ_i, Π φ_i)). The plain scaled identity
    is used when ``stabilization_recipe`` is "dofi".
    """
    floor = ops.space.h ** (2 * (1 - ops.params.p1))
    if settings.stabilization_recipe == "dofi":
        return floor * np.eye(ops.n_dof)
    consistency = np.einsum("ki,kl,li->i", ops.pi_star, ops.G, ops.pi_star)
    return np.diag(np.maximum(floor, consistency))


def local_stiffness(ops: ElementOperators) -> np.ndarray:
    consistency = ops.pi_star.T @ ops.G @ ops.pi_star
    residual = np.eye(ops.n_dof) - ops.D @ ops.pi_star
    K = consistency + residual.T @ stabilization(ops) @ residual
    return 0.5 * (K + K.T)


def stabilization_spectrum(ops: ElementOperators) -> tuple[float, float]:
    """Extreme generalized eigenvalues of S against a^P on P_r modulo P_{p1-1}."""
    n_k = basis_count(ops.params.p1 - 1)
    d_high = ops.D[:, n_k:]
    if d_high.shape[1] == 0:
        return (1.0, 1.0)
    s_form = d_high.T @ stabilization(ops) @ d_high
    eigvals = scipy.linalg.eigh(s_form, ops.G[n_k:, n_k:], eigvals_only=True)
    return float(eigvals.min()), float(eigvals.max())


def load_moments(ops: ElementOperators, solution: ManufacturedSolution, degree: int) -> np.ndarray:
    """∫_P f m_ν for |ν| <= degree."""
    space = ops.space
    rule = space.cell_rule()
    values = space.basis.with_degree(degree).evaluate(rule.points)
    return values.T @ (rule.weights * solution.load(rule.points))


def local_load(ops: ElementOperators, solution: ManufacturedSolution) -> np.ndarray:
    """b_i = ∫_P (Π⁰ f)(Π⁰ φ_i), with Π⁰ of degree r-2p1 or r-p1 by load case."""
    params = ops.params
    if params.load_case is LoadCase.PROJECTED_LOW:
        pi0, degree = ops.pi0_low, params.r - 2 * params.p1
    else:
        if ops.pi0_enh is None:
            raise ProjectorUnavailableError(
                f"load case (b) for {params.label} needs the enhanced space"
            )
        pi0, degree = ops.pi0_enh, params.r - params.p1
    if degree < 0:
        return np.zeros(ops.n_dof)
    return pi0.T @ load_moments(ops, solution, degree)


# ----------------------------------------------------------------------
# assembly
# ----------------------------------------------------------------------

@dataclass
class LinearSystem:
    mesh: Mesh
    params: SpaceParams
    dofmap: GlobalDofMap
    matrix: scipy.sparse.csr_matrix
    rhs: np.ndarray
    operators: list[ElementOperators] = field(repr=False)
    assemble_s: float = 0.0
    transform: Optional[scipy.sparse.csr_matrix] = None
    offset: Optional[np.ndarray] = None
    solution: Optional[np.ndarray] = None
    solve_s: float = 0.0
    diagnostics: dict = field(default_factory=dict)

    @property
    def n_dof(self) -> int:
        return self.dofmap.n_dofs

    @property
    def constrained(self) -> bool:
        return self.transform is not None


def _cell_contribution(params, mesh, cell, solution, kind):
    ops = build_element_operators(params, mesh, cell, kind)
    return ops, local_stiffness(ops), local_load(ops, solution)


def assemble(
    mesh: Mesh,
    params: SpaceParams,
    solution: ManufacturedSolution,
    kind: BilinearKind = BilinearKind.FULL,
    workers: Optional[int] = None,
) -> LinearSystem:
    """Scatter-add of the local forms with the edge-orientation signs."""
    start = time.perf_counter()
    dofmap = GlobalDofMap(mesh, params)
    workers = workers or settings.assembly_workers
    cells = range(mesh.n_cells)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            results = list(
                executor.map(lambda c: _cell_contribution(params, mesh, c, solution, kind), cells)
            )
    else:
        results = [_cell_contribution(params, mesh, c, solution, kind) for c in cells]

    rows, cols, vals = [], [], []
    rhs = np.zeros(dofmap.n_dofs)
    for ops, K, b in results:
        idx, sign = dofmap.local_map(ops.cell)
        signed = K * np.outer(sign, sign)
        rows.append(np.repeat(idx, idx.size))
        cols.append(np.tile(idx, idx.size))
        vals.append(signed.ravel())
        np.add.at(rhs, idx, sign * b)
    matrix = scipy.sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(dofmap.n_dofs, dofmap.n_dofs),
    ).tocsr()
    elapsed = time.perf_counter() - start
    logger.info(
        "Assembled",
        params=params.label,
        mesh=mesh.name,
        n_dof=dofmap.n_dofs,
        nnz=matrix.nnz,
        seconds=round(elapsed, 3),
    )
    return LinearSystem(
        mesh=mesh,
        params=params,
        dofmap=dofmap,
        matrix=matrix,
        rhs=rhs,
        operators=[ops for ops, _, _ in results],
        assemble_s=elapsed,
    )


# ----------------------------------------------------------------------
# interpolation of smooth functions
# ----------------------------------------------------------------------

def global_edge_frame(mesh: Mesh, edge: int) -> EdgeFrame:
    a, b = (int(v) for v in mesh.edges[edge])
    return EdgeFrame(
        edge,
        a,
        b,
        float(mesh.edge_lengths[edge]),
        mesh.edge_midpoints[edge],
        mesh.edge_normals[edge],
        mesh.edge_tangents[edge],
    )


def interpolate_dofs(mesh: Mesh, dofmap: GlobalDofMap, solution: ManufacturedSolution) -> np.ndarray:
    """Global DOFs of a smooth function, edge moments in the global orientation."""
    params = dofmap.params
    out = np.zeros(dofmap.n_dofs)
    for v in range(mesh.n_vertices):
        point = mesh.vertices[v : v + 1]
        for nu in multi_indices(params.p2 - 1):
            out[dofmap.vertex_index(v, nu)] = (
                mesh.vertex_h[v] ** (nu[0] + nu[1]) * solution.derivative(nu, point)[0]
            )
    degree = edge_quadrature_degree(params)
    for e in range(mesh.n_edges):
        frame = global_edge_frame(mesh, e)
        rule = edge_rule(frame, degree)
        xi = 2.0 * rule.params / frame.length
        for j in range(params.p2):
            n_moments = edge_moment_count(j, params)
            if n_moments == 0:
                continue
            normal_derivative = sum(
                w * solution.derivative(nu, rule.points)
                for nu, w in frame_change_weights(0, j, frame.normal, frame.tangent).items()
            )
            moments = legendre_vandermonde(xi, n_moments - 1).T @ (rule.weights * normal_derivative)
            for k in range(n_moments):
                out[dofmap.edge_index(e, j, k)] = frame.length ** (j - 1) * moments[k]
    top = params.r - 2 * params.p1
    for c in range(mesh.n_cells):
        if top < 0:
            break
        rule = cell_rule(mesh, c, degree)
        basis = _cell_basis(mesh, c, top)
        moments = basis.evaluate(rule.points).T @ (rule.weights * solution.value(rule.points))
        moments = scipy.linalg.solve_triangular(
            moment_factor(basis, rule), moments / mesh.diameters[c] ** 2, lower=True
        )
        for row, nu in enumerate(multi_indices(top)):
            out[dofmap.cell_index(c, nu)] = moments[row]
    return out


def _cell_basis(mesh: Mesh, cell: int, degree: int) -> ScaledMonomialBasis:
    return ScaledMonomialBasis(tuple(mesh.centroids[cell]), float(mesh.diameters[cell]), degree)


# ----------------------------------------------------------------------
# clamped boundary conditions
# ----------------------------------------------------------------------

def _vertex_constraint_rows(mesh: Mesh, params: SpaceParams, vertex: int, edges) -> np.ndarray:
    """Rows on the vertex block: ∂_t^ℓ ∂_n^j u(V), j <= p1-1, j+ℓ <= p2-1, per incident edge."""
    h_v = mesh.vertex_h[vertex]
    rows = []
    for e in edges:
        n, t = mesh.edge_normals[e], mesh.edge_tangents[e]
        for j in range(params.p1):
            for ell in range(params.p2 - j):
                row = np.zeros(basis_count(params.p2 - 1))
                for nu, w in frame_change_weights(ell, j, n, t).items():
                    row[index_of(nu)] += w / h_v ** (ell + j)
                rows.append(row)
    return np.array(rows)


def apply_clamped_bcs(
    system: LinearSystem, exact: Optional[ManufacturedSolution] = None
) -> LinearSystem:
    """Eliminate clamped constraints: x = T y + x0.

    Boundary vertex blocks keep the SVD null space of their constraint rows;
    boundary edge moments with j <= p1-1 are fixed.
    """
    mesh, params, dofmap = system.mesh, system.params, system.dofmap
    target = None
    if exact is not None and not exact.homogeneous:
        target = interpolate_dofs(mesh, dofmap, exact)

    incident: dict[int, list[int]] = {}
    for e in np.flatnonzero(mesh.boundary_edges):
        for v in mesh.edges[e]:
            incident.setdefault(int(v), []).append(int(e))

    offset = np.zeros(dofmap.n_dofs)
    fixed = np.zeros(dofmap.n_dofs, dtype=bool)
    t_rows, t_cols, t_vals = [], [], []
    n_free = 0
    n_constraints = 0

    for v in range(mesh.n_vertices):
        block = np.arange(v * dofmap.nv, (v + 1) * dofmap.nv)
        if v not in incident:
            continue
        C = _vertex_constraint_rows(mesh, params, v, incident[v])
        g = C @ (target[block] if target is not None else np.zeros(dofmap.nv))
        _, sigma, vt = np.linalg.svd(C)
        rank = int(np.sum(sigma > settings.constraint_tolerance * sigma[0]))
        particular = np.linalg.lstsq(C, g, rcond=None)[0]
        mismatch = np.linalg.norm(C @ particular - g)
        if mismatch > settings.inconsistency_tolerance * max(1.0, np.linalg.norm(g)):
            raise InconsistentConstraintError(
                f"boundary data at vertex {v} is inconsistent (residual {mismatch:.3e})"
            )
        offset[block] = particular
        fixed[block] = True
        null = vt[rank:].T
        for col in range(null.shape[1]):
            nz = np.flatnonzero(np.abs(null[:, col]) > 0.0)
            t_rows.extend(block[nz])
            t_cols.extend([n_free] * nz.size)
            t_vals.extend(null[nz, col])
            n_free += 1
        n_constraints += rank

    for idx in dofmap.boundary_edge_dofs():
        fixed[idx] = True
        offset[idx] = target[idx] if target is not None else 0.0
        n_constraints += 1

    for idx in np.flatnonzero(~fixed):
        t_rows.append(idx)
        t_cols.append(n_free)
        t_vals.append(1.0)
        n_free += 1

    system.transform = scipy.sparse.coo_matrix(
        (t_vals, (t_rows, t_cols)), shape=(dofmap.n_dofs, n_free)
    ).tocsr()
    system.offset = offset
    system.diagnostics["n_constraints"] = n_constraints
    system.diagnostics["n_free"] = n_free
    logger.debug("Clamped constraints applied", n_constraints=n_constraints, n_free=n_free)
    return system


# ----------------------------------------------------------------------
# solve
# ----------------------------------------------------------------------

def solve(system: LinearSystem) -> np.ndarray:
    if not system.constrained:
        apply_clamped_bcs(system)
    start = time.perf_counter()
    T, x0 = system.transform, system.offset
    reduced = (T.T @ system.matrix @ T).tocsc()
    rhs = T.T @ (system.rhs - system.matrix @ x0)
    n = reduced.shape[0]
    if n == 0:
        y = np.zeros(0)
    elif n <= settings.dense_solve_limit:
        dense = reduced.toarray()
        try:
            y = scipy.linalg.cho_solve(scipy.linalg.cho_factor(0.5 * (dense + dense.T)), rhs)
        except np.linalg.LinAlgError as e:
            raise SingularSystemError(
                f"reduced matrix of size {n} is not positive definite"
            ) from e
    else:
        try:
            y = scipy.sparse.linalg.splu(reduced).solve(rhs)
        except RuntimeError as e:
            raise SingularSystemError(f"sparse factorization failed: {e}") from e
        energy = float(y @ (reduced @ y))
        if not np.isfinite(energy) or energy < 0.0:
            raise SingularSystemError(f"reduced matrix is not positive definite (yᵀAy = {energy:.3e})")

    scale = max(np.linalg.norm(rhs), np.finfo(float).tiny)
    residual = float(np.linalg.norm(reduced @ y - rhs) / scale) if n else 0.0
    x = T @ y + x0
    system.solution = x
    system.solve_s = time.perf_counter() - start
    system.diagnostics["residual"] = residual
    system.diagnostics["reduced_size"] = n
    logger.info("Solved", n=n, residual=residual, seconds=round(system.solve_s, 3))
    return x


# ----------------------------------------------------------------------
# errors
# ----------------------------------------------------------------------

def projected_coefficients(system: LinearSystem, cell: int) -> np.ndarray:
    """Coefficients of Π^P_r u_h on `cell`."""
    idx, sign = system.dofmap.local_map(cell)
    return system.operators[cell].pi_star @ (sign * system.solution[idx])


def _form_values(ops, coeffs, solution, rule, kind):
    """(∫ Σ w (Op(u - Πu_h))², ∫ Σ w (Op u)²) on one cell."""
    p1 = ops.params.p1
    lowered = ops.space.basis.with_degree(ops.params.r - p1).evaluate(rule.points)
    err, norm = 0.0, 0.0
    for (weight, combo), (_, op) in zip(
        derivative_terms(p1, kind), form_terms(ops.space.basis, p1, kind)
    ):
        exact = sum(c * solution.derivative(nu, rule.points) for nu, c in combo.items())
        diff = exact - lowered @ (op @ coeffs)
        err += weight * float(rule.weights @ diff ** 2)
        norm += weight * float(rule.weights @ exact ** 2)
    return err, norm


def error_norms(system: LinearSystem, solution: ManufacturedSolution, deterministic: bool = False) -> ErrorReport:
    if system.solution is None:
        solve(system)
    energy, seminorm, l2, u_energy = 0.0, 0.0, 0.0, 0.0
    for ops in system.operators:
        coeffs = projected_coefficients(system, ops.cell)
        rule = ops.space.cell_rule(ops.space.cell_degree + 4)
        e_lap, u_lap = _form_values(ops, coeffs, solution, rule, BilinearKind.LAPLACIAN)
        e_full, _ = _form_values(ops, coeffs, solution, rule, BilinearKind.FULL)
        diff = solution.value(rule.points) - ops.space.basis.evaluate(rule.points) @ coeffs
        energy += e_lap
        u_energy += u_lap
        seminorm += e_full
        l2 += float(rule.weights @ diff ** 2)

    report = ErrorReport(
        params=system.params.label,
        mesh=system.mesh.name,
        h=system.mesh.h,
        n_dof=system.n_dof,
        energy_err=np.sqrt(max(energy, 0.0)),
        h_p1_seminorm_err=np.sqrt(max(seminorm, 0.0)),
        l2_err=np.sqrt(max(l2, 0.0)),
        assemble_s=0.0 if deterministic else system.assemble_s,
        solve_s=0.0 if deterministic else system.solve_s,
        u_energy_norm=np.sqrt(max(u_energy, 0.0)),
        residual=system.diagnostics.get("residual", 0.0),
    )
    logger.info(
        "Errors",
        params=report.params,
        mesh=report.mesh,
        energy=report.energy_err,
        l2=report.l2_err,
    )
    return report
