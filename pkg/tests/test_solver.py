"""
Local stiffness, assembly, clamped boundary conditions, solve and errors
"""
import sys
from pathlib import Path

project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

import numpy as np
import pytest
import scipy.sparse

from src.config import settings
from src.core.manufactured import UNIT_FRAME, PolynomialSolution, get_solution
from src.core.mesh import generate
from src.core.polycalc import PolyCoeffs, basis_count
from src.core.projectors import build_element_operators, poly_bilinear
from src.core.solver import (
    apply_clamped_bcs,
    assemble,
    error_norms,
    interpolate_dofs,
    local_load,
    local_stiffness,
    solve,
    stabilization,
    stabilization_spectrum,
)
from src.models.data_models import SpaceParams
from src.utils.error_handler import SingularSystemError


def _params(p1, p2, r, enhanced=False):
    return SpaceParams(p1=p1, p2=p2, r=r, enhanced=enhanced)


def _zero_solution(p1):
    return PolynomialSolution("zero", p1, PolyCoeffs(UNIT_FRAME.with_degree(1), [0.0, 0.0, 0.0]))


@pytest.mark.parametrize("recipe", ["diagonal", "dofi"])
@pytest.mark.parametrize("params", [(1, 1, 2), (2, 2, 4), (2, 3, 5), (1, 2, 4), (1, 3, 5)])
def test_local_stiffness_symmetric_with_polynomial_kernel(params, recipe, monkeypatch):
    monkeypatch.setattr(settings, "stabilization_recipe", recipe)
    p = _params(*params)
    mesh = generate("perturbed", 1, seed=1)
    ops = build_element_operators(p, mesh, 2)
    K = local_stiffness(ops)
    assert np.allclose(K, K.T)
    eigvals = np.linalg.eigvalsh(K)
    scale = eigvals.max()
    assert eigvals.min() > -1e-10 * scale
    assert int(np.sum(eigvals < 1e-10 * scale)) == basis_count(p.p1 - 1)


def test_local_stiffness_is_exact_on_polynomials():
    p = _params(2, 2, 4)
    mesh = generate("hex", 1)
    ops = build_element_operators(p, mesh, 1)
    rng = np.random.default_rng(3)
    a = PolyCoeffs(ops.space.basis, rng.standard_normal(basis_count(p.r)))
    b = PolyCoeffs(ops.space.basis, rng.standard_normal(basis_count(p.r)))
    K = local_stiffness(ops)
    got = ops.D @ a.coeffs @ K @ (ops.D @ b.coeffs)
    expected = poly_bilinear(a, b, p.p1, ops.space.cell_rule())
    assert got == pytest.approx(expected, rel=1e-8)


def test_stabilization_scaling(monkeypatch):
    p = _params(2, 2, 3)
    ops = build_element_operators(p, generate("square", 1), 0)
    floor = ops.space.h ** -2
    diagonal = np.diag(stabilization(ops))
    consistency = np.diag(ops.pi_star.T @ ops.G @ ops.pi_star)
    assert np.allclose(diagonal, np.maximum(floor, consistency))
    assert np.all(diagonal >= floor)
    assert np.allclose(stabilization(ops), np.diag(diagonal))

    monkeypatch.setattr(settings, "stabilization_recipe", "dofi")
    assert np.allclose(stabilization(ops), floor * np.eye(ops.n_dof))


@pytest.mark.parametrize("params", [(1, 1, 2), (1, 2, 3), (2, 2, 3), (2, 2, 4), (2, 3, 4)])
@pytest.mark.parametrize("family", ["perturbed", "hex"])
def test_stabilization_spectrum_is_bounded(params, family):
    p = _params(*params)
    mesh = generate(family, 1, seed=1)
    for cell in range(mesh.n_cells):
        lo, hi = stabilization_spectrum(build_element_operators(p, mesh, cell))
        assert 1e-3 <= lo <= hi <= 1e3


def test_local_load_vanishes_for_zero_load():
    p = _params(1, 1, 3)
    ops = build_element_operators(p, generate("square", 1), 0)
    assert np.allclose(local_load(ops, _zero_solution(1)), 0.0)


def test_assembled_matrix_symmetric_and_threads_agree():
    p = _params(2, 2, 4)
    mesh = generate("perturbed", 2, seed=2)
    solution = get_solution("bubble", p)
    serial = assemble(mesh, p, solution, workers=1)
    threaded = assemble(mesh, p, solution, workers=3)
    assert serial.matrix.shape == (serial.n_dof, serial.n_dof)
    assert abs(serial.matrix - serial.matrix.T).max() < 1e-10 * abs(serial.matrix).max()
    assert abs(serial.matrix - threaded.matrix).max() == pytest.approx(0.0, abs=1e-12)
    assert np.allclose(serial.rhs, threaded.rhs)


def test_clamped_constraint_counts():
    p = _params(1, 1, 1)
    system = assemble(generate("square", 1), p, _zero_solution(1))
    apply_clamped_bcs(system)
    assert system.diagnostics["n_constraints"] == 8
    assert system.diagnostics["n_free"] == 1
    assert system.transform.shape == (9, 1)
    assert np.allclose(system.offset, 0.0)


def test_zero_load_gives_zero_solution():
    p = _params(2, 2, 3)
    system = assemble(generate("square", 2), p, _zero_solution(2))
    x = solve(system)
    assert np.allclose(x, 0.0)
    assert system.diagnostics["reduced_size"] > 0


@pytest.mark.parametrize("params", [(1, 1, 2), (2, 2, 2), (2, 2, 3), (1, 2, 3)])
def test_patch_test_reproduces_polynomials(params):
    p = _params(*params)
    mesh = generate("perturbed", 3, seed=11)
    solution = get_solution("poly-patch", p, seed=4)
    system = assemble(mesh, p, solution)
    apply_clamped_bcs(system, solution)
    x = solve(system)
    report = error_norms(system, solution)
    assert report.energy_err <= 1e-7 * report.u_energy_norm
    assert report.l2_err <= 1e-7
    assert np.allclose(x, interpolate_dofs(mesh, system.dofmap, solution), atol=1e-7)


def test_sparse_path_matches_dense(monkeypatch):
    p = _params(1, 1, 2)
    mesh = generate("square", 2)
    solution = get_solution("sin", p)
    dense = assemble(mesh, p, solution)
    apply_clamped_bcs(dense, solution)
    x_dense = solve(dense)
    monkeypatch.setattr(settings, "dense_solve_limit", 0)
    sparse = assemble(mesh, p, solution)
    apply_clamped_bcs(sparse, solution)
    x_sparse = solve(sparse)
    assert np.allclose(x_dense, x_sparse, atol=1e-10)


def test_singular_system_detected():
    p = _params(1, 1, 2)
    system = assemble(generate("square", 1), p, _zero_solution(1))
    system.matrix = scipy.sparse.csr_matrix(system.matrix.shape)
    with pytest.raises(SingularSystemError):
        solve(system)


def test_error_report_for_smooth_solution():
    p = _params(1, 1, 2)
    mesh = generate("square", 2)
    solution = get_solution("sin", p)
    system = assemble(mesh, p, solution)
    apply_clamped_bcs(system, solution)
    report = error_norms(system, solution, deterministic=True)
    assert report.params == "(1,1,2)"
    assert report.mesh == "square-grid:2"
    assert report.n_dof == system.dofmap.global_dim
    assert 0.0 < report.energy_err < report.u_energy_norm
    assert report.l2_err < report.energy_err
    assert report.assemble_s == 0.0 and report.solve_s == 0.0
    # p1 = 1: the Laplacian form and the full form coincide
    assert report.h_p1_seminorm_err == pytest.approx(report.energy_err, rel=1e-10)
    assert report.u_energy_norm == pytest.approx(np.pi / np.sqrt(2.0), rel=1e-6)
