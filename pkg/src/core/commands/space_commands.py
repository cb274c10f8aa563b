import time
from typing import List

import numpy as np
import structlog

from src.config import settings
from src.core.mesh import Mesh
from src.core.polycalc import basis_count, gram_condition
from src.core.projectors import build_element_operators, enhancement_constraints
from src.core.solver import local_stiffness, stabilization_spectrum
from src.core.space import (
    GlobalDofMap,
    LocalSpace,
    edge_dof_count,
    enumerate_local,
    extra_dof_count,
    local_dim,
    trace_table,
    vertex_dof_count,
)
from src.models.command_schemas import SpaceCheckOutput
from src.models.data_models import DofKind, RunConfig, SpaceCheckReport, SpaceParams
from src.utils.error_handler import EXIT_NUMERICAL, EXIT_OK, handle_command_error

from .base_commands import BaseCommands

logger = structlog.get_logger()

PRESERVATION_LIMIT = 1e-9


def _numerical_rank(matrix: np.ndarray) -> int:
    if matrix.size == 0:
        return 0
    sigma = np.linalg.svd(matrix, compute_uv=False)
    return int(np.sum(sigma > settings.rank_tolerance * sigma[0]))


def _kernel_dimension(K: np.ndarray) -> int:
    eigvals = np.linalg.eigvalsh(K)
    scale = max(np.abs(eigvals).max(), np.finfo(float).tiny)
    return int(np.sum(eigvals < settings.kernel_tolerance * scale))


def check_space(params: SpaceParams, mesh: Mesh) -> SpaceCheckReport:
    """Structural diagnostics of the space on every cell of `mesh`."""
    dofmap = GlobalDofMap(mesh, params)
    formula, enumerated, ranks, kernels = [], [], [], []
    preservation = 0.0
    gram_cond = 0.0
    stab_lo, stab_hi = np.inf, 0.0
    enhanced_ok = None

    for cell in range(mesh.n_cells):
        formula.append(local_dim(params, mesh, cell))
        enumerated.append(enumerate_local(params, mesh, cell).count)
        ops = build_element_operators(params, mesh, cell)
        ranks.append(_numerical_rank(ops.D))
        preservation = max(preservation, ops.preservation_residual())
        gram_cond = max(gram_cond, gram_condition(ops.space.basis, ops.space.cell_rule()))
        kernels.append(_kernel_dimension(local_stiffness(ops)))
        lo, hi = stabilization_spectrum(ops)
        stab_lo, stab_hi = min(stab_lo, lo), max(stab_hi, hi)
        if params.enhanced:
            extended = LocalSpace(params, mesh, cell, extended=True).n_dof
            constraints = enhancement_constraints(ops.space, ops.pi_star_low)
            match = extended - _numerical_rank(constraints) == ops.n_dof
            enhanced_ok = match if enhanced_ok is None else (enhanced_ok and match)

    counts = {
        DofKind.VERTEX.value: mesh.n_vertices * vertex_dof_count(params),
        DofKind.EDGE.value: mesh.n_edges * edge_dof_count(params),
        DofKind.CELL.value: mesh.n_cells * basis_count(params.r - 2 * params.p1),
        "total": dofmap.global_dim,
    }
    if params.enhanced:
        counts[DofKind.CELL_EXTRA.value] = mesh.n_cells * extra_dof_count(params)

    report = SpaceCheckReport(
        params=params.label,
        mesh=mesh.name,
        n_cells=mesh.n_cells,
        dof_counts=counts,
        trace_table=trace_table(params),
        local_dim_formula=formula,
        local_dim_enumerated=enumerated,
        dimension_match=formula == enumerated,
        d_rank_min=min(ranks),
        d_rank_expected=basis_count(params.r),
        preservation_residual=preservation,
        enhanced_checked=params.enhanced,
        enhanced_count_match=enhanced_ok,
        stabilization_range=(float(stab_lo), float(stab_hi)),
        gram_condition_max=gram_cond,
        kernel_dims=kernels,
        kernel_expected=basis_count(params.p1 - 1),
    )
    report.passed = (
        report.dimension_match
        and report.d_rank_min == report.d_rank_expected
        and report.preservation_residual <= PRESERVATION_LIMIT
        and all(k == report.kernel_expected for k in kernels)
        and enhanced_ok is not False
    )
    logger.info(
        "Space check",
        params=params.label,
        mesh=mesh.name,
        passed=report.passed,
        stabilization_range=report.stabilization_range,
    )
    return report


class SpaceCommands(BaseCommands):

    @handle_command_error
    def space_check(self, config: RunConfig) -> int:
        start = time.perf_counter()
        report = check_space(config.space_params, self._load_mesh(config))
        output = SpaceCheckOutput(
            success=True,
            execution_time_ms=0 if config.deterministic else self._elapsed_ms(start),
            data=report,
        )
        self._emit(self._render(output, config, self._format_space_check(report, config)))
        return EXIT_OK if report.passed else EXIT_NUMERICAL

    def _format_space_check(self, report: SpaceCheckReport, config: RunConfig) -> str:
        content = self._format_header("Space Check", config)
        content += f"**Cells**: {report.n_cells}\n\n"

        content += "## DOF counts\n\n"
        content += self._format_table(["kind", "count"], [[k, v] for k, v in report.dof_counts.items()])

        content += "\n## Edge traces\n\n"
        rows: List[list] = [
            [row.j, row.alpha, row.beta, row.moments, row.endpoint_conditions]
            for row in report.trace_table
        ]
        content += self._format_table(["j", "alpha_j", "beta_j", "moments", "endpoint data"], rows)

        content += "\n## Checks\n\n"
        dims = sorted(set(report.local_dim_enumerated))
        content += self._format_check("local dimension formula", report.dimension_match, f"dims {dims}")
        content += self._format_check(
            "D matrix rank",
            report.d_rank_min == report.d_rank_expected,
            f"min {report.d_rank_min}, expected {report.d_rank_expected}",
        )
        content += self._format_check(
            "polynomial preservation",
            report.preservation_residual <= PRESERVATION_LIMIT,
            f"residual {self._format_float(report.preservation_residual, 2)}",
        )
        content += self._format_check(
            "stiffness kernel",
            all(k == report.kernel_expected for k in report.kernel_dims),
            f"expected {report.kernel_expected}",
        )
        content += self._format_check("enhanced space count", report.enhanced_count_match)
        lo, hi = report.stabilization_range
        content += (
            f"- stabilization spectrum: [{self._format_float(lo, 3)}, {self._format_float(hi, 3)}]\n"
        )
        content += f"- L2 Gram condition (max): {self._format_float(report.gram_condition_max, 3)}\n"
        content += "\nAll checks passed.\n" if report.passed else "\nSome checks FAILED.\n"
        return content
