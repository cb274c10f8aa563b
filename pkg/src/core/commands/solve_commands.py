import time
from typing import List, Tuple

import structlog

from src.core.manufactured import get_solution
from src.core.mesh import FAMILY_ALIASES, Mesh, MeshFamily
from src.core.solver import apply_clamped_bcs, assemble, error_norms, solve
from src.models.command_schemas import ConvergenceOutput, SolveOutput
from src.models.data_models import ErrorReport, RunConfig, SpaceParams
from src.utils.error_handler import (
    EXIT_NUMERICAL,
    EXIT_OK,
    ConfigurationError,
    handle_command_error,
)

from .base_commands import BaseCommands

logger = structlog.get_logger()


class SolveCommands(BaseCommands):

    def run_level(self, params: SpaceParams, mesh: Mesh, config: RunConfig) -> ErrorReport:
        solution = get_solution(config.solution, params, config.seed)
        system = assemble(mesh, params, solution)
        apply_clamped_bcs(system, solution)
        solve(system)
        return error_norms(system, solution, deterministic=config.deterministic)

    @handle_command_error
    def solve(self, config: RunConfig) -> int:
        start = time.perf_counter()
        params = config.space_params
        logger.info("Solving", params=params.label, mesh=config.mesh, solution=config.solution)

        report = self.run_level(params, self._load_mesh(config), config)
        csv_path = None
        if config.out:
            csv_path = str(self.report_processor.write_csv(config.out, [report]))

        output = SolveOutput(
            success=True,
            execution_time_ms=0 if config.deterministic else self._elapsed_ms(start),
            data=report,
            load_case=params.load_case.value,
            csv_path=csv_path,
        )
        self._emit(self._render(output, config, self._format_solve(output, config)))
        return EXIT_OK

    @handle_command_error
    def convergence(self, config: RunConfig) -> int:
        start = time.perf_counter()
        params = config.space_params
        lo, hi = config.levels
        family = config.mesh.partition(":")[0]
        if family not in FAMILY_ALIASES and family not in {f.value for f in MeshFamily}:
            raise ConfigurationError(f"convergence needs a generated mesh family, got '{config.mesh}'")
        logger.info("Convergence study", params=params.label, mesh=config.mesh, levels=f"{lo}..{hi}")

        reports = [
            self.run_level(params, self._load_mesh(config, level), config)
            for level in range(lo, hi + 1)
        ]
        slopes = self.report_processor.fit_slopes(reports)
        passed = self.report_processor.rate_ok(slopes, params.expected_rate, config.rate_tolerance)
        csv_path = None
        if config.out:
            csv_path = str(self.report_processor.write_csv(config.out, reports))

        output = ConvergenceOutput(
            success=True,
            execution_time_ms=0 if config.deterministic else self._elapsed_ms(start),
            data=reports,
            slopes=slopes,
            expected_slope=params.expected_rate,
            passed=passed,
            csv_path=csv_path,
        )
        logger.info("Measured rates", slopes=slopes, expected=params.expected_rate, passed=passed)
        self._emit(self._render(output, config, self._format_convergence(output, config)))
        return EXIT_OK if passed is not False else EXIT_NUMERICAL

    def _report_rows(self, reports: List[ErrorReport]) -> List[List[str]]:
        return [
            [
                r.mesh,
                self._format_float(r.h, 3),
                r.n_dof,
                self._format_float(r.energy_err),
                self._format_float(r.h_p1_seminorm_err),
                self._format_float(r.l2_err),
            ]
            for r in reports
        ]

    def _format_solve(self, output: SolveOutput, config: RunConfig) -> str:
        report = output.data
        content = self._format_header("Solve", config)
        content += f"**Solution**: {config.solution}\n"
        content += f"**Load case**: ({output.load_case})\n\n"
        content += self._format_table(
            ["mesh", "h", "N_dof", "energy", "H^p1 seminorm", "L2"], self._report_rows([report])
        )
        content += f"\n**Relative energy error**: {self._format_float(report.relative_energy_err)}\n"
        content += f"**Solver residual**: {self._format_float(report.residual, 2)}\n"
        if output.csv_path:
            content += f"**CSV**: {output.csv_path}\n"
        return content

    def _format_convergence(self, output: ConvergenceOutput, config: RunConfig) -> str:
        content = self._format_header("Convergence", config)
        content += f"**Solution**: {config.solution}\n\n"
        content += self._format_table(
            ["mesh", "h", "N_dof", "energy", "H^p1 seminorm", "L2"], self._report_rows(output.data)
        )
        content += "\n## Rates\n\n"
        rows: List[Tuple[str, str]] = [(name, f"{slope:.3f}") for name, slope in output.slopes.items()]
        content += self._format_table(["norm", "slope"], [list(r) for r in rows])
        content += f"\n**Expected energy slope**: {output.expected_slope}\n"
        if output.passed is not None:
            content += self._format_check("rate", output.passed, f"tolerance {config.rate_tolerance}")
        if output.csv_path:
            content += f"**CSV**: {output.csv_path}\n"
        return content
