"""
Convergence studies with manufactured solutions (slow; run with -m slow)
"""
import sys
from pathlib import Path

project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

import pytest

from src.core.commands import SolveCommands
from src.core.mesh import generate
from src.models.data_models import RunConfig
from src.services import ReportProcessor


def _study(p1, p2, r, mesh, levels, solution="sin"):
    config = RunConfig(
        subcommand="convergence",
        p1=p1,
        p2=p2,
        r=r,
        mesh=mesh,
        levels=levels,
        solution=solution,
        deterministic=True,
    )
    commands = SolveCommands(ReportProcessor(deterministic=True))
    reports = [
        commands.run_level(config.space_params, generate(mesh, level, seed=0), config)
        for level in range(config.levels[0], config.levels[1] + 1)
    ]
    return config, reports, commands.report_processor.fit_slopes(reports)


@pytest.mark.slow
@pytest.mark.parametrize(
    "p1,p2,r,band",
    [
        (1, 1, 2, 0.25),
        (2, 2, 2, 0.3),
        (2, 2, 3, 0.25),
        (1, 2, 2, 0.4),
        (3, 3, 3, 0.4),
    ],
)
def test_energy_rate_on_square_grids(p1, p2, r, band):
    config, reports, slopes = _study(p1, p2, r, "square", "2..5")
    expected = config.space_params.expected_rate
    assert all(b.energy_err < a.energy_err for a, b in zip(reports, reports[1:]))
    assert abs(slopes["energy"] - expected) <= band


@pytest.mark.slow
@pytest.mark.parametrize(
    "p1,p2,r,mesh",
    [
        (1, 1, 2, "perturbed"),
        (2, 2, 4, "square"),
        (2, 2, 3, "hex"),
    ],
)
def test_energy_rate_on_general_meshes(p1, p2, r, mesh):
    config, reports, slopes = _study(p1, p2, r, mesh, "2..4")
    expected = config.space_params.expected_rate
    assert all(b.energy_err < a.energy_err for a, b in zip(reports, reports[1:]))
    assert abs(slopes["energy"] - expected) < 0.4


@pytest.mark.slow
def test_bubble_errors_decrease_with_enhanced_space():
    _, reports, slopes = _study(2, 2, 3, "square", "1..3", solution="bubble")
    assert all(r.residual < 1e-8 for r in reports)
    assert slopes["energy"] > 1.5
