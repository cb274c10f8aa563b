"""
Command-line surface: parsing, dispatch, output formats and exit codes
"""
import sys
from pathlib import Path

project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

import pytest
import ujson

from src.core.commands import SolveCommands, create_command_registry, list_all_commands
from src.main import build_parser, main
from src.utils.error_handler import EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK, NumericalError

BASE = ["--p1", "1", "--p2", "1", "-r", "2", "--mesh", "square:1"]


def test_registry_lists_every_subcommand():
    registry = create_command_registry()
    assert set(registry) == {"solve", "convergence", "space-check"}
    names = {c["name"] for info in list_all_commands().values() for c in info["commands"]}
    assert names == set(registry)


def test_parser_defaults():
    args = build_parser().parse_args(["solve", "--p1", "2", "--p2", "2", "-r", "4"])
    assert args.mesh == "square:2"
    assert args.solution == "sin"
    assert args.format == "markdown"
    assert not args.deterministic


def test_r_below_p2_is_a_configuration_error(capsys):
    code = main(["solve", "--p1", "2", "--p2", "3", "-r", "2"])
    assert code == EXIT_CONFIG
    assert "error:" in capsys.readouterr().err


def test_unknown_mesh_family_exit_code(capsys):
    code = main(["solve", *BASE[:-1], "voronoi:2"])
    assert code == EXIT_CONFIG
    assert "neither a generator nor a file" in capsys.readouterr().err


def test_solve_markdown(capsys):
    assert main(["solve", *BASE, "--solution", "bubble"]) == EXIT_OK
    out = capsys.readouterr().out
    assert out.startswith("# Solve")
    assert "**Load case**: (a)" in out
    assert "square-grid:1" in out


def test_solve_json(capsys):
    assert main(["solve", *BASE, "--format", "json", "--deterministic"]) == EXIT_OK
    payload = ujson.loads(capsys.readouterr().out)
    assert payload["success"] is True
    assert payload["execution_time_ms"] == 0
    assert payload["data"]["params"] == "(1,1,2)"
    assert payload["data"]["solve_s"] == 0.0
    assert payload["load_case"] == "a"


def test_deterministic_csv_is_reproducible(tmp_path, capsys):
    first, second = tmp_path / "a.csv", tmp_path / "b.csv"
    for target in (first, second):
        assert main(["solve", *BASE, "--deterministic", "--out", str(target)]) == EXIT_OK
    capsys.readouterr()
    assert first.read_bytes() == second.read_bytes()
    header = first.read_text(encoding="utf-8").splitlines()[0]
    assert header == "params,mesh,h,N_dof,energy_err,h_p1_seminorm_err,l2_err,assemble_s,solve_s"


def test_numerical_failure_exit_code(mocker, capsys):
    mocker.patch.object(SolveCommands, "run_level", side_effect=NumericalError("factorization failed"))
    assert main(["solve", *BASE]) == EXIT_NUMERICAL
    assert "factorization failed" in capsys.readouterr().err


def test_convergence_rejects_mesh_files(tmp_path, capsys):
    mesh_file = tmp_path / "one.mesh"
    mesh_file.write_text("vem-mesh 1\nvertices 3\n0 0\n1 0\n0 1\ncells 1\n3 0 1 2\n", encoding="utf-8")
    code = main(
        ["convergence", "--p1", "1", "--p2", "1", "-r", "2", "--mesh", str(mesh_file), "--levels", "0..2"]
    )
    assert code == EXIT_CONFIG


def test_convergence_reports_rate_failure(mocker, capsys):
    processor_cls = "src.services.report_processor.ReportProcessor"
    mocker.patch(f"{processor_cls}.fit_slopes", return_value={"energy": 0.5, "h_p1_seminorm": 0.5, "l2": 1.0})
    code = main(
        ["convergence", *BASE[:-1], "square", "--levels", "0..2", "--rate-tolerance", "0.2"]
    )
    out = capsys.readouterr().out
    assert code == EXIT_NUMERICAL
    assert "rate: FAILED" in out


def test_space_check(capsys):
    code = main(["space-check", "--p1", "2", "--p2", "2", "-r", "4", "--mesh", "hex:1"])
    out = capsys.readouterr().out
    assert code == EXIT_OK
    assert "All checks passed." in out
    assert "| 0 | 4 | 0 | 1 | 4 |" in out


def test_main_dispatches_through_registry(mocker):
    handler = mocker.Mock(return_value=EXIT_OK)
    mocker.patch("src.main.create_command_registry", return_value={"solve": handler})
    assert main(["solve", *BASE]) == EXIT_OK
    config = handler.call_args.args[0]
    assert config.subcommand == "solve"
    assert config.mesh == "square:1"


@pytest.mark.parametrize("argv", [["solve"], ["bogus", *BASE]])
def test_argparse_errors_exit_with_usage(argv):
    with pytest.raises(SystemExit) as info:
        main(argv)
    assert info.value.code == 2


def test_check_space_report_fields():
    from src.core.commands.space_commands import check_space
    from src.core.mesh import generate
    from src.models.data_models import SpaceParams

    report = check_space(SpaceParams(p1=2, p2=2, r=3), generate("square", 1))
    assert report.passed
    assert report.enhanced_checked and report.enhanced_count_match
    assert report.local_dim_formula == report.local_dim_enumerated == [16] * 4
    assert report.kernel_dims == [report.kernel_expected] * 4 == [3] * 4
    assert report.gram_condition_max >= 1.0
    lo, hi = report.stabilization_range
    assert 0.0 < lo <= hi
