"""
Parameter validation and run configuration
"""
import sys
from pathlib import Path

project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

import pytest
from pydantic import ValidationError

from src.models.data_models import LoadCase, RunConfig, SpaceParams


def test_parameter_ordering_enforced():
    with pytest.raises(ValidationError):
        SpaceParams(p1=2, p2=2, r=1)
    with pytest.raises(ValidationError):
        SpaceParams(p1=2, p2=1, r=3)
    with pytest.raises(ValidationError):
        SpaceParams(p1=0, p2=1, r=1)


def test_enhanced_forced_in_middle_range():
    assert SpaceParams(p1=2, p2=2, r=3).enhanced
    assert SpaceParams(p1=2, p2=2, r=4).enhanced
    assert not SpaceParams(p1=2, p2=2, r=5).enhanced
    assert SpaceParams(p1=2, p2=2, r=5, enhanced=True).enhanced
    # p1 = 1: the range p2..p2 is empty above r = p2
    assert SpaceParams(p1=1, p2=1, r=1).enhanced
    assert not SpaceParams(p1=1, p2=1, r=2).enhanced


def test_load_case_and_rates():
    low = SpaceParams(p1=2, p2=2, r=5)
    assert low.load_case is LoadCase.PROJECTED_LOW
    assert low.expected_rate == 4
    assert low.high_regime
    assert low.label == "(2,2,5)"
    mid = SpaceParams(p1=2, p2=3, r=4)
    assert mid.load_case is LoadCase.PROJECTED_ENHANCED
    assert not mid.high_regime


def test_run_config_levels():
    config = RunConfig(subcommand="convergence", p1=1, p2=1, r=2, levels="1..3")
    assert config.levels == (1, 3)
    assert config.space_params.r == 2
    with pytest.raises(ValidationError):
        RunConfig(subcommand="convergence", p1=1, p2=1, r=2, levels="1..2")
    with pytest.raises(ValidationError):
        RunConfig(subcommand="convergence", p1=1, p2=1, r=2)
    with pytest.raises(ValidationError):
        RunConfig(subcommand="solve", p1=1, p2=1, r=2, levels="3")


def test_run_config_rejects_bad_values():
    with pytest.raises(ValidationError):
        RunConfig(subcommand="solve", p1=1, p2=1, r=2, solution="gaussian")
    with pytest.raises(ValidationError):
        RunConfig(subcommand="solve", p1=2, p2=2, r=1)
    with pytest.raises(ValidationError):
        RunConfig(subcommand="solve", p1=1, p2=1, r=2, rate_tolerance=0.0)
