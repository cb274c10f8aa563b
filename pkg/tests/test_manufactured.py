"""
Manufactured solutions and their loads
"""
import gc
import sys
import weakref
from pathlib import Path

project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

import numpy as np
import pytest

from src.core.manufactured import bubble_polynomial, get_solution
from src.models.data_models import SpaceParams
from src.utils.error_handler import ConfigurationError

POINTS = np.array([[0.2, 0.3], [0.5, 0.5], [0.9, 0.15]])


def test_bubble_matches_closed_form():
    u = bubble_polynomial(2)
    x, y = POINTS[:, 0], POINTS[:, 1]
    assert np.allclose(u.evaluate(POINTS), (x * (1 - x) * y * (1 - y)) ** 2)


def test_sin_load_for_biharmonic():
    params = SpaceParams(p1=1, p2=1, r=2)
    solution = get_solution("sin", params)
    x, y = POINTS[:, 0], POINTS[:, 1]
    u = np.sin(np.pi * x) * np.sin(np.pi * y)
    assert np.allclose(solution.value(POINTS), u)
    assert np.allclose(solution.load(POINTS), 2 * np.pi ** 2 * u)
    assert np.allclose(solution.derivative((1, 0), POINTS), np.pi * np.cos(np.pi * x) * np.sin(np.pi * y))


def test_polynomial_load_sign():
    # (-Δ)^2 of the bubble squared is positive at the center
    params = SpaceParams(p1=2, p2=2, r=5)
    solution = get_solution("bubble", params)
    assert solution.homogeneous
    assert solution.load(np.array([[0.5, 0.5]]))[0] > 0.0


def test_patch_polynomial_is_seeded_and_inhomogeneous():
    params = SpaceParams(p1=1, p2=1, r=3)
    a = get_solution("poly-patch", params, seed=3)
    b = get_solution("poly-patch", params, seed=3)
    assert not a.homogeneous
    assert a.degree == 3
    assert np.array_equal(a.u.coeffs, b.u.coeffs)


def test_unknown_solution():
    with pytest.raises(ConfigurationError):
        get_solution("gaussian", SpaceParams(p1=1, p2=1, r=2))


def test_symbolic_derivatives_are_cached_per_instance():
    params = SpaceParams(p1=1, p2=1, r=2)
    solution = get_solution("sin", params)
    other = get_solution("sin", params)
    first = solution._derivative_fn(1, 0)
    assert solution._derivative_fn(1, 0) is first
    assert other._derivatives == {}

    ref = weakref.ref(solution)
    del solution, first
    gc.collect()
    assert ref() is None
