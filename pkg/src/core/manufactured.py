"""
Manufactured solutions for (-Δ)^{p1} u = f on the unit square.

Built-ins:
  bubble      u = [x(1-x)y(1-y)]^{p1}, polynomial, clamped
  sin         u = sin(πx)^{p1} sin(πy)^{p1}, clamped
  poly-patch  seeded random polynomial of degree r, inhomogeneous boundary data
"""
from abc import ABC, abstractmethod
from typing import Callable

import numpy as np
import structlog
import sympy

from src.core.polycalc import (
    PolyCoeffs,
    ScaledMonomialBasis,
    basis_count,
    differentiate,
    laplacian_power,
    multiply,
)
from src.models.data_models import SOLUTION_NAMES, SpaceParams
from src.utils.error_handler import ConfigurationError

logger = structlog.get_logger()

_X, _Y = sympy.symbols("x y", real=True)
UNIT_FRAME = ScaledMonomialBasis((0.0, 0.0), 1.0, 0)


class ManufacturedSolution(ABC):
    """Exact u with all derivatives, and its load f = (-Δ)^{p1} u."""

    def __init__(self, name: str, p1: int, homogeneous: bool = True):
        self.name = name
        self.p1 = p1
        self.homogeneous = homogeneous

    @abstractmethod
    def derivative(self, nu, points: np.ndarray) -> np.ndarray:
        """D^ν u at points of shape (n, 2)."""

    @abstractmethod
    def load(self, points: np.ndarray) -> np.ndarray:
        """f = (-Δ)^{p1} u at points."""

    def value(self, points: np.ndarray) -> np.ndarray:
        return self.derivative((0, 0), points)


class PolynomialSolution(ManufacturedSolution):
    """u given exactly by coefficients in a global scaled monomial frame."""

    def __init__(self, name: str, p1: int, u: PolyCoeffs, homogeneous: bool = True):
        super().__init__(name, p1, homogeneous)
        self.u = u
        self.f = laplacian_power(u, p1).scaled((-1.0) ** p1)
        self._derivatives: dict[tuple[int, int], PolyCoeffs] = {}

    @property
    def degree(self) -> int:
        return self.u.degree

    def derivative(self, nu, points: np.ndarray) -> np.ndarray:
        key = (int(nu[0]), int(nu[1]))
        if key not in self._derivatives:
            self._derivatives[key] = differentiate(self.u, key)
        poly = self._derivatives[key]
        pts = np.atleast_2d(points)
        if poly.degree < 0:
            return np.zeros(pts.shape[0])
        return poly.evaluate(pts)

    def load(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(points)
        if self.f.degree < 0:
            return np.zeros(pts.shape[0])
        return self.f.evaluate(pts)


class SymbolicSolution(ManufacturedSolution):
    """u given as a sympy expression in x, y; derivatives are lambdified on demand."""

    def __init__(self, name: str, p1: int, expr: sympy.Expr, homogeneous: bool = True):
        super().__init__(name, p1, homogeneous)
        self.expr = expr
        lap = expr
        for _ in range(p1):
            lap = sympy.diff(lap, _X, 2) + sympy.diff(lap, _Y, 2)
        self.f_expr = (-1) ** p1 * lap
        self._load = self._compile(self.f_expr)
        self._derivatives: dict[tuple[int, int], Callable[[np.ndarray], np.ndarray]] = {}

    @staticmethod
    def _compile(expr: sympy.Expr):
        fn = sympy.lambdify((_X, _Y), expr, modules="numpy")

        def evaluate(points: np.ndarray) -> np.ndarray:
            pts = np.atleast_2d(points)
            return np.broadcast_to(fn(pts[:, 0], pts[:, 1]), (pts.shape[0],)).astype(float)

        return evaluate

    def _derivative_fn(self, a: int, b: int):
        key = (a, b)
        if key not in self._derivatives:
            expr = self.expr
            if a:
                expr = sympy.diff(expr, _X, a)
            if b:
                expr = sympy.diff(expr, _Y, b)
            self._derivatives[key] = self._compile(expr)
        return self._derivatives[key]

    def derivative(self, nu, points: np.ndarray) -> np.ndarray:
        return self._derivative_fn(int(nu[0]), int(nu[1]))(points)

    def load(self, points: np.ndarray) -> np.ndarray:
        return self._load(points)


def _linear(c0: float, cx: float, cy: float) -> PolyCoeffs:
    return PolyCoeffs(UNIT_FRAME.with_degree(1), [c0, cx, cy])


def bubble_polynomial(p1: int) -> PolyCoeffs:
    """[x(1-x)y(1-y)]^{p1} in the unit frame, built with exact products."""
    x = _linear(0.0, 1.0, 0.0)
    y = _linear(0.0, 0.0, 1.0)
    base = multiply(multiply(x, _linear(1.0, -1.0, 0.0)), multiply(y, _linear(1.0, 0.0, -1.0)))
    out = PolyCoeffs(UNIT_FRAME, [1.0])
    for _ in range(p1):
        out = multiply(out, base)
    return out


def patch_polynomial(degree: int, seed: int) -> PolyCoeffs:
    rng = np.random.default_rng(seed)
    return PolyCoeffs(UNIT_FRAME.with_degree(degree), rng.uniform(-1.0, 1.0, basis_count(degree)))


def get_solution(name: str, params: SpaceParams, seed: int = 0) -> ManufacturedSolution:
    if name not in SOLUTION_NAMES:
        raise ConfigurationError(
            f"unknown solution '{name}', expected one of {', '.join(SOLUTION_NAMES)}"
        )
    p1 = params.p1
    if name == "bubble":
        return PolynomialSolution(name, p1, bubble_polynomial(p1))
    if name == "sin":
        expr = (sympy.sin(sympy.pi * _X) * sympy.sin(sympy.pi * _Y)) ** p1
        return SymbolicSolution(name, p1, expr)
    logger.debug("Patch-test polynomial", degree=params.r, seed=seed)
    return PolynomialSolution(name, p1, patch_polynomial(params.r, seed), homogeneous=False)
