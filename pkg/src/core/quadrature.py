"""
Quadrature on polygons (fan sub-triangulation with collapsed Gauss rules)
and on straight edges (Gauss–Legendre).
"""
from dataclasses import dataclass
from functools import lru_cache
from math import ceil

import numpy as np
from numpy.polynomial.legendre import leggauss

from src.core.mesh import EdgeFrame, Mesh
from src.utils.error_handler import MeshValidationError


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray
    weights: np.ndarray
    degree: int
    params: np.ndarray | None = None  # edge rules: arclength from the midpoint

    @property
    def measure(self) -> float:
        return float(self.weights.sum())

    def integrate(self, values: np.ndarray) -> float | np.ndarray:
        return np.tensordot(self.weights, values, axes=(0, 0))


@lru_cache(maxsize=64)
def _gauss01(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=64)
def _collapsed_triangle(degree: int) -> tuple[np.ndarray, np.ndarray]:
    """Reference-triangle rule exact to `degree`, weights summing to 1/2."""
    n = max(1, ceil((degree + 2) / 2))
    a, wa = _gauss01(n)
    b, wb = _gauss01(n)
    aa, bb = np.meshgrid(a, b, indexing="ij")
    xi = aa.ravel()
    eta = (bb * (1.0 - aa)).ravel()
    w = (np.outer(wa * (1.0 - a), wb)).ravel()
    return np.stack([xi, eta], axis=1), w


def cell_rule(mesh: Mesh, cell: int, degree: int) -> QuadratureRule:
    """Rule exact to `degree` built on the fan from the cell's star point."""
    ids = mesh.cells[cell]
    coords = mesh.vertices[list(ids)]
    apex = mesh.star_points.get(cell, mesh.centroids[cell])
    ref_pts, ref_w = _collapsed_triangle(degree)
    scale = mesh.diameters[cell] ** 2
    points, weights = [], []
    for i in range(len(ids)):
        p1, p2 = coords[i], coords[(i + 1) % len(ids)]
        e1, e2 = p1 - apex, p2 - apex
        det = e1[0] * e2[1] - e1[1] * e2[0]
        if det <= 1e-13 * scale:
            raise MeshValidationError(
                f"degenerate fan triangle at local edge {i}; the cell is not star-shaped "
                "w.r.t. its apex",
                cell=cell,
            )
        points.append(apex + ref_pts[:, :1] * e1 + ref_pts[:, 1:] * e2)
        weights.append(ref_w * det)
    return QuadratureRule(np.concatenate(points), np.concatenate(weights), degree)


def edge_rule(frame: EdgeFrame, degree: int) -> QuadratureRule:
    """ceil((d+1)/2)-point Gauss–Legendre on the edge, parameterized from its midpoint."""
    n = max(1, ceil((degree + 1) / 2))
    x, w = leggauss(n)
    s = 0.5 * frame.length * x
    return QuadratureRule(frame.point_at(s), 0.5 * frame.length * w, degree, params=s)
