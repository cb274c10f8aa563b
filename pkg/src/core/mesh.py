"""
Polygonal meshes: data model, geometric quantities, validation, text I/O and
the mesh families used by convergence studies.
"""
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import structlog
from scipy.spatial.distance import pdist

from src.config import settings
from src.utils.error_handler import ConfigurationError, MeshValidationError

logger = structlog.get_logger()

FORMAT_HEADER = "vem-mesh 1"


@dataclass(frozen=True)
class EdgeFrame:
    """One (cell, edge) incidence, oriented by the cell's counterclockwise traversal"""
    edge: int
    start: int
    end: int
    length: float
    midpoint: np.ndarray
    normal: np.ndarray   # outward w.r.t. the cell
    tangent: np.ndarray  # normal rotated by +90°, i.e. the traversal direction

    @property
    def orientation(self) -> int:
        """+1 when the traversal agrees with the global edge direction"""
        return 1 if self.start < self.end else -1

    def point_at(self, s: np.ndarray) -> np.ndarray:
        """Points at arclength s from the midpoint along the tangent."""
        s = np.asarray(s, dtype=float)
        return self.midpoint + s[:, None] * self.tangent


@dataclass(frozen=True)
class CellGeometry:
    cell: int
    vertex_ids: tuple[int, ...]
    coords: np.ndarray
    area: float
    centroid: np.ndarray
    diameter: float
    frames: tuple[EdgeFrame, ...]
    star_point: np.ndarray


def _signed_area(coords: np.ndarray) -> float:
    x, y = coords[:, 0], coords[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def _area_centroid(coords: np.ndarray) -> np.ndarray:
    x, y = coords[:, 0], coords[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    area = 0.5 * cross.sum()
    cx = ((x + xn) * cross).sum() / (6.0 * area)
    cy = ((y + yn) * cross).sum() / (6.0 * area)
    return np.array([cx, cy])


def _segments_intersect(p1, p2, q1, q2) -> bool:
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1, d2 = orient(q1, q2, p1), orient(q1, q2, p2)
    d3, d4 = orient(p1, p2, q1), orient(p1, p2, q2)
    return (d1 * d2 < 0) and (d3 * d4 < 0)


class Mesh:
    """Immutable conforming polygonal mesh.

    Global edges are stored with their lower vertex index first; that is the
    global edge direction used by edge degrees of freedom.
    """

    def __init__(
        self,
        vertices: np.ndarray,
        cells: Sequence[Sequence[int]],
        star_points: Optional[dict[int, Sequence[float]]] = None,
        name: str = "mesh",
    ):
        verts = np.array(vertices, dtype=float)
        if verts.ndim != 2 or verts.shape[1] != 2:
            raise MeshValidationError("vertices must be an (N, 2) array")
        verts.setflags(write=False)
        self.vertices = verts
        self.cells: tuple[tuple[int, ...], ...] = tuple(tuple(int(i) for i in c) for c in cells)
        self.star_points = {int(k): np.asarray(v, dtype=float) for k, v in (star_points or {}).items()}
        self.name = name

        self._validate_cells()
        self._build_edges()
        self._build_geometry()
        self._check_hanging_nodes()

        logger.debug(
            "Mesh built",
            mesh=name,
            n_vertices=self.n_vertices,
            n_edges=self.n_edges,
            n_cells=self.n_cells,
            h=self.h,
        )

    # ------------------------------------------------------------------
    # construction
    # ------------------------------------------------------------------

    def _validate_cells(self) -> None:
        n_vertices = self.vertices.shape[0]
        used = np.zeros(n_vertices, dtype=bool)
        for c, cell in enumerate(self.cells):
            if len(cell) < 3:
                raise MeshValidationError("needs at least 3 vertices", cell=c)
            if len(set(cell)) != len(cell):
                raise MeshValidationError("duplicate vertex in cell", cell=c)
            if min(cell) < 0 or max(cell) >= n_vertices:
                raise MeshValidationError("vertex index out of range", cell=c)
            used[list(cell)] = True
            coords = self.vertices[list(cell)]
            area = _signed_area(coords)
            scale = float(np.max(pdist(coords))) ** 2
            if area <= 1e-14 * scale:
                raise MeshValidationError(
                    "clockwise or degenerate polygon (signed area %.3e)" % area, cell=c
                )
            k = len(cell)
            for i in range(k):
                for j in range(i + 2, k):
                    if i == 0 and j == k - 1:
                        continue
                    if _segments_intersect(
                        coords[i], coords[(i + 1) % k], coords[j], coords[(j + 1) % k]
                    ):
                        raise MeshValidationError("self-intersecting polygon", cell=c)
        if not used.all():
            raise MeshValidationError(
                f"vertex {int(np.argmin(used))} is not referenced by any cell"
            )

    def _build_edges(self) -> None:
        edge_id: dict[tuple[int, int], int] = {}
        edge_cells: list[list[int]] = []
        edge_dirs: list[list[tuple[int, int]]] = []
        cell_edges = []
        for c, cell in enumerate(self.cells):
            local = []
            for i in range(len(cell)):
                a, b = cell[i], cell[(i + 1) % len(cell)]
                key = (min(a, b), max(a, b))
                if key not in edge_id:
                    edge_id[key] = len(edge_cells)
                    edge_cells.append([])
                    edge_dirs.append([])
                e = edge_id[key]
                edge_cells[e].append(c)
                edge_dirs[e].append((a, b))
                local.append(e)
            cell_edges.append(tuple(local))

        for e, cells in enumerate(edge_cells):
            if len(cells) > 2:
                raise MeshValidationError(
                    f"non-conforming mesh: edge {e} shared by {len(cells)} cells",
                    cell=cells[2],
                )
            if len(cells) == 2 and edge_dirs[e][0] == edge_dirs[e][1]:
                raise MeshValidationError(
                    f"non-conforming mesh: edge {e} traversed in the same direction by "
                    f"cells {cells[0]} and {cells[1]}",
                    cell=cells[1],
                )

        self.edges = np.array(sorted(edge_id, key=edge_id.get), dtype=int).reshape(-1, 2)
        self.edge_cells = tuple(tuple(c) for c in edge_cells)
        self.cell_edges = tuple(cell_edges)
        self.boundary_edges = np.array([len(c) == 1 for c in edge_cells], dtype=bool)
        self.boundary_vertices = np.zeros(self.n_vertices, dtype=bool)
        self.boundary_vertices[self.edges[self.boundary_edges].ravel()] = True

    def _build_geometry(self) -> None:
        a = self.vertices[self.edges[:, 0]]
        b = self.vertices[self.edges[:, 1]]
        self.edge_lengths = np.linalg.norm(b - a, axis=1)
        self.edge_midpoints = 0.5 * (a + b)
        self.edge_tangents = (b - a) / self.edge_lengths[:, None]
        self.edge_normals = np.stack([self.edge_tangents[:, 1], -self.edge_tangents[:, 0]], axis=1)

        self.cell_areas = np.array([_signed_area(self.vertices[list(c)]) for c in self.cells])
        self.centroids = np.array([_area_centroid(self.vertices[list(c)]) for c in self.cells])
        self.diameters = np.array([float(np.max(pdist(self.vertices[list(c)]))) for c in self.cells])

        total = np.zeros(self.n_vertices)
        count = np.zeros(self.n_vertices)
        for c, cell in enumerate(self.cells):
            total[list(cell)] += self.diameters[c]
            count[list(cell)] += 1
        self.vertex_h = total / count

    def _check_hanging_nodes(self) -> None:
        for e in np.flatnonzero(self.boundary_edges):
            a = self.vertices[self.edges[e, 0]]
            t = self.edge_tangents[e]
            rel = self.vertices - a
            along = rel @ t
            across = rel[:, 0] * t[1] - rel[:, 1] * t[0]
            tol = 1e-10 * self.edge_lengths[e]
            inside = (np.abs(across) <= tol) & (along > tol) & (along < self.edge_lengths[e] - tol)
            if inside.any():
                raise MeshValidationError(
                    f"non-conforming mesh: vertex {int(np.argmax(inside))} hangs on edge {e}",
                    cell=self.edge_cells[e][0],
                )

    # ------------------------------------------------------------------
    # queries
    # ------------------------------------------------------------------

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_edges(self) -> int:
        return self.edges.shape[0]

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @property
    def h(self) -> float:
        return float(self.diameters.max())

    def edge_frames(self, cell: int) -> tuple[EdgeFrame, ...]:
        ids = self.cells[cell]
        frames = []
        for i, e in enumerate(self.cell_edges[cell]):
            a, b = ids[i], ids[(i + 1) % len(ids)]
            pa, pb = self.vertices[a], self.vertices[b]
            length = float(self.edge_lengths[e])
            t = (pb - pa) / length
            n = np.array([t[1], -t[0]])
            frames.append(EdgeFrame(e, a, b, length, 0.5 * (pa + pb), n, t))
        return tuple(frames)

    def geometry(self, cell: int) -> CellGeometry:
        ids = self.cells[cell]
        centroid = self.centroids[cell]
        return CellGeometry(
            cell=cell,
            vertex_ids=ids,
            coords=self.vertices[list(ids)],
            area=float(self.cell_areas[cell]),
            centroid=centroid,
            diameter=float(self.diameters[cell]),
            frames=self.edge_frames(cell),
            star_point=self.star_points.get(cell, centroid),
        )


# ----------------------------------------------------------------------
# text format
# ----------------------------------------------------------------------

def load(text: str, name: str = "mesh") -> Mesh:
    lines = [
        ln.strip() for ln in text.splitlines()
        if ln.strip() and not ln.strip().startswith("#")
    ]
    pos = 0

    def next_line() -> str:
        nonlocal pos
        if pos >= len(lines):
            raise MeshValidationError("unexpected end of mesh file")
        pos += 1
        return lines[pos - 1]

    if next_line() != FORMAT_HEADER:
        raise MeshValidationError(f"missing '{FORMAT_HEADER}' header")
    try:
        tag, count = next_line().split()
        if tag != "vertices":
            raise MeshValidationError("expected 'vertices N'")
        vertices = [[float(v) for v in next_line().split()] for _ in range(int(count))]
        tag, count = next_line().split()
        if tag != "cells":
            raise MeshValidationError("expected 'cells M'")
        cells, stars = [], {}
        for c in range(int(count)):
            fields = [int(v) for v in next_line().split()]
            if fields[0] != len(fields) - 1:
                raise MeshValidationError("vertex count does not match the cell line", cell=c)
            cells.append(fields[1:])
            if pos < len(lines) and lines[pos].startswith("star"):
                _, sx, sy = next_line().split()
                stars[c] = (float(sx), float(sy))
    except ValueError as e:
        raise MeshValidationError(f"malformed mesh text: {e}") from e
    if any(len(v) != 2 for v in vertices):
        raise MeshValidationError("vertex lines must hold exactly two coordinates")
    return Mesh(np.array(vertices).reshape(-1, 2), cells, star_points=stars, name=name)


def save(mesh: Mesh) -> str:
    out = [FORMAT_HEADER, f"vertices {mesh.n_vertices}"]
    out += [f"{x!r} {y!r}" for x, y in mesh.vertices.tolist()]
    out.append(f"cells {mesh.n_cells}")
    for c, cell in enumerate(mesh.cells):
        out.append(" ".join(str(v) for v in (len(cell), *cell)))
        if c in mesh.star_points:
            sx, sy = mesh.star_points[c].tolist()
            out.append(f"star {sx!r} {sy!r}")
    return "\n".join(out) + "\n"


def load_file(path: str | Path) -> Mesh:
    path = Path(path)
    return load(path.read_text(encoding="utf-8"), name=path.name)


# ----------------------------------------------------------------------
# generators
# ----------------------------------------------------------------------

class MeshFamily(str, Enum):
    SQUARE_GRID = "square-grid"
    PERTURBED_QUADS = "perturbed-quads"
    HEX_DOMINANT = "hex-dominant"


FAMILY_ALIASES = {
    "square": MeshFamily.SQUARE_GRID,
    "perturbed": MeshFamily.PERTURBED_QUADS,
    "hex": MeshFamily.HEX_DOMINANT,
}


def _grid(n: int) -> tuple[np.ndarray, list[list[int]]]:
    xs = np.linspace(0.0, 1.0, n + 1)
    gx, gy = np.meshgrid(xs, xs)
    vertices = np.stack([gx.ravel(), gy.ravel()], axis=1)
    cells = []
    for j in range(n):
        for i in range(n):
            v = j * (n + 1) + i
            cells.append([v, v + 1, v + n + 2, v + n + 1])
    return vertices, cells


def _perturbed(level: int, seed: int) -> tuple[np.ndarray, list[list[int]]]:
    n = 2 ** level
    vertices, cells = _grid(n)
    rng = np.random.default_rng(seed)
    delta = settings.perturbation_fraction * (1.0 / n) / np.sqrt(2.0)
    interior = (
        (vertices[:, 0] > 0.0) & (vertices[:, 0] < 1.0)
        & (vertices[:, 1] > 0.0) & (vertices[:, 1] < 1.0)
    )
    jitter = rng.uniform(-delta, delta, size=vertices.shape)
    vertices = vertices + jitter * interior[:, None]
    return vertices, cells


def _hex_dominant(level: int) -> tuple[np.ndarray, list[list[int]]]:
    # offset brick rows; interior horizontal lines zig-zag so full bricks are hexagons
    n = m = 2 ** level
    dx, dy = 1.0 / n, 1.0 / m
    vertices = np.zeros(((n + 1) * (m + 1), 2))
    for k in range(m + 1):
        for i in range(n + 1):
            shift = 0.0
            if 0 < k < m:
                shift = settings.hex_offset * dy * (1 if (i + k) % 2 == 0 else -1)
            vertices[k * (n + 1) + i] = (i * dx, k * dy + shift)
    cells = []
    for k in range(m):
        cuts = sorted({0, n} | {i for i in range(1, n) if i % 2 == k % 2})
        for c0, c1 in zip(cuts[:-1], cuts[1:]):
            bottom = [k * (n + 1) + i for i in range(c0, c1 + 1)]
            top = [(k + 1) * (n + 1) + i for i in range(c1, c0 - 1, -1)]
            cells.append(bottom + top)
    return vertices, cells


def generate(family: str | MeshFamily, level: int, seed: Optional[int] = None) -> Mesh:
    """Mesh of the unit square from a named family at refinement `level`."""
    try:
        fam = FAMILY_ALIASES.get(str(family)) or MeshFamily(family)
    except ValueError as e:
        raise ConfigurationError(f"unknown mesh family '{family}'") from e
    if level < 0:
        raise ConfigurationError(f"mesh level must be non-negative, got {level}")
    seed = settings.default_seed if seed is None else seed

    if fam is MeshFamily.SQUARE_GRID:
        vertices, cells = _grid(2 ** level)
    elif fam is MeshFamily.PERTURBED_QUADS:
        vertices, cells = _perturbed(level, seed)
    else:
        vertices, cells = _hex_dominant(level)
    return Mesh(vertices, cells, name=f"{fam.value}:{level}")


def parse_mesh_source(source: str, seed: Optional[int] = None, level: Optional[int] = None) -> Mesh:
    """Resolve 'file', 'square:L', 'perturbed:L' or 'hex:L'.

    An explicit `level` overrides the one in the source string.
    """
    family, sep, lvl = source.partition(":")
    if family in FAMILY_ALIASES or family in {f.value for f in MeshFamily}:
        if level is None:
            if not sep:
                raise ConfigurationError(f"mesh source '{source}' needs a level, e.g. {family}:3")
            try:
                level = int(lvl)
            except ValueError as e:
                raise ConfigurationError(f"invalid mesh level in '{source}'") from e
        return generate(family, level, seed)
    path = Path(source)
    if not path.is_file():
        raise ConfigurationError(f"mesh source '{source}' is neither a generator nor a file")
    try:
        return load_file(path)
    except MeshValidationError as e:
        raise ConfigurationError(f"invalid mesh file '{source}': {e}") from e


def random_polygon_mesh(rng: np.random.Generator, n_vertices: int) -> Mesh:
    """Single-cell mesh of a random polygon, star-shaped w.r.t. the origin."""
    base = np.arange(n_vertices) + 0.4 * rng.uniform(0.0, 1.0, n_vertices)
    angles = 2.0 * np.pi * base / n_vertices
    radii = rng.uniform(0.5, 1.0, n_vertices)
    vertices = np.stack([radii * np.cos(angles), radii * np.sin(angles)], axis=1)
    return Mesh(vertices, [list(range(n_vertices))], star_points={0: (0.0, 0.0)}, name="random-polygon")
