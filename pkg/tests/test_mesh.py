"""
Mesh construction, validation, text format and generators
"""
import sys
from pathlib import Path

project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

import numpy as np
import pytest

from src.core.mesh import (
    Mesh,
    generate,
    load,
    load_file,
    parse_mesh_source,
    random_polygon_mesh,
    save,
)
from src.utils.error_handler import ConfigurationError, MeshValidationError

TRIANGLE = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])


def test_square_grid_counts():
    mesh = generate("square", 2)
    assert mesh.name == "square-grid:2"
    assert (mesh.n_vertices, mesh.n_edges, mesh.n_cells) == (25, 40, 16)
    assert mesh.boundary_edges.sum() == 16
    assert mesh.boundary_vertices.sum() == 16
    assert mesh.h == pytest.approx(np.sqrt(2.0) / 4.0)
    assert mesh.cell_areas.sum() == pytest.approx(1.0)


def test_edges_are_stored_low_to_high():
    mesh = generate("square", 1)
    assert np.all(mesh.edges[:, 0] < mesh.edges[:, 1])
    for c in range(mesh.n_cells):
        for frame in mesh.edge_frames(c):
            expected = 1 if frame.start < frame.end else -1
            assert frame.orientation == expected
            # outward normal points away from the centroid
            assert np.dot(frame.midpoint - mesh.centroids[c], frame.normal) > 0.0


def test_hex_dominant_counts():
    mesh = generate("hex", 2)
    assert mesh.n_cells == 10
    assert mesh.n_vertices == 25
    assert mesh.n_edges == 34
    assert max(len(c) for c in mesh.cells) == 6
    assert mesh.cell_areas.sum() == pytest.approx(1.0)


def test_perturbed_keeps_boundary_and_is_seeded():
    grid = generate("square", 3)
    a = generate("perturbed", 3, seed=7)
    b = generate("perturbed", 3, seed=7)
    c = generate("perturbed", 3, seed=8)
    assert np.array_equal(a.vertices, b.vertices)
    assert not np.array_equal(a.vertices, c.vertices)
    boundary = grid.boundary_vertices
    assert np.array_equal(a.vertices[boundary], grid.vertices[boundary])
    assert not np.allclose(a.vertices[~boundary], grid.vertices[~boundary])
    assert a.cell_areas.sum() == pytest.approx(1.0)


def test_generate_rejects_bad_input():
    with pytest.raises(ConfigurationError):
        generate("voronoi", 2)
    with pytest.raises(ConfigurationError):
        generate("square", -1)


def test_clockwise_cell_rejected():
    with pytest.raises(MeshValidationError) as info:
        Mesh(TRIANGLE, [[0, 2, 1]])
    assert info.value.cell == 0


def test_short_and_duplicate_cells_rejected():
    with pytest.raises(MeshValidationError):
        Mesh(TRIANGLE, [[0, 1]])
    with pytest.raises(MeshValidationError):
        Mesh(TRIANGLE, [[0, 1, 1, 2]])
    with pytest.raises(MeshValidationError):
        Mesh(TRIANGLE, [[0, 1, 5]])


def test_unreferenced_vertex_rejected():
    verts = np.vstack([TRIANGLE, [[2.0, 2.0]]])
    with pytest.raises(MeshValidationError, match="not referenced"):
        Mesh(verts, [[0, 1, 2]])


def test_overlapping_cells_rejected():
    verts = np.vstack([TRIANGLE, [[0.5, 1.0]]])
    with pytest.raises(MeshValidationError, match="non-conforming"):
        Mesh(verts, [[0, 1, 2], [0, 1, 3]])


def test_self_intersecting_cell_rejected():
    verts = np.array([[0.0, 0.0], [3.0, 0.0], [0.0, 1.0], [1.0, 2.0]])
    with pytest.raises(MeshValidationError, match="self-intersecting"):
        Mesh(verts, [[0, 1, 2, 3]])


def test_hanging_node_rejected():
    verts = np.array(
        [
            [0.0, 0.0], [1.0, 0.0], [1.0, 2.0], [0.0, 2.0],
            [2.0, 0.0], [2.0, 1.0], [1.0, 1.0], [2.0, 2.0],
        ]
    )
    cells = [[0, 1, 2, 3], [1, 4, 5, 6], [6, 5, 7, 2]]
    with pytest.raises(MeshValidationError, match="hangs"):
        Mesh(verts, cells)


def test_save_then_load_preserves_mesh(tmp_path):
    mesh = random_polygon_mesh(np.random.default_rng(2), 7)
    text = save(mesh)
    assert text.startswith("vem-mesh 1\n")
    path = tmp_path / "poly.mesh"
    path.write_text(text, encoding="utf-8")
    back = load_file(path)
    assert back.name == "poly.mesh"
    assert np.array_equal(back.vertices, mesh.vertices)
    assert back.cells == mesh.cells
    assert np.array_equal(back.geometry(0).star_point, [0.0, 0.0])


def test_load_errors():
    with pytest.raises(MeshValidationError, match="header"):
        load("vertices 3\n0 0\n1 0\n0 1\ncells 1\n3 0 1 2\n")
    with pytest.raises(MeshValidationError):
        load("vem-mesh 1\nvertices 3\n0 0\n1 0\n0 1\ncells 1\n4 0 1 2\n")
    with pytest.raises(MeshValidationError, match="end of mesh file"):
        load("vem-mesh 1\nvertices 3\n0 0\n1 0\n")


def test_parse_mesh_source(tmp_path):
    assert parse_mesh_source("square:1").n_cells == 4
    assert parse_mesh_source("square:1", level=2).n_cells == 16
    with pytest.raises(ConfigurationError):
        parse_mesh_source("square")
    with pytest.raises(ConfigurationError):
        parse_mesh_source(str(tmp_path / "missing.mesh"))
    bad = tmp_path / "bad.mesh"
    bad.write_text("vem-mesh 1\nvertices 3\n0 0\n1 0\n0 1\ncells 1\n3 0 2 1\n", encoding="utf-8")
    with pytest.raises(ConfigurationError, match="invalid mesh file"):
        parse_mesh_source(str(bad))


def test_vertex_h_averages_cell_diameters():
    mesh = generate("square", 1)
    assert np.allclose(mesh.vertex_h, np.sqrt(2.0) / 2.0)


def test_geometry_of_unit_square():
    geo = generate("square", 0).geometry(0)
    assert geo.area == pytest.approx(1.0)
    assert np.allclose(geo.centroid, [0.5, 0.5])
    assert geo.diameter == pytest.approx(np.sqrt(2.0))
    bottom = geo.frames[0]
    assert np.allclose(bottom.normal, [0.0, -1.0])
    assert np.allclose(bottom.tangent, [1.0, 0.0])


def test_regular_hexagon_area():
    angles = np.arange(6) * np.pi / 3.0
    verts = np.stack([np.cos(angles), np.sin(angles)], axis=1)
    mesh = Mesh(verts, [list(range(6))])
    assert mesh.cell_areas[0] == pytest.approx(3.0 * np.sqrt(3.0) / 2.0)
    assert np.allclose(mesh.centroids[0], 0.0)


def test_nonconvex_cell_area():
    # L shape: 2x1 rectangle plus 1x1 square on top of its left half
    verts = np.array([[0.0, 0.0], [2.0, 0.0], [2.0, 1.0], [1.0, 1.0], [1.0, 2.0], [0.0, 2.0]])
    mesh = Mesh(verts, [list(range(6))], star_points={0: (0.5, 0.5)})
    assert mesh.cell_areas[0] == pytest.approx(3.0)
    assert np.allclose(mesh.centroids[0], [(2.0 * 1.0 + 1.0 * 0.5) / 3.0, (2.0 * 0.5 + 1.0 * 1.5) / 3.0])
