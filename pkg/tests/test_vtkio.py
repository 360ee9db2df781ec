import numpy as np
import pytest

import swarmfield as sf


def test_constant_field_on_two_triangles(tmp_path):
    mesh = sf.build_unit_square_mesh(1, 1)
    path = tmp_path / "field.vtk"
    sf.export_snapshot(np.ones(4), mesh, path)
    text = path.read_text()
    assert "POINTS 4 double" in text
    assert "CELLS 2 8" in text
    assert "CELL_TYPES 2" in text
    assert "POINT_DATA 4" in text
    points, triangles, values = sf.read_snapshot(path)
    assert points.shape == (4, 2)
    assert triangles.shape == (2, 3)
    assert np.all(values == 1.0)


def test_snapshot_roundtrip_is_bitwise(tmp_path):
    mesh = sf.build_unit_square_mesh(3, 2)
    rng = np.random.default_rng(8)
    field = rng.standard_normal(mesh.n_nodes) * 10.0 ** rng.integers(-8, 8, mesh.n_nodes)
    path = tmp_path / "field.vtk"
    sf.export_snapshot(field, mesh, path, name="q")
    points, triangles, values = sf.read_snapshot(path)
    assert np.array_equal(values, field)
    assert np.array_equal(points, mesh.nodes)
    assert np.array_equal(triangles, mesh.triangles)


def test_mesh_export_sections(tmp_path):
    mesh = sf.build_unit_square_mesh(2, 2)
    path = tmp_path / "mesh.vtk"
    sf.export_mesh(mesh, path)
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# vtk DataFile")
    assert lines[2] == "ASCII"
    assert lines[3] == "DATASET UNSTRUCTURED_GRID"
    assert "POINTS 9 double" in lines
    idx = lines.index("CELL_TYPES 8")
    assert set(lines[idx + 1 : idx + 9]) == {"5"}
    points, triangles, values = sf.read_snapshot(path)
    assert values is None
    assert np.array_equal(points, mesh.nodes)


def test_field_length_mismatch(tmp_path):
    mesh = sf.build_unit_square_mesh(1, 1)
    with pytest.raises(ValueError):
        sf.export_snapshot(np.ones(5), mesh, tmp_path / "x.vtk")


def test_triangle_connectivity_written_in_order(tmp_path):
    mesh = sf.build_unit_square_mesh(2, 1)
    path = tmp_path / "mesh.vtk"
    sf.export_mesh(mesh, path)
    _, triangles, _ = sf.read_snapshot(path)
    assert np.array_equal(triangles, mesh.triangles)
