"""Legacy-VTK ASCII export of meshes and nodal fields.

Files carry an unstructured grid (POINTS / CELLS / CELL_TYPES with cell
type 5 = triangle) and, for snapshots, one scalar POINT_DATA array.
Floats are written with 17 significant digits so parsing a file back
reproduces the written values bit for bit.
"""

from __future__ import annotations

import numpy as np

from .mesh import Mesh


def _fmt(value: float) -> str:
    return format(float(value), ".17g")


def _grid_lines(mesh: Mesh) -> list[str]:
    lines = [
        "# vtk DataFile Version 3.0",
        "swarmfield unstructured grid",
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {mesh.n_nodes} double",
    ]
    for x, y in mesh.nodes:
        lines.append(f"{_fmt(x)} {_fmt(y)} 0")
    m = mesh.n_triangles
    lines.append(f"CELLS {m} {4 * m}")
    for a, b, c in mesh.triangles:
        lines.append(f"3 {a} {b} {c}")
    lines.append(f"CELL_TYPES {m}")
    lines.extend(["5"] * m)
    return lines


def export_mesh(mesh: Mesh, path) -> None:
    """Write the triangulation alone (no point data)."""
    with open(path, "w") as fh:
        fh.write("\n".join(_grid_lines(mesh)) + "\n")


def export_snapshot(field: np.ndarray, mesh: Mesh, path, name: str = "field") -> None:
    """Write one nodal scalar field on the triangulation.

    Raises
    ------
    ValueError
        If the field length does not match the node count.
    """
    field = np.asarray(field, dtype=float)
    if field.shape != (mesh.n_nodes,):
        raise ValueError(
            f"field must have length {mesh.n_nodes}, got shape {field.shape}"
        )
    lines = _grid_lines(mesh)
    lines.append(f"POINT_DATA {mesh.n_nodes}")
    lines.append(f"SCALARS {name} double 1")
    lines.append("LOOKUP_TABLE default")
    lines.extend(_fmt(v) for v in field)
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_snapshot(path) -> tuple[np.ndarray, np.ndarray, np.ndarray | None]:
    """Parse a file written by export_mesh/export_snapshot.

    Returns (points, triangles, values); values is None for plain mesh
    files.  Only the subset of the legacy format written here is
    understood.
    """
    with open(path) as fh:
        tokens = fh.read().split("\n")
    idx = 0

    def expect(prefix: str) -> list[str]:
        nonlocal idx
        while tokens[idx].strip() == "":
            idx += 1
        line = tokens[idx]
        if not line.startswith(prefix):
            raise ValueError(f"expected {prefix!r} at line {idx + 1}, got {line!r}")
        idx += 1
        return line.split()

    for _ in range(4):  # header, title, ASCII, DATASET
        idx += 1
    n_points = int(expect("POINTS")[1])
    points = np.array(
        [[float(v) for v in tokens[idx + i].split()[:2]] for i in range(n_points)]
    )
    idx += n_points
    n_cells = int(expect("CELLS")[1])
    triangles = np.array(
        [[int(v) for v in tokens[idx + i].split()[1:]] for i in range(n_cells)],
        dtype=np.int64,
    )
    idx += n_cells
    expect("CELL_TYPES")
    idx += n_cells

    values = None
    while idx < len(tokens) and tokens[idx].strip() == "":
        idx += 1
    if idx < len(tokens) and tokens[idx].startswith("POINT_DATA"):
        idx += 3  # POINT_DATA, SCALARS, LOOKUP_TABLE
        values = np.array([float(tokens[idx + i]) for i in range(n_points)])
    return points, triangles, values
