"""Structured triangulations of the unit square with tagged boundary edges.

The mesh is the geometric substrate for everything else: nodes carry the
P1 degrees of freedom, triangles drive operator assembly, and boundary
edges carry tags that decide where the scalar field is pinned (source
segment vs. absorbing rest of the boundary).  The swarm-density problem
uses no tags at all: it is no-flux on the whole boundary.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np

# Boundary edge tags for the scalar-field problem.
DIRICHLET_SOURCE = "dirichlet_source"
DIRICHLET_ZERO = "dirichlet_zero"
NOFLUX_ONLY = "noflux_only"

_SIDES = ("left", "right", "bottom", "top")
_GEOM_TOL = 1e-12


@dataclass(frozen=True)
class BoundarySpec:
    """Axis-aligned boundary segment acting as the field source.

    Parameters
    ----------
    side : str
        One of "left", "right", "bottom", "top".
    interval : (float, float)
        Sub-interval [a, b] of the chosen side, 0 <= a < b <= 1, measured
        along the side coordinate (y for left/right, x for bottom/top).
    """

    side: str
    interval: tuple[float, float] = (0.0, 1.0)

    def __post_init__(self):
        if self.side not in _SIDES:
            raise ValueError(f"side must be one of {_SIDES}, got {self.side!r}")
        a, b = self.interval
        if not (0.0 <= a < b <= 1.0):
            raise ValueError(f"interval must satisfy 0 <= a < b <= 1, got ({a}, {b})")


@dataclass(frozen=True)
class Mesh:
    """Conforming triangulation of [0,1]^2 with P1 nodal degrees of freedom.

    Attributes
    ----------
    nodes : (n_nodes, 2) float array
        Node coordinates, row-major by (y, x) for the structured builder.
    triangles : (n_tri, 3) int array
        Counterclockwise vertex indices.
    boundary_edges : (n_edges, 2) int array
        Node index pairs of edges on the geometric boundary.
    boundary_tags : tuple of str
        One tag per boundary edge (DIRICHLET_SOURCE / DIRICHLET_ZERO /
        NOFLUX_ONLY).  Fresh meshes carry NOFLUX_ONLY until tagged.
    """

    nodes: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    boundary_tags: tuple[str, ...]

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    def triangle_areas(self) -> np.ndarray:
        """Signed areas of all triangles (positive for CCW orientation)."""
        p = self.nodes[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def boundary_node_indices(self) -> np.ndarray:
        """Sorted indices of nodes lying on any boundary edge."""
        return np.unique(self.boundary_edges)

    def is_tagged(self) -> bool:
        """True once every boundary edge carries a Dirichlet tag."""
        return all(t != NOFLUX_ONLY for t in self.boundary_tags)


def build_unit_square_mesh(nx: int, ny: int) -> Mesh:
    """Triangulate [0,1]^2 into a structured nx-by-ny grid of split cells.

    Each grid cell is split along the (0,0)-(1,1) diagonal into two CCW
    triangles, giving (nx+1)(ny+1) nodes and 2*nx*ny triangles.  Node
    ordering is row-major by (y, x) so assembly is deterministic.

    Raises
    ------
    ValueError
        If either subdivision count is < 1.
    """
    if nx < 1 or ny < 1:
        raise ValueError(f"subdivision counts must be >= 1, got ({nx}, {ny})")

    xs = np.linspace(0.0, 1.0, nx + 1)
    ys = np.linspace(0.0, 1.0, ny + 1)
    X, Y = np.meshgrid(xs, ys)
    nodes = np.column_stack([X.ravel(), Y.ravel()])

    ix, iy = np.meshgrid(np.arange(nx), np.arange(ny))
    ix = ix.ravel()
    iy = iy.ravel()
    v00 = iy * (nx + 1) + ix
    v10 = v00 + 1
    v01 = v00 + (nx + 1)
    v11 = v01 + 1
    lower = np.column_stack([v00, v10, v11])
    upper = np.column_stack([v00, v11, v01])
    triangles = np.vstack([lower, upper])

    edges = []
    for i in range(nx):  # bottom, left to right
        edges.append((i, i + 1))
    for j in range(ny):  # right, bottom to top
        edges.append((j * (nx + 1) + nx, (j + 1) * (nx + 1) + nx))
    for i in range(nx):  # top, left to right
        edges.append((ny * (nx + 1) + i, ny * (nx + 1) + i + 1))
    for j in range(ny):  # left, bottom to top
        edges.append((j * (nx + 1), (j + 1) * (nx + 1)))
    boundary_edges = np.asarray(edges, dtype=np.int64)

    return Mesh(
        nodes=nodes,
        triangles=triangles,
        boundary_edges=boundary_edges,
        boundary_tags=(NOFLUX_ONLY,) * len(edges),
    )


def _side_of_edge(midpoint: np.ndarray) -> str | None:
    x, y = midpoint
    if abs(x) <= _GEOM_TOL:
        return "left"
    if abs(x - 1.0) <= _GEOM_TOL:
        return "right"
    if abs(y) <= _GEOM_TOL:
        return "bottom"
    if abs(y - 1.0) <= _GEOM_TOL:
        return "top"
    return None


def tag_boundary(mesh: Mesh, spec: BoundarySpec | None) -> Mesh:
    """Tag boundary edges for the scalar-field Dirichlet problem.

    Edges whose midpoint lies on the source segment become
    DIRICHLET_SOURCE; every other boundary edge becomes DIRICHLET_ZERO.
    Passing ``spec=None`` selects the homogeneous case (no source
    segment).  Tagging is idempotent and returns a new Mesh.

    A spec that matches no edge midpoint produces a warning and a mesh
    with zero source edges.
    """
    midpoints = mesh.nodes[mesh.boundary_edges].mean(axis=1)
    tags = []
    n_source = 0
    for mid in midpoints:
        tag = DIRICHLET_ZERO
        if spec is not None and _side_of_edge(mid) == spec.side:
            coord = mid[1] if spec.side in ("left", "right") else mid[0]
            a, b = spec.interval
            if a - _GEOM_TOL <= coord <= b + _GEOM_TOL:
                tag = DIRICHLET_SOURCE
                n_source += 1
        tags.append(tag)
    if spec is not None and n_source == 0:
        warnings.warn(
            f"source segment {spec.side} {spec.interval} matched no boundary "
            "edge midpoint; all edges tagged as zero-Dirichlet",
            stacklevel=2,
        )
    return replace(mesh, boundary_tags=tuple(tags))
