"""P1 finite-element operators: mass/stiffness/advection matrices and the
rank-3 tensors that encode how nodal control fields multiply the state.

All element integrals are evaluated in closed form (P1 products on a
triangle are polynomials of degree <= 3, so the formulas are exact).  The
per-element helpers operate on stacked coordinate arrays and are reused by
the tests against an independent symbolic-integration oracle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .mesh import DIRICHLET_SOURCE, DIRICHLET_ZERO, Mesh


# ---------------------------------------------------------------------------
# Element-local integrals.  coords has shape (m, 3, 2), CCW per triangle.
# ---------------------------------------------------------------------------

def element_geometry(coords: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Areas and constant P1 basis gradients for a batch of triangles.

    Returns
    -------
    areas : (m,) array
    grads : (m, 3, 2) array
        grads[e, i] is the gradient of the i-th local basis function.
    """
    coords = np.asarray(coords, dtype=float)
    d1 = coords[:, 1] - coords[:, 0]
    d2 = coords[:, 2] - coords[:, 0]
    det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]  # = 2 * area
    if np.any(det <= 0.0):
        raise ValueError("all triangles must have positive (CCW) area")
    x = coords[..., 0]
    y = coords[..., 1]
    gx = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1)
    gy = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1)
    grads = np.stack([gx, gy], axis=2) / det[:, None, None]
    return 0.5 * det, grads


def element_mass(coords: np.ndarray) -> np.ndarray:
    """Local mass matrices: integral of phi_i phi_j, shape (m, 3, 3)."""
    areas, _ = element_geometry(coords)
    base = (np.ones((3, 3)) + np.eye(3)) / 12.0
    return areas[:, None, None] * base


def element_stiffness(coords: np.ndarray, diffusion: float = 1.0) -> np.ndarray:
    """Local stiffness matrices: D * integral of grad phi_i . grad phi_j."""
    areas, grads = element_geometry(coords)
    return diffusion * areas[:, None, None] * np.einsum("eid,ejd->eij", grads, grads)


def element_advection(coords: np.ndarray, f_values: np.ndarray) -> np.ndarray:
    """Local advection matrices for a P1-interpolated velocity field.

    Entry (i, j) is the integral of (F . grad phi_j) phi_i over the
    triangle, with F linear from the vertex values ``f_values`` of shape
    (m, 3, 2).  Exact: the integrand is quadratic.
    """
    areas, grads = element_geometry(coords)
    f_values = np.asarray(f_values, dtype=float)
    # int (F.g_j) phi_i = (A/12) * (F_1+F_2+F_3 + F_i) . g_j
    w = f_values.sum(axis=1)[:, None, :] + f_values  # (m, 3[i], 2)
    return (areas / 12.0)[:, None, None] * np.einsum("eid,ejd->eij", w, grads)


def element_transport(coords: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Local transport tensors, shape (m, 3, 3, 3) indexed (i, j, k).

    Entry (i, j, k) is the integral of (d phi_j / d x) phi_i phi_k (first
    tensor) or with d/dy (second tensor).  The j-gradient is constant, so
    the entry is grad_j * integral(phi_i phi_k) = grad_j * (A/12)(1+delta_ik).
    """
    areas, grads = element_geometry(coords)
    ik = (areas / 12.0)[:, None, None] * (np.ones((3, 3)) + np.eye(3))  # (m, i, k)
    bx = ik[:, :, None, :] * grads[:, None, :, None, 0]
    by = ik[:, :, None, :] * grads[:, None, :, None, 1]
    return bx, by


_REACTION_PATTERN = np.full((3, 3, 3), 1.0 / 60.0)
for _i in range(3):
    _REACTION_PATTERN[_i, _i, :] = 1.0 / 30.0
    _REACTION_PATTERN[_i, :, _i] = 1.0 / 30.0
    _REACTION_PATTERN[:, _i, _i] = 1.0 / 30.0
    _REACTION_PATTERN[_i, _i, _i] = 1.0 / 10.0


def element_reaction(coords: np.ndarray) -> np.ndarray:
    """Local reaction tensors: integral of phi_i phi_j phi_k, (m, 3, 3, 3).

    Per triangle of area A the entries are A/10 (all indices equal), A/30
    (exactly two equal) and A/60 (all distinct).
    """
    areas, _ = element_geometry(coords)
    return areas[:, None, None, None] * _REACTION_PATTERN


# ---------------------------------------------------------------------------
# Sparse global operators.
# ---------------------------------------------------------------------------

class Rank3Tensor:
    """Sparse rank-3 tensor T[i, j, k] with i = test, j = trial, k = control.

    Entries are stored as deduplicated coordinate lists sorted
    lexicographically by (i, j, k).  Contraction against a nodal control
    field (sum over k) and the bilinear form sum_ij a_i T_ijk b_j are the
    hot paths; both reduce to one sparse matrix-vector product against a
    precomputed (pair, k) operator.
    """

    def __init__(self, shape, i, j, k, val):
        self.shape = tuple(shape)
        self.i = i
        self.j = j
        self.k = k
        self.val = val
        n_i, n_j, n_k = self.shape
        pair_key = i.astype(np.int64) * n_j + j
        change = np.flatnonzero(np.diff(pair_key)) + 1
        starts = np.concatenate([[0], change])
        counts = np.diff(np.concatenate([starts, [len(pair_key)]]))
        self._pair_i = i[starts]
        self._pair_j = j[starts]
        pair_of_entry = np.repeat(np.arange(len(starts)), counts)
        self._pair_op = sp.csr_matrix(
            (val, (pair_of_entry, k)), shape=(len(starts), n_k)
        )
        self._pair_op_t = self._pair_op.T.tocsr()
        # CSR skeleton of the (i, j) shadow, shared by every contraction.
        row_counts = np.bincount(self._pair_i, minlength=n_i)
        self._indptr = np.concatenate([[0], np.cumsum(row_counts)])
        self._indices = self._pair_j.astype(np.int32)

    @classmethod
    def from_entries(cls, shape, i, j, k, val) -> "Rank3Tensor":
        """Build from possibly duplicated coordinate entries (summed)."""
        i = np.asarray(i, dtype=np.int64)
        j = np.asarray(j, dtype=np.int64)
        k = np.asarray(k, dtype=np.int64)
        val = np.asarray(val, dtype=float)
        order = np.lexsort((k, j, i))
        i, j, k, val = i[order], j[order], k[order], val[order]
        key = (i * shape[1] + j) * shape[2] + k
        change = np.flatnonzero(np.diff(key)) + 1
        starts = np.concatenate([[0], change])
        val = np.add.reduceat(val, starts)
        return cls(shape, i[starts], j[starts], k[starts], val)

    @property
    def nnz(self) -> int:
        return len(self.val)

    def contract(self, control: np.ndarray) -> sp.csr_matrix:
        """Matrix with entries sum_k T[i, j, k] * control[k]."""
        control = np.asarray(control, dtype=float)
        if control.shape != (self.shape[2],):
            raise ValueError(
                f"control length {control.shape} does not match tensor "
                f"control dimension {self.shape[2]}"
            )
        data = self._pair_op @ control
        return sp.csr_matrix(
            (data, self._indices, self._indptr), shape=self.shape[:2]
        )

    def bilinear(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Vector over k: sum_ij a_i T[i, j, k] b_j."""
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        if a.shape != (self.shape[0],) or b.shape != (self.shape[1],):
            raise ValueError("operand lengths do not match tensor dimensions")
        return self._pair_op_t @ (a[self._pair_i] * b[self._pair_j])

    def to_dense(self) -> np.ndarray:
        """Dense (i, j, k) array; intended for small test meshes only."""
        dense = np.zeros(self.shape)
        dense[self.i, self.j, self.k] = self.val
        return dense


def contract_tensor(tensor: Rank3Tensor, control: np.ndarray) -> sp.csr_matrix:
    """Contract a rank-3 tensor against a nodal control field (sum over k)."""
    return tensor.contract(control)


def dump_matrix(matrix: sp.spmatrix, path) -> None:
    """Debug dump of a sparse operator in MatrixMarket coordinate format."""
    from scipy.io import mmwrite

    mmwrite(str(path), sp.coo_matrix(matrix))


def _scatter_matrix(mesh: Mesh, local: np.ndarray) -> sp.csr_matrix:
    tri = mesh.triangles
    rows = np.repeat(tri, 3, axis=1).ravel()
    cols = np.tile(tri, (1, 3)).ravel()
    n = mesh.n_nodes
    return sp.coo_matrix(
        (local.reshape(-1), (rows, cols)), shape=(n, n)
    ).tocsr()


def assemble_mass(mesh: Mesh) -> sp.csr_matrix:
    """Global mass matrix M_ij = integral of phi_i phi_j."""
    return _scatter_matrix(mesh, element_mass(mesh.nodes[mesh.triangles]))


def assemble_stiffness(mesh: Mesh, diffusion: float) -> sp.csr_matrix:
    """Global stiffness matrix A_ij = D * integral of grad phi_i . grad phi_j.

    Raises
    ------
    ValueError
        If ``diffusion`` is not strictly positive.
    """
    if diffusion <= 0.0:
        raise ValueError(f"diffusion coefficient must be > 0, got {diffusion}")
    return _scatter_matrix(
        mesh, element_stiffness(mesh.nodes[mesh.triangles], diffusion)
    )


def assemble_advection(mesh: Mesh, f_nodes: np.ndarray) -> sp.csr_matrix:
    """Global advection matrix B_ij = integral of (F . grad phi_j) phi_i.

    ``f_nodes`` holds the nodal values of the P1-interpolated velocity,
    shape (n_nodes, 2).  The state equations use the transpose of this
    matrix (flux-form weak term).
    """
    f_nodes = np.asarray(f_nodes, dtype=float)
    if f_nodes.shape != (mesh.n_nodes, 2):
        raise ValueError(
            f"velocity field must have shape ({mesh.n_nodes}, 2), "
            f"got {f_nodes.shape}"
        )
    local = element_advection(
        mesh.nodes[mesh.triangles], f_nodes[mesh.triangles]
    )
    return _scatter_matrix(mesh, local)


def _scatter_tensor(mesh: Mesh, local: np.ndarray) -> Rank3Tensor:
    tri = mesh.triangles
    m = tri.shape[0]
    li, lj, lk = np.meshgrid(np.arange(3), np.arange(3), np.arange(3), indexing="ij")
    i = tri[:, li.ravel()].ravel()
    j = tri[:, lj.ravel()].ravel()
    k = tri[:, lk.ravel()].ravel()
    n = mesh.n_nodes
    return Rank3Tensor.from_entries((n, n, n), i, j, k, local.reshape(m, -1).ravel())


def assemble_transport_tensors(mesh: Mesh) -> tuple[Rank3Tensor, Rank3Tensor]:
    """Rank-3 transport tensors, one per spatial direction.

    Bx[i, j, k] = integral of (d phi_j / dx) phi_i phi_k; By analogous
    with d/dy.  Contracting against a nodal velocity component gives the
    advection matrix for that component.
    """
    bx, by = element_transport(mesh.nodes[mesh.triangles])
    return _scatter_tensor(mesh, bx), _scatter_tensor(mesh, by)


def assemble_reaction_tensor(mesh: Mesh) -> Rank3Tensor:
    """Rank-3 reaction tensor C[i, j, k] = integral of phi_i phi_j phi_k.

    Fully symmetric in (i, j, k); contracting against the constant field 1
    reproduces the mass matrix.
    """
    return _scatter_tensor(mesh, element_reaction(mesh.nodes[mesh.triangles]))


# ---------------------------------------------------------------------------
# Dirichlet elimination map for the scalar-field problem.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DirichletMap:
    """Partition of nodes into Dirichlet-constrained and free sets.

    ``values`` are the prescribed nodal values aligned with
    ``constrained`` (source value on source nodes, zero elsewhere).
    """

    n_nodes: int
    constrained: np.ndarray
    values: np.ndarray
    free: np.ndarray

    def full_values(self) -> np.ndarray:
        """Length-n nodal field holding the prescribed boundary values."""
        g = np.zeros(self.n_nodes)
        g[self.constrained] = self.values
        return g


def build_dirichlet_map(mesh: Mesh, source_value: float) -> DirichletMap:
    """Constrained-node map for the scalar field on a tagged mesh.

    Nodes incident to a source edge are prescribed ``source_value``; all
    remaining boundary nodes are prescribed zero.  A node shared by a
    source edge and a zero edge receives the source value (source wins).

    Raises
    ------
    ValueError
        If the mesh boundary has not been tagged yet.
    """
    if not mesh.is_tagged():
        raise ValueError(
            "mesh boundary is untagged; call tag_boundary before building "
            "the Dirichlet map"
        )
    tags = np.asarray(mesh.boundary_tags)
    source_nodes = np.unique(mesh.boundary_edges[tags == DIRICHLET_SOURCE])
    zero_nodes = np.setdiff1d(
        np.unique(mesh.boundary_edges[tags == DIRICHLET_ZERO]), source_nodes
    )
    constrained = np.union1d(source_nodes, zero_nodes)
    values = np.where(np.isin(constrained, source_nodes), source_value, 0.0)
    free = np.setdiff1d(np.arange(mesh.n_nodes), constrained)
    return DirichletMap(
        n_nodes=mesh.n_nodes, constrained=constrained, values=values, free=free
    )


# ---------------------------------------------------------------------------
# Bundle of everything the solvers need.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AssembledOperators:
    """All discrete operators for one mesh / physics configuration.

    The four mass matrices coincide for P1-everywhere discretizations but
    are kept as separate fields because they weight different quantities
    (density, field, velocity control, intensity control).
    """

    M_q: sp.csr_matrix
    M_S: sp.csr_matrix
    M_u: sp.csr_matrix
    M_k: sp.csr_matrix
    A_q: sp.csr_matrix
    A_S: sp.csr_matrix
    B_F: sp.csr_matrix
    Bx: Rank3Tensor
    By: Rank3Tensor
    C: Rank3Tensor
    dirichlet: DirichletMap

    @property
    def n_nodes(self) -> int:
        return self.M_q.shape[0]


def assemble_operators(
    mesh: Mesh,
    D_q: float,
    D_S: float,
    f_nodes: np.ndarray,
    source_value: float,
) -> AssembledOperators:
    """Assemble every operator for a tagged mesh in one call."""
    M = assemble_mass(mesh)
    Bx, By = assemble_transport_tensors(mesh)
    return AssembledOperators(
        M_q=M,
        M_S=M,
        M_u=M,
        M_k=M,
        A_q=assemble_stiffness(mesh, D_q),
        A_S=assemble_stiffness(mesh, D_S),
        B_F=assemble_advection(mesh, f_nodes),
        Bx=Bx,
        By=By,
        C=assemble_reaction_tensor(mesh),
        dirichlet=build_dirichlet_map(mesh, source_value),
    )
