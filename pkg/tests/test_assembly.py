import numpy as np
import pytest

import oracles
import swarmfield as sf
from swarmfield.assembly import (
    element_advection,
    element_mass,
    element_reaction,
    element_stiffness,
    element_transport,
)

RIGHT_TRIANGLE = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])


@pytest.fixture(scope="module")
def mesh22():
    return sf.tag_boundary(sf.build_unit_square_mesh(2, 2), None)


# --- frozen single-element values -------------------------------------------

def test_local_mass_right_triangle():
    expected = (0.5 / 12.0) * np.array([[2, 1, 1], [1, 2, 1], [1, 1, 2]])
    assert np.allclose(element_mass(RIGHT_TRIANGLE[None])[0], expected, atol=1e-15)


def test_local_stiffness_right_triangle():
    expected = np.array([[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]])
    assert np.allclose(
        element_stiffness(RIGHT_TRIANGLE[None])[0], expected, atol=1e-15
    )


def test_local_reaction_right_triangle():
    local = element_reaction(RIGHT_TRIANGLE[None])[0]
    area = 0.5
    for i in range(3):
        for j in range(3):
            for k in range(3):
                if i == j == k:
                    expected = area / 10.0
                elif i == j or j == k or i == k:
                    expected = area / 30.0
                else:
                    expected = area / 60.0
                assert local[i, j, k] == pytest.approx(expected, abs=1e-16)


def test_degenerate_triangle_rejected():
    flat = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]])
    with pytest.raises(ValueError):
        element_mass(flat[None])


# --- symbolic oracle over random triangles ----------------------------------

def test_element_integrals_match_symbolic_oracle():
    rng = np.random.default_rng(2024)
    for _ in range(20):
        tri = oracles.random_ccw_triangle(rng)
        coords = tri[None]
        fv = rng.standard_normal((3, 2))
        assert np.abs(element_mass(coords)[0] - oracles.local_mass(tri)).max() <= 1e-13
        assert (
            np.abs(element_stiffness(coords)[0] - oracles.local_stiffness(tri)).max()
            <= 1e-13
        )
        bx, by = element_transport(coords)
        obx, oby = oracles.local_transport(tri)
        assert np.abs(bx[0] - obx).max() <= 1e-13
        assert np.abs(by[0] - oby).max() <= 1e-13
        assert (
            np.abs(element_reaction(coords)[0] - oracles.local_reaction(tri)).max()
            <= 1e-13
        )
        assert (
            np.abs(
                element_advection(coords, fv[None])[0]
                - oracles.local_advection(tri, fv)
            ).max()
            <= 1e-13
        )


# --- global matrices ----------------------------------------------------------

def test_mass_sums_to_domain_area(mesh22):
    M = sf.assemble_mass(mesh22)
    assert M.sum() == pytest.approx(1.0, abs=1e-14)


def test_mass_row_sums_positive():
    mesh = sf.build_unit_square_mesh(1, 1)
    M = sf.assemble_mass(mesh)
    assert np.all(np.asarray(M.sum(axis=1)).ravel() > 0)


def test_mass_symmetric(mesh22):
    M = sf.assemble_mass(mesh22)
    assert np.abs((M - M.T).toarray()).max() <= 1e-15


def test_stiffness_kernel_contains_constants(mesh22):
    A = sf.assemble_stiffness(mesh22, 1.0)
    c = 3.7 * np.ones(mesh22.n_nodes)
    assert np.abs(A @ c).max() <= 1e-14
    assert np.abs((A - A.T).toarray()).max() <= 1e-15


def test_stiffness_linear_in_diffusion(mesh22):
    A1 = sf.assemble_stiffness(mesh22, 1.0)
    A2 = sf.assemble_stiffness(mesh22, 2.0)
    assert np.array_equal(A2.toarray(), 2.0 * A1.toarray())


@pytest.mark.parametrize("bad", [0.0, -0.5])
def test_stiffness_rejects_nonpositive_diffusion(mesh22, bad):
    with pytest.raises(ValueError):
        sf.assemble_stiffness(mesh22, bad)


def test_advection_zero_field(mesh22):
    B = sf.assemble_advection(mesh22, np.zeros((mesh22.n_nodes, 2)))
    assert np.abs(B.toarray()).max() == 0.0


def test_advection_annihilates_constant_trial(mesh22):
    rng = np.random.default_rng(0)
    F = rng.standard_normal((mesh22.n_nodes, 2))
    B = sf.assemble_advection(mesh22, F)
    assert np.abs(B @ np.ones(mesh22.n_nodes)).max() <= 1e-14


def test_advection_constant_field_matches_oracle():
    mesh = sf.build_unit_square_mesh(1, 1)
    F = np.column_stack([np.ones(4), np.zeros(4)])
    B = sf.assemble_advection(mesh, F).toarray()
    expected = np.zeros((4, 4))
    for tri in mesh.triangles:
        coords = mesh.nodes[tri]
        local = oracles.local_advection(coords, F[tri])
        for a in range(3):
            for b in range(3):
                expected[tri[a], tri[b]] += local[a, b]
    assert np.abs(B - expected).max() <= 1e-14


def test_advection_shape_mismatch(mesh22):
    with pytest.raises(ValueError):
        sf.assemble_advection(mesh22, np.ones((4, 2)))


# --- tensors -------------------------------------------------------------------

def test_transport_contraction_with_constant_control(mesh22):
    n = mesh22.n_nodes
    Bx, By = sf.assemble_transport_tensors(mesh22)
    c = 2.5
    adv_x = sf.assemble_advection(mesh22, np.column_stack([np.ones(n), np.zeros(n)]))
    adv_y = sf.assemble_advection(mesh22, np.column_stack([np.zeros(n), np.ones(n)]))
    assert np.abs((Bx.contract(c * np.ones(n)) - c * adv_x).toarray()).max() <= 1e-14
    assert np.abs((By.contract(c * np.ones(n)) - c * adv_y).toarray()).max() <= 1e-14


def test_transport_test_index_sum(mesh22):
    # summing over the test index leaves the advection pairing of the
    # remaining (control, gradient) roles
    n = mesh22.n_nodes
    Bx, _ = sf.assemble_transport_tensors(mesh22)
    adv_x = sf.assemble_advection(
        mesh22, np.column_stack([np.ones(n), np.zeros(n)])
    ).toarray()
    summed = Bx.to_dense().sum(axis=0)  # (j, k)
    assert np.abs(summed - adv_x.T).max() <= 1e-14


def test_transport_gradient_index_sum_vanishes(mesh22):
    Bx, By = sf.assemble_transport_tensors(mesh22)
    assert np.abs(Bx.to_dense().sum(axis=1)).max() <= 1e-14
    assert np.abs(By.to_dense().sum(axis=1)).max() <= 1e-14


def test_reaction_control_sum_is_mass(mesh22):
    C = sf.assemble_reaction_tensor(mesh22)
    M = sf.assemble_mass(mesh22).toarray()
    assert np.abs(C.to_dense().sum(axis=2) - M).max() <= 1e-14


def test_reaction_fully_symmetric(mesh22):
    dense = sf.assemble_reaction_tensor(mesh22).to_dense()
    for perm in [(0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0)]:
        assert np.abs(dense - dense.transpose(perm)).max() <= 1e-15


def test_reaction_unit_control_reproduces_mass_action(mesh22):
    n = mesh22.n_nodes
    C = sf.assemble_reaction_tensor(mesh22)
    M = sf.assemble_mass(mesh22)
    q = np.linspace(0.0, 2.0, n)
    assert np.allclose(C.contract(np.ones(n)) @ q, M @ q, atol=1e-14)


def test_contract_zero_control(mesh22):
    C = sf.assemble_reaction_tensor(mesh22)
    assert np.abs(sf.contract_tensor(C, np.zeros(mesh22.n_nodes)).toarray()).max() == 0.0


def test_contract_linearity(mesh22):
    rng = np.random.default_rng(3)
    n = mesh22.n_nodes
    Bx, _ = sf.assemble_transport_tensors(mesh22)
    c1, c2 = rng.standard_normal(n), rng.standard_normal(n)
    a, b = 1.7, -0.4
    combined = Bx.contract(a * c1 + b * c2).toarray()
    split = a * Bx.contract(c1).toarray() + b * Bx.contract(c2).toarray()
    assert np.abs(combined - split).max() <= 1e-13


def test_contract_applied_to_constant_equals_mass_action(mesh22):
    # sum_j C_ijk * 1_j * c_k = (M c)_i by the partition of unity
    rng = np.random.default_rng(4)
    n = mesh22.n_nodes
    C = sf.assemble_reaction_tensor(mesh22)
    M = sf.assemble_mass(mesh22)
    c = rng.standard_normal(n)
    assert np.allclose(C.contract(c) @ np.ones(n), M @ c, atol=1e-14)


def test_contract_dimension_mismatch(mesh22):
    C = sf.assemble_reaction_tensor(mesh22)
    with pytest.raises(ValueError):
        C.contract(np.ones(4))


def test_tensor_entries_have_element_support(mesh22):
    # every stored (i, j, k) triple must share at least one triangle
    Bx, _ = sf.assemble_transport_tensors(mesh22)
    tri_sets = [set(t) for t in mesh22.triangles]
    for i, j, k in zip(Bx.i, Bx.j, Bx.k):
        assert any(i in t and j in t and k in t for t in tri_sets)


# --- Dirichlet map --------------------------------------------------------------

def test_mass_matrices_positive_definite(mesh22):
    M = sf.assemble_mass(mesh22).toarray()
    assert np.linalg.eigvalsh(M).min() > 0.0


def test_stiffness_positive_semidefinite(mesh22):
    A = sf.assemble_stiffness(mesh22, 0.7).toarray()
    eigs = np.linalg.eigvalsh(A)
    assert eigs.min() >= -1e-14
    assert abs(eigs[0]) <= 1e-14  # the constant mode


def test_matrix_market_dump_roundtrip(mesh22, tmp_path):
    from scipy.io import mmread

    from swarmfield.assembly import dump_matrix

    M = sf.assemble_mass(mesh22)
    path = tmp_path / "mass.mtx"
    dump_matrix(M, path)
    back = mmread(path).tocsr()
    assert np.abs((back - M).toarray()).max() <= 1e-16


def test_dirichlet_map_requires_tags():
    untagged = sf.build_unit_square_mesh(2, 2)
    with pytest.raises(ValueError, match="untagged"):
        sf.build_dirichlet_map(untagged, 10.0)


def test_dirichlet_map_homogeneous(mesh22):
    dmap = sf.build_dirichlet_map(mesh22, 10.0)
    boundary = mesh22.boundary_node_indices()
    assert np.array_equal(dmap.constrained, boundary)
    assert np.all(dmap.values == 0.0)
    assert len(dmap.free) == mesh22.n_nodes - len(boundary)


def test_dirichlet_map_source_on_full_left_side():
    mesh = sf.tag_boundary(
        sf.build_unit_square_mesh(2, 2), sf.BoundarySpec("left", (0.0, 1.0))
    )
    dmap = sf.build_dirichlet_map(mesh, 10.0)
    left = np.flatnonzero(mesh.nodes[:, 0] == 0.0)
    # the corner nodes sit on both a source and a zero edge: source wins
    assert np.sum(dmap.values == 10.0) == 3
    assert np.array_equal(np.sort(dmap.constrained[dmap.values == 10.0]), left)
    assert np.sum(dmap.values == 0.0) == 5
    assert len(dmap.free) == 1


def test_dirichlet_partition_is_disjoint_and_complete(mesh22):
    dmap = sf.build_dirichlet_map(mesh22, 1.0)
    both = np.concatenate([dmap.constrained, dmap.free])
    assert np.array_equal(np.sort(both), np.arange(mesh22.n_nodes))


def test_full_values_layout():
    mesh = sf.tag_boundary(
        sf.build_unit_square_mesh(2, 2), sf.BoundarySpec("left", (0.0, 1.0))
    )
    dmap = sf.build_dirichlet_map(mesh, 10.0)
    g = dmap.full_values()
    assert g.shape == (9,)
    assert np.all(g[mesh.nodes[:, 0] == 0.0] == 10.0)
    assert np.all(g[dmap.free] == 0.0)
