"""Shared construction helpers for the test suite."""

import numpy as np

import swarmfield as sf


def gyre_operators(nx=4, ny=4, D_q=0.01, D_S=0.01, s_d=10.0, spec="default"):
    """Tagged mesh + operators with the default double-gyre flow."""
    mesh = sf.build_unit_square_mesh(nx, ny)
    if spec == "default":
        spec = sf.BoundarySpec("left", (0.25, 0.75))
    mesh = sf.tag_boundary(mesh, spec)
    f_nodes = sf.sample_at_nodes(mesh, sf.FlowField())
    return mesh, sf.assemble_operators(mesh, D_q, D_S, f_nodes, s_d)


def zero_flow_operators(nx=4, ny=4, D_q=0.01, D_S=0.01, s_d=10.0, spec="default"):
    mesh = sf.build_unit_square_mesh(nx, ny)
    if spec == "default":
        spec = sf.BoundarySpec("left", (0.25, 0.75))
    mesh = sf.tag_boundary(mesh, spec)
    f_nodes = np.zeros((mesh.n_nodes, 2))
    return mesh, sf.assemble_operators(mesh, D_q, D_S, f_nodes, s_d)


def random_controls(n_steps, n_nodes, seed=0, scale=0.4):
    rng = np.random.default_rng(seed)
    shape = (n_steps, n_nodes)
    return sf.ControlTrajectory(
        scale * rng.standard_normal(shape),
        scale * rng.standard_normal(shape),
        scale * rng.standard_normal(shape),
    )


def unit_density(ops):
    ones = np.ones(ops.n_nodes)
    return ones / sf.total_mass(ones, ops.M_q)


def prescribed_field(ops):
    return ops.dirichlet.full_values()


def permute_mesh(mesh, perm):
    """Relabel mesh nodes: node i becomes node perm[i]."""
    inv = np.argsort(perm)
    return sf.Mesh(
        nodes=mesh.nodes[inv],
        triangles=perm[mesh.triangles],
        boundary_edges=perm[mesh.boundary_edges],
        boundary_tags=mesh.boundary_tags,
    )


def permute_field(field, perm):
    inv = np.argsort(perm)
    return np.asarray(field)[..., inv]
