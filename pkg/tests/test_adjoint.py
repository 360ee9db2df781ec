import numpy as np
import pytest
from scipy.sparse.linalg import splu

import helpers
import swarmfield as sf
from swarmfield.forward import q_step_matrix


@pytest.fixture(scope="module")
def setting():
    _, ops = helpers.gyre_operators(4, 4)
    grid = sf.TimeGrid(0.5, 5)
    ctrl = helpers.random_controls(5, ops.n_nodes, seed=20)
    state = sf.solve_forward(
        ops, ctrl, helpers.unit_density(ops), helpers.prescribed_field(ops), grid
    )
    return ops, grid, ctrl, state


def test_zero_tracking_weights_give_zero_multipliers(setting):
    ops, grid, ctrl, state = setting
    weights = sf.CostWeights(0.0, 0.0, 1.0, 1.0)
    adj = sf.solve_adjoint(ops, ctrl, state, 0.0, weights, grid)
    assert np.abs(adj.lambda_S).max() == 0.0
    assert np.abs(adj.lambda_q).max() == 0.0


def test_matched_field_gives_zero_field_multiplier():
    # homogeneous boundary, zero initial field, zero intensity: S stays at
    # zero, so tracking z = 0 produces no adjoint excitation
    _, ops = helpers.gyre_operators(4, 4, spec=None)
    grid = sf.TimeGrid(0.5, 5)
    n = ops.n_nodes
    ctrl = sf.ControlTrajectory(
        0.3 * np.ones((5, n)), np.zeros((5, n)), np.zeros((5, n))
    )
    state = sf.solve_forward(ops, ctrl, helpers.unit_density(ops), np.zeros(n), grid)
    assert np.abs(state.S).max() <= 1e-12
    weights = sf.CostWeights(10.0, 1.0, 0.1, 0.1)
    adj = sf.solve_adjoint(ops, ctrl, state, 0.0, weights, grid)
    assert np.abs(adj.lambda_S).max() <= 1e-12
    assert np.abs(adj.lambda_q).max() <= 1e-12


def test_terminal_conditions(setting):
    ops, grid, ctrl, state = setting
    weights = sf.CostWeights(10.0, 1.0, 0.1, 0.1)
    z = np.zeros(ops.n_nodes)
    adj = sf.solve_adjoint(ops, ctrl, state, z, weights, grid)
    assert np.abs(adj.lambda_q[-1]).max() == 0.0
    expected = weights.alpha_T * (ops.M_S @ (state.S[-1] - z))
    free = ops.dirichlet.free
    constrained = ops.dirichlet.constrained
    assert np.allclose(adj.lambda_S[-1, free], expected[free], rtol=1e-14)
    assert np.abs(adj.lambda_S[:, constrained]).max() == 0.0


def test_single_step_transpose_identity(setting):
    # <P^-1 M v, w> == <v, M P^-T w> for the density step operators
    ops, grid, ctrl, _ = setting
    rng = np.random.default_rng(31)
    P = q_step_matrix(ops, ctrl.u_x[2], ctrl.u_y[2], grid.dt)
    forward_lu = splu(P.tocsc())
    adjoint_lu = splu(P.T.tocsc())
    for _ in range(5):
        v = rng.standard_normal(ops.n_nodes)
        w = rng.standard_normal(ops.n_nodes)
        lhs = float(np.dot(forward_lu.solve(ops.M_q @ v), w))
        rhs = float(np.dot(v, ops.M_q @ adjoint_lu.solve(w)))
        assert abs(lhs - rhs) <= 1e-12 * max(abs(lhs), abs(rhs))


def test_field_multiplier_ignores_intensity_control(setting):
    ops, grid, ctrl, state = setting
    weights = sf.CostWeights(10.0, 1.0, 0.1, 0.1)
    adj_a = sf.solve_adjoint(ops, ctrl, state, 0.0, weights, grid)
    bumped = sf.ControlTrajectory(ctrl.u_x, ctrl.u_y, ctrl.k + 1.3)
    adj_b = sf.solve_adjoint(ops, bumped, state, 0.0, weights, grid)
    assert np.array_equal(adj_a.lambda_S, adj_b.lambda_S)
    assert not np.array_equal(adj_a.lambda_q, adj_b.lambda_q)


def test_inner_product_duality(setting):
    ops, grid, ctrl, _ = setting
    residual = sf.adjoint_inner_product_test(ops, ctrl, grid, trials=10)
    assert residual <= 1e-11


def test_duality_holds_per_discretization(setting):
    # coarsening the time grid changes the pairings but not the bound
    ops, _, _, _ = setting
    for n_steps in (5, 10):
        grid = sf.TimeGrid(0.5, n_steps)
        ctrl = helpers.random_controls(n_steps, ops.n_nodes, seed=40 + n_steps)
        assert sf.adjoint_inner_product_test(ops, ctrl, grid, trials=3) <= 1e-11


def test_zero_perturbation_pairs_to_zero(setting):
    ops, grid, ctrl, state = setting
    zero = sf.ControlTrajectory.zeros(grid.n_steps, ops.n_nodes)
    lin = sf.solve_linearized(ops, ctrl, state, zero, grid)
    rng = np.random.default_rng(50)
    data = rng.standard_normal(lin.S[1:].shape)
    assert float(np.sum(data * lin.S[1:])) == 0.0


def test_backward_determinism(setting):
    ops, grid, ctrl, state = setting
    weights = sf.CostWeights(10.0, 1.0, 0.1, 0.1)
    a = sf.solve_adjoint(ops, ctrl, state, 0.0, weights, grid)
    b = sf.solve_adjoint(ops, ctrl, state, 0.0, weights, grid)
    assert np.array_equal(a.lambda_q, b.lambda_q)
    assert np.array_equal(a.lambda_S, b.lambda_S)


def test_trajectory_shape_mismatch_rejected(setting):
    ops, grid, ctrl, state = setting
    weights = sf.CostWeights(10.0, 1.0, 0.1, 0.1)
    short = sf.StateTrajectory(q=state.q[:-1], S=state.S[:-1])
    with pytest.raises(ValueError):
        sf.solve_adjoint(ops, ctrl, short, 0.0, weights, grid)
