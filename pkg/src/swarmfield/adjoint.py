"""Discrete adjoint of the implicit-Euler forward recursion.

The backward system is not a discretization of the continuous adjoint
PDEs: it is the exact transpose of the forward step operators, so the
reduced gradient assembled from it is the exact gradient of the discrete
cost.  Per backward step the field multiplier is solved first and then
feeds the density multiplier (the coupling is dual to the forward one).

Storage convention: multiplier arrays have n_steps + 1 rows.  Row n_steps
holds the terminal data (zero for the density multiplier, the weighted
terminal mismatch for the field multiplier) and row n holds the
multiplier attached to the step from t_n to t_{n+1}.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import splu

from .assembly import AssembledOperators
from .forward import (
    ControlTrajectory,
    FieldStepSolver,
    StateTrajectory,
    TimeGrid,
    _check_step_solution,
    _transport_matrix,
    _validate_controls,
)


@dataclass
class AdjointTrajectory:
    """Density and field multipliers, one row per time node."""

    lambda_q: np.ndarray
    lambda_S: np.ndarray


def _solve_adjoint_system(
    ops: AssembledOperators,
    ctrl: ControlTrajectory,
    grid: TimeGrid,
    sources_free: np.ndarray,
    terminal_free: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Backward recursion with arbitrary free-space field sources.

    ``sources_free[n]`` enters the field-multiplier solve attached to step
    n -> n+1; ``terminal_free`` is the raw terminal seed (already
    mass-weighted, used without another mass multiplication in the first
    backward step).
    """
    n = ops.n_nodes
    dt = grid.dt
    n_steps = grid.n_steps
    field = FieldStepSolver(ops, dt)
    free = field.free
    M_ff = ops.M_S[free, :][:, free]

    lam_q = np.zeros((n_steps + 1, n))
    lam_S = np.zeros((n_steps + 1, n))
    lam_S[n_steps, free] = terminal_free

    for step in range(n_steps - 1, -1, -1):
        if step == n_steps - 1:
            carried = lam_S[n_steps, free]
        else:
            carried = M_ff @ lam_S[step + 1, free]
        rhs = carried + sources_free[step]
        lam_free = field.solve_transposed(rhs)
        _check_step_solution(field.L_ff.T, lam_free, rhs, step, "field adjoint")
        lam_S[step, free] = lam_free

        u_x, u_y, k = ctrl.u_x[step], ctrl.u_y[step], ctrl.k[step]
        P_t = (
            ops.M_q + dt * (ops.A_q - ops.B_F - _transport_matrix(ops, u_x, u_y))
        ).tocsr()
        b = ops.M_q @ lam_q[step + 1] + dt * (
            ops.C.contract(k).T @ lam_S[step]
        )
        lam = splu(P_t.tocsc()).solve(b)
        _check_step_solution(P_t, lam, b, step, "density adjoint")
        lam_q[step] = lam

    return lam_q, lam_S


def solve_adjoint(
    ops: AssembledOperators,
    ctrl: ControlTrajectory,
    state: StateTrajectory,
    z: np.ndarray | float,
    weights,
    grid: TimeGrid,
) -> AdjointTrajectory:
    """Multipliers for the quadratic tracking cost at (ctrl, state).

    ``state`` must be the forward solution under ``ctrl``.  Terminal
    conditions: the density multiplier vanishes and the field multiplier
    equals alpha_T * M_S (S(T) - z) on free nodes (zero on constrained
    ones, where the field is pinned).
    """
    n = ops.n_nodes
    _validate_controls(ctrl, n, grid.n_steps)
    if state.q.shape != (grid.n_steps + 1, n):
        raise ValueError("state trajectory does not match the grid and mesh")
    z = np.broadcast_to(np.asarray(z, dtype=float), (n,))
    free = ops.dirichlet.free

    sources = np.empty((grid.n_steps, len(free)))
    for step in range(grid.n_steps):
        sources[step] = (
            grid.dt * weights.alpha * (ops.M_S @ (state.S[step + 1] - z))
        )[free]
    terminal = (weights.alpha_T * (ops.M_S @ (state.S[-1] - z)))[free]

    lam_q, lam_S = _solve_adjoint_system(ops, ctrl, grid, sources, terminal)
    return AdjointTrajectory(lambda_q=lam_q, lambda_S=lam_S)


def adjoint_inner_product_test(
    ops: AssembledOperators,
    ctrl: ControlTrajectory,
    grid: TimeGrid,
    trials: int = 10,
    q0: np.ndarray | None = None,
    S0: np.ndarray | None = None,
    seed: int = 0,
) -> float:
    """Duality residual between the linearized forward and adjoint maps.

    For random control perturbations and random running/terminal cost
    data, compares the pairing of the field sensitivity with the data
    against the pairing of the perturbation with the adjoint-assembled
    linear gradient part.  Both sides coincide up to round-off because the
    backward recursion is the exact transpose of the forward one; the
    returned value is the worst relative mismatch over all trials.
    """
    from .forward import solve_forward, solve_linearized

    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    n = ops.n_nodes
    dt = grid.dt
    if q0 is None:
        q0 = np.ones(n)
    if S0 is None:
        S0 = ops.dirichlet.full_values()
    state = solve_forward(ops, ctrl, q0, S0, grid)
    free = ops.dirichlet.free
    rng = np.random.default_rng(seed)

    worst = 0.0
    for _ in range(trials):
        direction = ControlTrajectory(
            rng.standard_normal(ctrl.u_x.shape),
            rng.standard_normal(ctrl.u_x.shape),
            rng.standard_normal(ctrl.u_x.shape),
        )
        data = rng.standard_normal((grid.n_steps, len(free)))
        lin = solve_linearized(ops, ctrl, state, direction, grid)
        lhs = float(np.sum(data * lin.S[1:, free]))

        lam_q, lam_S = _solve_adjoint_system(
            ops, ctrl, grid, data, np.zeros(len(free))
        )
        rhs = 0.0
        for step in range(grid.n_steps):
            q_new = state.q[step + 1]
            rhs += float(
                direction.u_x[step] @ (dt * ops.Bx.bilinear(q_new, lam_q[step]))
                + direction.u_y[step] @ (dt * ops.By.bilinear(q_new, lam_q[step]))
                + direction.k[step] @ (dt * ops.C.bilinear(lam_S[step], q_new))
            )
        residual = abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1e-300)
        worst = max(worst, residual)
    return worst
