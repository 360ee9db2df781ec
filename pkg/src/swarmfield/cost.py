"""Discrete cost functional and its exact reduced gradient.

The running terms use a right-endpoint rectangle rule in time, which is
the unique quadrature consistent with the implicit-Euler forward solve:
with it, the adjoint-assembled gradient is the exact derivative of the
discrete cost with respect to the raw control coefficients, and central
finite differences agree to round-off-limited accuracy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .adjoint import AdjointTrajectory, solve_adjoint
from .assembly import AssembledOperators
from .forward import (
    ControlTrajectory,
    StateTrajectory,
    TimeGrid,
    solve_forward,
)


@dataclass(frozen=True)
class CostWeights:
    """Nonnegative weights: terminal/running mismatch, velocity, intensity."""

    alpha_T: float
    alpha: float
    beta: float
    gamma: float

    def __post_init__(self):
        vals = (self.alpha_T, self.alpha, self.beta, self.gamma)
        if any(v < 0.0 for v in vals):
            raise ValueError(f"cost weights must be nonnegative, got {vals}")
        if all(v == 0.0 for v in vals):
            raise ValueError("at least one cost weight must be positive")


@dataclass(frozen=True)
class OcpProblem:
    """Everything that defines one optimal-control instance on fixed operators."""

    q0: np.ndarray
    S0: np.ndarray
    z: np.ndarray
    weights: CostWeights
    grid: TimeGrid


@dataclass
class GradientTrajectory:
    """Raw-coefficient cost gradient, laid out like a ControlTrajectory.

    Includes the time-quadrature dt factor and the mass-matrix (Riesz)
    weighting; the optimizer's projected gradient zeroes components at
    active box bounds.
    """

    g_ux: np.ndarray
    g_uy: np.ndarray
    g_k: np.ndarray

    def as_control(self) -> ControlTrajectory:
        return ControlTrajectory(self.g_ux, self.g_uy, self.g_k)

    def dot(self, direction: ControlTrajectory) -> float:
        return float(
            np.vdot(self.g_ux, direction.u_x)
            + np.vdot(self.g_uy, direction.u_y)
            + np.vdot(self.g_k, direction.k)
        )

    def norm(self) -> float:
        return float(
            np.sqrt(
                np.vdot(self.g_ux, self.g_ux)
                + np.vdot(self.g_uy, self.g_uy)
                + np.vdot(self.g_k, self.g_k)
            )
        )


def expand_target(z: np.ndarray | float, n_nodes: int) -> np.ndarray:
    """Expand a scalar target to a constant nodal field."""
    return np.broadcast_to(np.asarray(z, dtype=float), (n_nodes,)).copy()


def _quad(M, vectors: np.ndarray) -> float:
    """Sum of quadratic forms v' M v over the rows of ``vectors``."""
    return float(np.sum(vectors * (M @ vectors.T).T))


def evaluate_cost(
    state: StateTrajectory,
    ctrl: ControlTrajectory,
    z: np.ndarray | float,
    weights: CostWeights,
    ops: AssembledOperators,
    grid: TimeGrid,
) -> float:
    """Quadratic tracking cost of a state/control pair.

    J = (alpha_T/2) |S(T) - z|_M^2
        + dt * sum_n [ (alpha/2) |S_n - z|_M^2 + (beta/2) |u_n|_M^2
                       + (gamma/2) |k_n|_M^2 ]

    with the running sum over the right endpoints n = 1..n_steps.
    """
    n = ops.n_nodes
    if state.S.shape != (grid.n_steps + 1, n) or ctrl.u_x.shape != (grid.n_steps, n):
        raise ValueError("state/control shapes do not match the grid and mesh")
    z = expand_target(z, n)
    mismatch = state.S[1:] - z
    terminal = 0.5 * weights.alpha_T * float(
        mismatch[-1] @ (ops.M_S @ mismatch[-1])
    )
    running = (
        0.5 * weights.alpha * _quad(ops.M_S, mismatch)
        + 0.5 * weights.beta * (_quad(ops.M_u, ctrl.u_x) + _quad(ops.M_u, ctrl.u_y))
        + 0.5 * weights.gamma * _quad(ops.M_k, ctrl.k)
    )
    return terminal + grid.dt * running


def reduced_gradient(
    state: StateTrajectory,
    adjoint: AdjointTrajectory,
    ctrl: ControlTrajectory,
    weights: CostWeights,
    ops: AssembledOperators,
    grid: TimeGrid,
) -> GradientTrajectory:
    """Exact gradient of the discrete cost with respect to the controls.

    Per step, the velocity gradient combines the Tikhonov term with the
    transport-tensor bilinear form of the density and its multiplier (the
    density on the test index, the multiplier on the gradient index); the
    intensity gradient pairs the field multiplier with the density through
    the reaction tensor.  ``adjoint`` must come from solve_adjoint on this
    state/control pair.
    """
    dt = grid.dt
    g_ux = np.empty_like(ctrl.u_x)
    g_uy = np.empty_like(ctrl.u_y)
    g_k = np.empty_like(ctrl.k)
    for step in range(grid.n_steps):
        q_new = state.q[step + 1]
        lam_q = adjoint.lambda_q[step]
        lam_S = adjoint.lambda_S[step]
        g_ux[step] = dt * (
            weights.beta * (ops.M_u @ ctrl.u_x[step]) + ops.Bx.bilinear(q_new, lam_q)
        )
        g_uy[step] = dt * (
            weights.beta * (ops.M_u @ ctrl.u_y[step]) + ops.By.bilinear(q_new, lam_q)
        )
        g_k[step] = dt * (
            weights.gamma * (ops.M_k @ ctrl.k[step]) + ops.C.bilinear(lam_S, q_new)
        )
    return GradientTrajectory(g_ux=g_ux, g_uy=g_uy, g_k=g_k)


def cost_and_gradient(
    ops: AssembledOperators,
    ctrl: ControlTrajectory,
    problem: OcpProblem,
) -> tuple[float, GradientTrajectory, StateTrajectory]:
    """One forward + adjoint sweep: cost, gradient and the state."""
    state = solve_forward(ops, ctrl, problem.q0, problem.S0, problem.grid)
    J = evaluate_cost(state, ctrl, problem.z, problem.weights, ops, problem.grid)
    adj = solve_adjoint(ops, ctrl, state, problem.z, problem.weights, problem.grid)
    grad = reduced_gradient(state, adj, ctrl, problem.weights, ops, problem.grid)
    return J, grad, state


def fd_gradient_check(
    ops: AssembledOperators,
    ctrl: ControlTrajectory,
    problem: OcpProblem,
    directions: int = 20,
    epsilon: float = 1e-4,
    seed: int = 0,
) -> float:
    """Worst relative error of the adjoint gradient vs central differences.

    For each random unit direction d the directional derivative <grad, d>
    is compared against (J(ctrl + eps d) - J(ctrl - eps d)) / (2 eps).
    """
    if directions < 1:
        raise ValueError(f"directions must be >= 1, got {directions}")
    if epsilon <= 0.0:
        raise ValueError(f"epsilon must be > 0, got {epsilon}")
    _, grad, _ = cost_and_gradient(ops, ctrl, problem)

    def cost_at(c: ControlTrajectory) -> float:
        state = solve_forward(ops, c, problem.q0, problem.S0, problem.grid)
        return evaluate_cost(state, c, problem.z, problem.weights, ops, problem.grid)

    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(directions):
        direction = ControlTrajectory(
            rng.standard_normal(ctrl.u_x.shape),
            rng.standard_normal(ctrl.u_x.shape),
            rng.standard_normal(ctrl.u_x.shape),
        )
        scale = direction.norm()
        direction = ControlTrajectory(
            direction.u_x / scale, direction.u_y / scale, direction.k / scale
        )
        analytic = grad.dot(direction)
        fd = (
            cost_at(ctrl.add_scaled(direction, epsilon))
            - cost_at(ctrl.add_scaled(direction, -epsilon))
        ) / (2.0 * epsilon)
        worst = max(worst, abs(analytic - fd) / max(abs(analytic), abs(fd), 1e-300))
    return worst
