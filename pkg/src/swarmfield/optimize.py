"""Projected gradient descent with Armijo backtracking for the control problem.

Each iteration runs one forward solve, one adjoint solve and one gradient
assembly, then backtracks along the projected steepest-descent arc until
the sufficient-decrease condition holds.  The bilinear way the controls
enter the dynamics makes the problem nonconvex, so different starting
points may reach different minimizers; the method guarantees monotone
descent and box feasibility, not global optimality.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .adjoint import solve_adjoint
from .assembly import AssembledOperators
from .cost import (
    GradientTrajectory,
    OcpProblem,
    evaluate_cost,
    reduced_gradient,
)
from .forward import ControlTrajectory, solve_forward

_MAX_BACKTRACKS = 60


@dataclass(frozen=True)
class OptimizeOptions:
    """Tuning knobs for the projected gradient method.

    ``grad_tol`` is relative to the projected-gradient norm at the start.
    ``box_u`` / ``box_k`` are optional per-component bounds |u| <= box_u
    (each velocity component separately, so the Euclidean speed can reach
    box_u * sqrt(2)) and |k| <= box_k.  ``precondition`` divides the
    descent direction by dt times the lumped mass, undoing the Riesz
    weighting of the raw gradient; it changes the search direction only,
    never the reported gradient.
    """

    max_iters: int = 100
    grad_tol: float = 1e-6
    armijo_c: float = 1e-4
    backtrack_factor: float = 0.5
    initial_step: float = 1.0
    box_u: float | None = None
    box_k: float | None = None
    precondition: bool = False

    def __post_init__(self):
        if not 0.0 < self.armijo_c < 1.0:
            raise ValueError(f"armijo_c must lie in (0, 1), got {self.armijo_c}")
        if not 0.0 < self.backtrack_factor < 1.0:
            raise ValueError(
                f"backtrack_factor must lie in (0, 1), got {self.backtrack_factor}"
            )
        if self.initial_step <= 0.0:
            raise ValueError(f"initial_step must be > 0, got {self.initial_step}")
        if self.grad_tol <= 0.0:
            raise ValueError(f"grad_tol must be > 0, got {self.grad_tol}")
        if self.max_iters < 0:
            raise ValueError(f"max_iters must be >= 0, got {self.max_iters}")
        for name, bound in (("box_u", self.box_u), ("box_k", self.box_k)):
            if bound is not None and bound <= 0.0:
                raise ValueError(f"{name} must be > 0 when present, got {bound}")


@dataclass
class OptimizeReport:
    """Outcome of one optimization run.

    ``history`` holds one (J, projected-gradient norm, step) triple per
    accepted iterate, starting with the initial point (step 0); the J
    column is nonincreasing by construction.
    """

    control: ControlTrajectory
    history: list[tuple[float, float, float]] = field(default_factory=list)
    termination: str = "max_iters"

    @property
    def final_cost(self) -> float:
        return self.history[-1][0]

    @property
    def iterations(self) -> int:
        return len(self.history) - 1


def project_box(ctrl: ControlTrajectory, opts: OptimizeOptions) -> ControlTrajectory:
    """Componentwise clamp of the controls to the configured boxes.

    Identity when no bounds are configured; idempotent.
    """
    u_x, u_y, k = ctrl.u_x, ctrl.u_y, ctrl.k
    if opts.box_u is not None:
        u_x = np.clip(u_x, -opts.box_u, opts.box_u)
        u_y = np.clip(u_y, -opts.box_u, opts.box_u)
    if opts.box_k is not None:
        k = np.clip(k, -opts.box_k, opts.box_k)
    return ControlTrajectory(u_x, u_y, k)


def _projected_gradient(
    ctrl: ControlTrajectory, grad: GradientTrajectory, opts: OptimizeOptions
) -> ControlTrajectory:
    """Gradient with components zeroed where a bound blocks the descent step."""

    def mask(values: np.ndarray, g: np.ndarray, bound: float | None) -> np.ndarray:
        if bound is None:
            return g
        blocked_high = (values >= bound) & (g < 0.0)
        blocked_low = (values <= -bound) & (g > 0.0)
        return np.where(blocked_high | blocked_low, 0.0, g)

    return ControlTrajectory(
        mask(ctrl.u_x, grad.g_ux, opts.box_u),
        mask(ctrl.u_y, grad.g_uy, opts.box_u),
        mask(ctrl.k, grad.g_k, opts.box_k),
    )


def minimize(
    ops: AssembledOperators,
    problem: OcpProblem,
    ctrl0: ControlTrajectory,
    opts: OptimizeOptions,
) -> OptimizeReport:
    """Minimize the discrete cost over the control trajectory.

    The starting point is projected onto the box first.  An accepted step
    satisfies J(new) <= J(old) - armijo_c * step * |pg|^2 with pg the
    projected gradient; the run terminates when |pg| drops below grad_tol
    times its initial value, the iteration budget is exhausted, or the
    line search fails after 60 shrinks (reported, not raised).
    """
    def forward_cost(c: ControlTrajectory):
        state = solve_forward(ops, c, problem.q0, problem.S0, problem.grid)
        J = evaluate_cost(state, c, problem.z, problem.weights, ops, problem.grid)
        return J, state

    def gradient_at(c: ControlTrajectory, state) -> GradientTrajectory:
        adj = solve_adjoint(ops, c, state, problem.z, problem.weights, problem.grid)
        return reduced_gradient(state, adj, c, problem.weights, ops, problem.grid)

    ctrl = project_box(ctrl0, opts)
    J, state = forward_cost(ctrl)
    pg = _projected_gradient(ctrl, gradient_at(ctrl, state), opts)
    pg_norm = pg.norm()
    pg_norm0 = pg_norm

    report = OptimizeReport(control=ctrl, history=[(J, pg_norm, 0.0)])
    if pg_norm0 == 0.0:
        report.termination = "converged"
        return report

    lumped = None
    if opts.precondition:
        lumped = problem.grid.dt * np.asarray(ops.M_u.sum(axis=1)).ravel()

    step = opts.initial_step
    for _ in range(opts.max_iters):
        if pg_norm <= opts.grad_tol * pg_norm0:
            report.termination = "converged"
            return report

        if lumped is None:
            direction = pg
        else:
            direction = ControlTrajectory(
                pg.u_x / lumped, pg.u_y / lumped, pg.k / lumped
            )
        decrease = opts.armijo_c * pg.dot(direction)

        accepted = False
        for _shrink in range(_MAX_BACKTRACKS):
            candidate = project_box(ctrl.add_scaled(direction, -step), opts)
            J_new, state_new = forward_cost(candidate)
            if J_new <= J - step * decrease:
                accepted = True
                break
            step *= opts.backtrack_factor
        if not accepted:
            report.termination = "line_search_failure"
            return report

        ctrl, J = candidate, J_new
        pg = _projected_gradient(ctrl, gradient_at(ctrl, state_new), opts)
        pg_norm = pg.norm()
        report.control = ctrl
        report.history.append((J, pg_norm, step))
        step /= opts.backtrack_factor  # gentle growth for the next iterate

    report.termination = (
        "converged" if pg_norm <= opts.grad_tol * pg_norm0 else "max_iters"
    )
    return report
