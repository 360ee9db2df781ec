"""Implicit-Euler time stepping of the coupled density/field system.

Per step the swarm density advances first and then drives the scalar
field (the coupling is one-way).  In matrix form, with controls indexed
at the right endpoint of each step,

    (M_q + dt (A_q - B_F' - (B u)')) q_new = M_q q_old
    (M_S + dt (A_S - B_F'))_ff S_new_f    = (M_S S_old)_f
                                            + dt (C(k) q_new)_f - bc terms

where ' denotes the transpose, (B u) the transport tensors contracted
against the velocity control, C(k) the reaction tensor contracted against
the intensity control, and _ff the restriction to Dirichlet-free nodes.
The q system involves no boundary elimination: the no-flux condition is
natural in the weak form, and the step operator conserves the weighted
mass 1' M_q q exactly because its non-mass part has vanishing column sums.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .assembly import AssembledOperators

_RESIDUAL_TOL = 1e-10
_MASS_TOL = 1e-10
_DIRICHLET_TOL = 1e-12


class SolverFailure(RuntimeError):
    """A linear step solve failed; carries the offending step index."""

    def __init__(self, message: str, step: int):
        super().__init__(f"step {step}: {message}")
        self.step = step


@dataclass(frozen=True)
class TimeGrid:
    """Uniform time grid on [0, t_final] with n_steps implicit-Euler steps."""

    t_final: float
    n_steps: int

    def __post_init__(self):
        if self.t_final <= 0.0:
            raise ValueError(f"t_final must be > 0, got {self.t_final}")
        if self.n_steps < 1:
            raise ValueError(f"n_steps must be >= 1, got {self.n_steps}")

    @property
    def dt(self) -> float:
        return self.t_final / self.n_steps

    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.t_final, self.n_steps + 1)


@dataclass
class ControlTrajectory:
    """Time-indexed nodal control fields, one row per time step.

    Row n holds the controls acting on the step from t_n to t_{n+1}
    (right-endpoint convention, consistent with implicit Euler).
    """

    u_x: np.ndarray
    u_y: np.ndarray
    k: np.ndarray

    def __post_init__(self):
        shapes = {self.u_x.shape, self.u_y.shape, self.k.shape}
        if len(shapes) != 1 or self.u_x.ndim != 2:
            raise ValueError(f"control arrays must share one 2-D shape, got {shapes}")
        for name, arr in (("u_x", self.u_x), ("u_y", self.u_y), ("k", self.k)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"control field {name} contains non-finite entries")

    @classmethod
    def zeros(cls, n_steps: int, n_nodes: int) -> "ControlTrajectory":
        shape = (n_steps, n_nodes)
        return cls(np.zeros(shape), np.zeros(shape), np.zeros(shape))

    @property
    def n_steps(self) -> int:
        return self.u_x.shape[0]

    @property
    def n_nodes(self) -> int:
        return self.u_x.shape[1]

    def copy(self) -> "ControlTrajectory":
        return ControlTrajectory(self.u_x.copy(), self.u_y.copy(), self.k.copy())

    def add_scaled(self, other: "ControlTrajectory", factor: float) -> "ControlTrajectory":
        return ControlTrajectory(
            self.u_x + factor * other.u_x,
            self.u_y + factor * other.u_y,
            self.k + factor * other.k,
        )

    def dot(self, other: "ControlTrajectory") -> float:
        return float(
            np.vdot(self.u_x, other.u_x)
            + np.vdot(self.u_y, other.u_y)
            + np.vdot(self.k, other.k)
        )

    def norm(self) -> float:
        return float(np.sqrt(self.dot(self)))


@dataclass
class StateTrajectory:
    """Density and field trajectories, one row per time node (n_steps + 1)."""

    q: np.ndarray
    S: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.q.shape[1]


def total_mass(field: np.ndarray, mass_matrix: sp.spmatrix) -> float:
    """Weighted total 1' M field, i.e. the integral of the P1 interpolant."""
    field = np.asarray(field, dtype=float)
    if field.shape != (mass_matrix.shape[1],):
        raise ValueError(
            f"field length {field.shape} does not match matrix "
            f"dimension {mass_matrix.shape[1]}"
        )
    return float((mass_matrix @ field).sum())


def _check_step_solution(matrix, solution, rhs, step: int, label: str) -> None:
    """Enforce the 1e-10 relative-residual contract of every linear solve."""
    if not np.all(np.isfinite(solution)):
        raise SolverFailure(f"{label} solve produced non-finite values", step)
    residual = np.linalg.norm(matrix @ solution - rhs)
    scale = max(np.linalg.norm(rhs), 1e-300)
    if residual > _RESIDUAL_TOL * scale:
        raise SolverFailure(
            f"{label} solve residual {residual / scale:.3e} exceeds "
            f"{_RESIDUAL_TOL:.0e}",
            step,
        )


def _transport_matrix(ops: AssembledOperators, u_x: np.ndarray, u_y: np.ndarray):
    """Contracted transport operator (B u) for one step's velocity control."""
    return ops.Bx.contract(u_x) + ops.By.contract(u_y)


def q_step_matrix(ops: AssembledOperators, u_x, u_y, dt: float) -> sp.csr_matrix:
    """Implicit-Euler step operator for the density: M_q + dt * K_q(u)."""
    K = ops.A_q - ops.B_F.T - _transport_matrix(ops, u_x, u_y).T
    return (ops.M_q + dt * K).tocsr()


class FieldStepSolver:
    """Factorized field step with Dirichlet elimination, reused per step.

    The field operator does not depend on the controls, so one
    factorization serves the whole trajectory.
    """

    def __init__(self, ops: AssembledOperators, dt: float):
        dmap = ops.dirichlet
        self.free = dmap.free
        self.constrained = dmap.constrained
        self.prescribed = dmap.values
        L = (ops.M_S + dt * (ops.A_S - ops.B_F.T)).tocsr()
        self.L_ff = L[self.free, :][:, self.free].tocsc()
        self.bc_rhs = L[self.free, :][:, self.constrained] @ self.prescribed
        self._lu = splu(self.L_ff)
        self._lu_t = None

    def solve(self, rhs_free: np.ndarray) -> np.ndarray:
        return self._lu.solve(rhs_free)

    def solve_transposed(self, rhs_free: np.ndarray) -> np.ndarray:
        if self._lu_t is None:
            self._lu_t = splu(self.L_ff.T.tocsc())
        return self._lu_t.solve(rhs_free)


def _validate_controls(ctrl: ControlTrajectory, n_nodes: int, n_steps: int) -> None:
    if ctrl.u_x.shape != (n_steps, n_nodes):
        raise ValueError(
            f"controls have shape {ctrl.u_x.shape}, expected ({n_steps}, {n_nodes})"
        )


def solve_forward(
    ops: AssembledOperators,
    ctrl: ControlTrajectory,
    q0: np.ndarray,
    S0: np.ndarray,
    grid: TimeGrid,
) -> StateTrajectory:
    """Advance the coupled system from (q0, S0) over the full time grid.

    Preconditions: q0 is a nonnegative density with unit weighted mass
    (tolerance 1e-10) and S0 matches the prescribed Dirichlet values on
    constrained nodes.

    Raises
    ------
    ValueError
        On violated preconditions or dimension mismatches.
    SolverFailure
        If any step's linear solve misses the 1e-10 residual contract.
    """
    n = ops.n_nodes
    q0 = np.asarray(q0, dtype=float)
    S0 = np.asarray(S0, dtype=float)
    if q0.shape != (n,) or S0.shape != (n,):
        raise ValueError(f"initial fields must have length {n}")
    _validate_controls(ctrl, n, grid.n_steps)
    if np.min(q0) < -1e-12:
        raise ValueError("q0 must be nonnegative")
    mass0 = total_mass(q0, ops.M_q)
    if abs(mass0 - 1.0) > _MASS_TOL:
        raise ValueError(
            f"q0 must have unit weighted mass, got {mass0:.12e}"
        )
    dmap = ops.dirichlet
    if np.max(np.abs(S0[dmap.constrained] - dmap.values), initial=0.0) > _DIRICHLET_TOL:
        raise ValueError("S0 is inconsistent with the prescribed Dirichlet values")

    dt = grid.dt
    q = np.empty((grid.n_steps + 1, n))
    S = np.empty((grid.n_steps + 1, n))
    q[0] = q0
    S[0] = S0

    field = FieldStepSolver(ops, dt)
    lu_q = None
    P = None
    prev_u = None
    for step in range(grid.n_steps):
        u_x, u_y, k = ctrl.u_x[step], ctrl.u_y[step], ctrl.k[step]
        if lu_q is None or not (
            np.array_equal(u_x, prev_u[0]) and np.array_equal(u_y, prev_u[1])
        ):
            P = q_step_matrix(ops, u_x, u_y, dt)
            lu_q = splu(P.tocsc())
            prev_u = (u_x, u_y)
        b = ops.M_q @ q[step]
        q_new = lu_q.solve(b)
        _check_step_solution(P, q_new, b, step, "density")
        q[step + 1] = q_new

        rhs = (ops.M_S @ S[step] + dt * (ops.C.contract(k) @ q_new))[field.free]
        rhs -= field.bc_rhs
        S_free = field.solve(rhs)
        _check_step_solution(field.L_ff, S_free, rhs, step, "field")
        S[step + 1, field.free] = S_free
        S[step + 1, field.constrained] = field.prescribed

    return StateTrajectory(q=q, S=S)


def solve_linearized(
    ops: AssembledOperators,
    ctrl: ControlTrajectory,
    base: StateTrajectory,
    direction: ControlTrajectory,
    grid: TimeGrid,
) -> StateTrajectory:
    """Directional derivative of the forward map at ``ctrl`` along ``direction``.

    Uses the same implicit-Euler step operators as the forward solve with
    linearized right-hand sides: the density sensitivity is forced by the
    velocity perturbation acting on the base density, the field
    sensitivity by the intensity perturbation acting on the base density
    plus the base intensity acting on the density sensitivity.  Initial
    conditions are zero and the field sensitivity has homogeneous
    Dirichlet values.
    """
    n = ops.n_nodes
    _validate_controls(ctrl, n, grid.n_steps)
    _validate_controls(direction, n, grid.n_steps)
    if base.q.shape != (grid.n_steps + 1, n):
        raise ValueError("base trajectory does not match the grid and mesh")

    dt = grid.dt
    z_q = np.zeros((grid.n_steps + 1, n))
    z_S = np.zeros((grid.n_steps + 1, n))
    field = FieldStepSolver(ops, dt)
    lu_q = None
    P = None
    prev_u = None
    for step in range(grid.n_steps):
        u_x, u_y, k = ctrl.u_x[step], ctrl.u_y[step], ctrl.k[step]
        h_x, h_y, l = direction.u_x[step], direction.u_y[step], direction.k[step]
        if lu_q is None or not (
            np.array_equal(u_x, prev_u[0]) and np.array_equal(u_y, prev_u[1])
        ):
            P = q_step_matrix(ops, u_x, u_y, dt)
            lu_q = splu(P.tocsc())
            prev_u = (u_x, u_y)
        q_new = base.q[step + 1]
        b = ops.M_q @ z_q[step] + dt * (
            _transport_matrix(ops, h_x, h_y).T @ q_new
        )
        z_q_new = lu_q.solve(b)
        _check_step_solution(P, z_q_new, b, step, "density sensitivity")
        z_q[step + 1] = z_q_new

        forcing = ops.C.contract(k) @ z_q_new + ops.C.contract(l) @ q_new
        rhs = (ops.M_S @ z_S[step] + dt * forcing)[field.free]
        z_free = field.solve(rhs)
        _check_step_solution(field.L_ff, z_free, rhs, step, "field sensitivity")
        z_S[step + 1, field.free] = z_free

    return StateTrajectory(q=z_q, S=z_S)
