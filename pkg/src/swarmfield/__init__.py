"""Indirect optimal control of an advection-diffusion field through a
controllable swarm density, on P1 triangular finite elements.

The package provides the full pipeline: mesh and operator assembly,
implicit-Euler forward and linearized solves, the exact discrete adjoint,
reduced cost gradients, projected gradient descent, and a scenario runner
with CSV/VTK artifacts.
"""

__version__ = "0.1.0"

from .adjoint import AdjointTrajectory, adjoint_inner_product_test, solve_adjoint
from .assembly import (
    AssembledOperators,
    DirichletMap,
    Rank3Tensor,
    assemble_advection,
    assemble_mass,
    assemble_operators,
    assemble_reaction_tensor,
    assemble_stiffness,
    assemble_transport_tensors,
    build_dirichlet_map,
    contract_tensor,
)
from .cost import (
    CostWeights,
    GradientTrajectory,
    OcpProblem,
    evaluate_cost,
    expand_target,
    fd_gradient_check,
    reduced_gradient,
)
from .flow import FlowField, double_gyre_at, sample_at_nodes
from .forward import (
    ControlTrajectory,
    SolverFailure,
    StateTrajectory,
    TimeGrid,
    solve_forward,
    solve_linearized,
    total_mass,
)
from .mesh import (
    DIRICHLET_SOURCE,
    DIRICHLET_ZERO,
    NOFLUX_ONLY,
    BoundarySpec,
    Mesh,
    build_unit_square_mesh,
    tag_boundary,
)
from .optimize import OptimizeOptions, OptimizeReport, minimize, project_box
from .scenario import ConfigError, RunResult, Scenario, load_scenario, preset, run
from .vtkio import export_mesh, export_snapshot, read_snapshot

__all__ = [
    "AdjointTrajectory",
    "AssembledOperators",
    "BoundarySpec",
    "ConfigError",
    "ControlTrajectory",
    "CostWeights",
    "DIRICHLET_SOURCE",
    "DIRICHLET_ZERO",
    "DirichletMap",
    "FlowField",
    "GradientTrajectory",
    "Mesh",
    "NOFLUX_ONLY",
    "OcpProblem",
    "OptimizeOptions",
    "OptimizeReport",
    "Rank3Tensor",
    "RunResult",
    "Scenario",
    "SolverFailure",
    "StateTrajectory",
    "TimeGrid",
    "adjoint_inner_product_test",
    "assemble_advection",
    "assemble_mass",
    "assemble_operators",
    "assemble_reaction_tensor",
    "assemble_stiffness",
    "assemble_transport_tensors",
    "build_dirichlet_map",
    "build_unit_square_mesh",
    "contract_tensor",
    "double_gyre_at",
    "evaluate_cost",
    "expand_target",
    "export_mesh",
    "export_snapshot",
    "fd_gradient_check",
    "load_scenario",
    "minimize",
    "preset",
    "project_box",
    "read_snapshot",
    "reduced_gradient",
    "run",
    "sample_at_nodes",
    "solve_adjoint",
    "solve_forward",
    "solve_linearized",
    "tag_boundary",
    "total_mass",
]
