"""
Verifying the adjoint gradient
==============================

The backward solve is the exact transpose of the forward recursion, so the
assembled reduced gradient differs from central finite differences only by
floating-point noise: truncation error shrinks quadratically in the probe
size until round-off takes over.
"""

import numpy as np

import swarmfield as sf
from swarmfield.cost import OcpProblem

mesh = sf.tag_boundary(
    sf.build_unit_square_mesh(4, 4), sf.BoundarySpec("left", (0.25, 0.75))
)
flow = sf.sample_at_nodes(mesh, sf.FlowField())
ops = sf.assemble_operators(mesh, D_q=0.01, D_S=0.01, f_nodes=flow, source_value=10.0)
grid = sf.TimeGrid(0.5, 5)
n = mesh.n_nodes

rng = np.random.default_rng(3)
ctrl = sf.ControlTrajectory(
    0.4 * rng.standard_normal((5, n)),
    0.4 * rng.standard_normal((5, n)),
    0.4 * rng.standard_normal((5, n)),
)
problem = OcpProblem(
    q0=np.ones(n) / sf.total_mass(np.ones(n), ops.M_q),
    S0=ops.dirichlet.full_values(),
    z=np.zeros(n),
    weights=sf.CostWeights(10.0, 1.0, 0.1, 0.1),
    grid=grid,
)

print("probe size   max relative gradient error (10 random directions)")
for eps in (1e-2, 1e-3, 1e-4, 1e-5):
    err = sf.fd_gradient_check(ops, ctrl, problem, directions=10, epsilon=eps)
    print(f"  {eps:.0e}     {err:.3e}")

residual = sf.adjoint_inner_product_test(ops, ctrl, grid, trials=10)
print(f"\nlinearized/adjoint duality residual: {residual:.3e}")
