"""Steady background velocity fields for the fluid domain.

The default is a two-cell recirculating ("double gyre") field derived from
the stream function psi(x, y) = A * sin(2 pi x) * sin(pi y) on the unit
square.  It is divergence-free and tangential on all four walls, so it
transports mass around the domain without pushing it through the boundary.
With the default amplitude A = 1/(2 pi) the peak speed is exactly 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import Mesh

DEFAULT_AMPLITUDE = 1.0 / (2.0 * np.pi)


@dataclass(frozen=True)
class FlowField:
    """Background velocity field description.

    kind is one of "double_gyre", "zero" or "custom"; custom fields carry
    their nodal values directly.
    """

    kind: str = "double_gyre"
    amplitude: float = DEFAULT_AMPLITUDE
    nodal_values: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in ("double_gyre", "zero", "custom"):
            raise ValueError(f"unknown flow kind {self.kind!r}")
        if self.kind == "custom" and self.nodal_values is None:
            raise ValueError("custom flow fields require nodal_values")


def _sin_pi(t: np.ndarray) -> np.ndarray:
    """sin(pi * t) with exact zeros at integer t (argument reduction)."""
    k = np.floor(t)
    s = np.sin(np.pi * (t - k))
    return np.where(np.mod(k, 2.0) == 0.0, s, -s)


def double_gyre_at(x, y, amplitude: float = DEFAULT_AMPLITUDE):
    """Velocity of the steady double gyre at (x, y).

    F = (d psi / dy, -d psi / dx) for psi = A sin(2 pi x) sin(pi y), i.e.

        F_x =  pi A sin(2 pi x) cos(pi y)
        F_y = -2 pi A cos(2 pi x) sin(pi y)

    Total on the closed square; accepts scalars or arrays broadcast
    together.  The sine factors vanish exactly on the walls they control,
    so the sampled field is tangential on the whole boundary.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    fx = np.pi * amplitude * _sin_pi(2.0 * x) * np.cos(np.pi * y)
    fy = -2.0 * np.pi * amplitude * np.cos(2.0 * np.pi * x) * _sin_pi(y)
    return np.stack(np.broadcast_arrays(fx, fy), axis=-1)


def sample_at_nodes(mesh: Mesh, field: FlowField) -> np.ndarray:
    """Nodal velocity values of a flow field, shape (n_nodes, 2)."""
    if field.kind == "zero":
        return np.zeros((mesh.n_nodes, 2))
    if field.kind == "custom":
        values = np.asarray(field.nodal_values, dtype=float)
        if values.shape != (mesh.n_nodes, 2):
            raise ValueError(
                f"custom nodal field must have shape ({mesh.n_nodes}, 2), "
                f"got {values.shape}"
            )
        return values
    return double_gyre_at(mesh.nodes[:, 0], mesh.nodes[:, 1], field.amplitude)
