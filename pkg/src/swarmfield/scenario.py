"""Scenario configuration, presets and the end-to-end run driver.

Configs are flat ``section.key = value`` text files (human-diffable, no
schema engine).  Unknown keys are rejected; every value is validated
against the module preconditions at load time so failures surface before
any solve starts.  A run writes plot-ready artifacts: mass and
convergence CSVs, legacy-VTK field snapshots, and a manifest holding the
fully resolved config (itself a loadable config file, so any run can be
reproduced from its output directory alone).
"""

from __future__ import annotations

import os
from dataclasses import dataclass, replace

import numpy as np

from . import __version__
from .assembly import AssembledOperators, assemble_operators
from .cost import CostWeights, OcpProblem, evaluate_cost
from .flow import FlowField, sample_at_nodes
from .forward import ControlTrajectory, StateTrajectory, TimeGrid, solve_forward, total_mass
from .mesh import BoundarySpec, Mesh, build_unit_square_mesh, tag_boundary
from .optimize import OptimizeOptions, OptimizeReport, minimize
from .vtkio import export_snapshot


class ConfigError(ValueError):
    """Configuration file problem: parse failure or invalid value."""


@dataclass(frozen=True)
class Scenario:
    """Fully resolved run configuration (defaults are desk scale)."""

    mesh_nx: int = 8
    mesh_ny: int = 8
    t_final: float = 1.5
    n_steps: int = 15
    d_q: float = 0.01
    d_s: float = 0.01
    s_d: float = 10.0
    flow_kind: str = "double_gyre"
    flow_amplitude: float = 1.0 / (2.0 * np.pi)
    source_side: str = "left"
    source_a: float = 0.25
    source_b: float = 0.75
    q0_kind: str = "uniform"
    s0_kind: str = "zero"
    s0_center_x: float = 0.5
    s0_center_y: float = 0.75
    s0_width: float = 0.1
    s0_amplitude: float = 1.0
    target_kind: str = "zero"
    target_value: float = 0.0
    alpha_t: float = 10.0
    alpha: float = 1.0
    beta: float = 0.1
    gamma: float = 0.1
    max_iters: int = 100
    grad_tol: float = 1e-6
    armijo_c: float = 1e-4
    backtrack_factor: float = 0.5
    initial_step: float = 1.0
    box_u: float | None = None
    box_k: float | None = None
    seed: int | None = None
    precondition: bool = False
    snapshot_times: tuple[float, ...] = (0.0, 0.25, 1.5)


# --- config key registry ---------------------------------------------------

def _parse_int(raw: str) -> int:
    return int(raw)


def _parse_float(raw: str) -> float:
    return float(raw)


def _parse_bool(raw: str) -> bool:
    low = raw.lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"expected a boolean, got {raw!r}")


def _parse_opt_float(raw: str) -> float | None:
    return None if raw.lower() == "none" else float(raw)


def _parse_opt_int(raw: str) -> int | None:
    return None if raw.lower() == "none" else int(raw)


def _parse_float_list(raw: str) -> tuple[float, ...]:
    if not raw.strip():
        return ()
    return tuple(float(part) for part in raw.split(","))


def _choice(*allowed: str):
    def parse(raw: str) -> str:
        if raw not in allowed:
            raise ValueError(f"expected one of {allowed}, got {raw!r}")
        return raw

    return parse


def _positive(v) -> bool:
    return v is None or v > 0


def _nonnegative(v) -> bool:
    return v >= 0


def _at_least_one(v) -> bool:
    return v >= 1


# key -> (Scenario field, parser, predicate or None, requirement text)
_KEYS = {
    "mesh.nx": ("mesh_nx", _parse_int, _at_least_one, ">= 1"),
    "mesh.ny": ("mesh_ny", _parse_int, _at_least_one, ">= 1"),
    "grid.t_final": ("t_final", _parse_float, _positive, "> 0"),
    "grid.n_steps": ("n_steps", _parse_int, _at_least_one, ">= 1"),
    "physics.d_q": ("d_q", _parse_float, _positive, "> 0"),
    "physics.d_s": ("d_s", _parse_float, _positive, "> 0"),
    "physics.s_d": ("s_d", _parse_float, None, ""),
    "flow.kind": ("flow_kind", _choice("double_gyre", "zero"), None, ""),
    "flow.amplitude": ("flow_amplitude", _parse_float, None, ""),
    "source.side": (
        "source_side", _choice("left", "right", "bottom", "top", "none"), None, "",
    ),
    "source.a": ("source_a", _parse_float, None, ""),
    "source.b": ("source_b", _parse_float, None, ""),
    "init.q0": ("q0_kind", _choice("uniform"), None, ""),
    "init.s0": ("s0_kind", _choice("zero", "gaussian"), None, ""),
    "init.s0_center_x": ("s0_center_x", _parse_float, None, ""),
    "init.s0_center_y": ("s0_center_y", _parse_float, None, ""),
    "init.s0_width": ("s0_width", _parse_float, _positive, "> 0"),
    "init.s0_amplitude": ("s0_amplitude", _parse_float, None, ""),
    "target.kind": ("target_kind", _choice("zero", "initial", "constant"), None, ""),
    "target.value": ("target_value", _parse_float, None, ""),
    "cost.alpha_t": ("alpha_t", _parse_float, _nonnegative, ">= 0"),
    "cost.alpha": ("alpha", _parse_float, _nonnegative, ">= 0"),
    "cost.beta": ("beta", _parse_float, _nonnegative, ">= 0"),
    "cost.gamma": ("gamma", _parse_float, _nonnegative, ">= 0"),
    "optimize.max_iters": ("max_iters", _parse_int, _nonnegative, ">= 0"),
    "optimize.grad_tol": ("grad_tol", _parse_float, _positive, "> 0"),
    "optimize.armijo_c": ("armijo_c", _parse_float, lambda v: 0 < v < 1, "in (0, 1)"),
    "optimize.backtrack_factor": (
        "backtrack_factor", _parse_float, lambda v: 0 < v < 1, "in (0, 1)",
    ),
    "optimize.initial_step": ("initial_step", _parse_float, _positive, "> 0"),
    "optimize.box_u": ("box_u", _parse_opt_float, _positive, "> 0 or none"),
    "optimize.box_k": ("box_k", _parse_opt_float, _positive, "> 0 or none"),
    "optimize.seed": ("seed", _parse_opt_int, None, ""),
    "optimize.precondition": ("precondition", _parse_bool, None, ""),
    "output.snapshot_times": ("snapshot_times", _parse_float_list, None, ""),
}

_FIELD_TO_KEY = {entry[0]: key for key, entry in _KEYS.items()}


def _validate_scenario(sc: Scenario) -> Scenario:
    """Cross-field checks; raises ConfigError naming the offending key."""
    if sc.source_side != "none" and not (0.0 <= sc.source_a < sc.source_b <= 1.0):
        raise ConfigError(
            f"source.a/source.b: need 0 <= a < b <= 1, got ({sc.source_a}, {sc.source_b})"
        )
    if sc.alpha_t == 0 and sc.alpha == 0 and sc.beta == 0 and sc.gamma == 0:
        raise ConfigError("cost.*: at least one cost weight must be positive")
    for t in sc.snapshot_times:
        if not 0.0 <= t <= sc.t_final:
            raise ConfigError(
                f"output.snapshot_times: time {t} outside [0, {sc.t_final}]"
            )
    return sc


def parse_config(text: str, origin: str = "<config>") -> dict[str, str]:
    """Parse flat key = value lines; raises ConfigError with line info."""
    values: dict[str, str] = {}
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{origin}:{lineno}: expected 'key = value', got {raw_line!r}")
        key, raw_value = (part.strip() for part in line.split("=", 1))
        if key not in _KEYS:
            raise ConfigError(f"{origin}:{lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{origin}:{lineno}: duplicate key {key!r}")
        values[key] = raw_value
    return values


def scenario_from_values(values: dict[str, str], base: Scenario | None = None) -> Scenario:
    """Apply parsed key/value overrides on top of a base scenario."""
    sc = base if base is not None else Scenario()
    updates = {}
    for key, raw in values.items():
        field_name, parse, predicate, requirement = _KEYS[key]
        try:
            value = parse(raw)
        except ValueError as exc:
            raise ConfigError(f"{key}: {exc}") from exc
        if predicate is not None and not predicate(value):
            raise ConfigError(f"{key}: must be {requirement}, got {value}")
        updates[field_name] = value
    return _validate_scenario(replace(sc, **updates))


def load_scenario(path, base: Scenario | None = None) -> Scenario:
    """Load and validate a scenario file (optionally on top of a preset)."""
    with open(path) as fh:
        text = fh.read()
    return scenario_from_values(parse_config(text, origin=str(path)), base=base)


def scenario_to_config(sc: Scenario) -> str:
    """Render a scenario as a loadable config with every key resolved."""
    lines = [f"# swarmfield {__version__} resolved configuration"]
    for key, (field_name, _, _, _) in _KEYS.items():
        value = getattr(sc, field_name)
        if value is None:
            rendered = "none"
        elif isinstance(value, bool):
            rendered = "true" if value else "false"
        elif isinstance(value, float):
            rendered = format(value, ".17g")
        elif isinstance(value, tuple):
            rendered = ",".join(format(v, ".17g") for v in value)
        else:
            rendered = str(value)
        lines.append(f"{key} = {rendered}")
    return "\n".join(lines) + "\n"


_PRESETS = {}


def preset(name: str) -> Scenario:
    """Named scenario presets.

    ``testcase1``: regulation to zero against an active source segment.
    ``testcase2``: tracking of the initial condition under homogeneous
    boundary values.  The ``*-full`` variants run at full scale (52x52
    mesh, 61 steps) and are excluded from CI.
    """
    try:
        return _PRESETS[name]()
    except KeyError:
        raise ConfigError(
            f"unknown preset {name!r}; available: {sorted(_PRESETS)}"
        ) from None


def _testcase1() -> Scenario:
    return _validate_scenario(
        Scenario(
            target_kind="zero",
            s_d=10.0,
            source_side="left",
            box_u=1.0,
            gamma=0.01,
            max_iters=60,
            grad_tol=1e-3,
            precondition=True,
        )
    )


def _testcase2() -> Scenario:
    return _validate_scenario(
        Scenario(
            source_side="none",
            s0_kind="gaussian",
            target_kind="initial",
            d_s=0.25,
            alpha=4.0,
            gamma=0.01,
            max_iters=200,
            grad_tol=1e-3,
            precondition=True,
        )
    )


_PRESETS["testcase1"] = _testcase1
_PRESETS["testcase2"] = _testcase2
_PRESETS["testcase1-full"] = lambda: replace(_testcase1(), mesh_nx=52, mesh_ny=52, n_steps=61)
_PRESETS["testcase2-full"] = lambda: replace(_testcase2(), mesh_nx=52, mesh_ny=52, n_steps=61)


# --- construction of the problem pieces ------------------------------------

def build_mesh(sc: Scenario) -> Mesh:
    mesh = build_unit_square_mesh(sc.mesh_nx, sc.mesh_ny)
    spec = None
    if sc.source_side != "none":
        spec = BoundarySpec(side=sc.source_side, interval=(sc.source_a, sc.source_b))
    return tag_boundary(mesh, spec)


def build_operators(sc: Scenario, mesh: Mesh) -> AssembledOperators:
    field = FlowField(kind=sc.flow_kind, amplitude=sc.flow_amplitude)
    f_nodes = sample_at_nodes(mesh, field)
    return assemble_operators(mesh, sc.d_q, sc.d_s, f_nodes, sc.s_d)


def initial_density(sc: Scenario, ops: AssembledOperators) -> np.ndarray:
    ones = np.ones(ops.n_nodes)
    return ones / total_mass(ones, ops.M_q)


def initial_field(sc: Scenario, mesh: Mesh, ops: AssembledOperators) -> np.ndarray:
    """Initial field, clamped to the prescribed boundary values."""
    if sc.s0_kind == "gaussian":
        dx = mesh.nodes[:, 0] - sc.s0_center_x
        dy = mesh.nodes[:, 1] - sc.s0_center_y
        S0 = sc.s0_amplitude * np.exp(-(dx**2 + dy**2) / (2.0 * sc.s0_width**2))
    else:
        S0 = np.zeros(mesh.n_nodes)
    dmap = ops.dirichlet
    S0[dmap.constrained] = dmap.values
    return S0


def target_field(sc: Scenario, S0: np.ndarray) -> np.ndarray:
    if sc.target_kind == "initial":
        return S0.copy()
    if sc.target_kind == "constant":
        return np.full(S0.shape, sc.target_value)
    return np.zeros(S0.shape)


def build_problem(sc: Scenario) -> tuple[Mesh, AssembledOperators, OcpProblem]:
    mesh = build_mesh(sc)
    ops = build_operators(sc, mesh)
    q0 = initial_density(sc, ops)
    S0 = initial_field(sc, mesh, ops)
    problem = OcpProblem(
        q0=q0,
        S0=S0,
        z=target_field(sc, S0),
        weights=CostWeights(sc.alpha_t, sc.alpha, sc.beta, sc.gamma),
        grid=TimeGrid(sc.t_final, sc.n_steps),
    )
    return mesh, ops, problem


def optimizer_options(sc: Scenario) -> OptimizeOptions:
    return OptimizeOptions(
        max_iters=sc.max_iters,
        grad_tol=sc.grad_tol,
        armijo_c=sc.armijo_c,
        backtrack_factor=sc.backtrack_factor,
        initial_step=sc.initial_step,
        box_u=sc.box_u,
        box_k=sc.box_k,
        precondition=sc.precondition,
    )


def initial_control(sc: Scenario, n_nodes: int) -> ControlTrajectory:
    """Zero start by default; a seed switches to small random restarts."""
    if sc.seed is None:
        return ControlTrajectory.zeros(sc.n_steps, n_nodes)
    rng = np.random.default_rng(sc.seed)
    shape = (sc.n_steps, n_nodes)
    return ControlTrajectory(
        0.1 * rng.standard_normal(shape),
        0.1 * rng.standard_normal(shape),
        0.1 * rng.standard_normal(shape),
    )


# --- run driver -------------------------------------------------------------

@dataclass
class RunResult:
    """Artifacts and diagnostics of one scenario run."""

    scenario: Scenario
    out_dir: str
    report: OptimizeReport
    controlled: StateTrajectory
    uncontrolled: StateTrajectory
    uncontrolled_cost: float
    mass_controlled: np.ndarray
    mass_uncontrolled: np.ndarray
    mass_density: np.ndarray


def _write_csv(path, header: list[str], columns: list[np.ndarray]) -> None:
    rows = len(columns[0])
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for r in range(rows):
            fh.write(",".join(format(float(col[r]), ".17g") for col in columns) + "\n")


def run(sc: Scenario, out_dir) -> RunResult:
    """Execute a scenario end to end and write its artifact set.

    Writes mass_timeseries.csv (t, controlled/uncontrolled field mass,
    density mass), convergence.csv (iter, J, grad_norm, step), legacy-VTK
    snapshots of q, S, k and |u| at the configured times, and
    manifest.cfg with the fully resolved configuration.
    """
    os.makedirs(out_dir, exist_ok=True)
    mesh, ops, problem = build_problem(sc)
    grid = problem.grid

    zero_ctrl = ControlTrajectory.zeros(grid.n_steps, ops.n_nodes)
    uncontrolled = solve_forward(ops, zero_ctrl, problem.q0, problem.S0, grid)
    uncontrolled_cost = evaluate_cost(
        uncontrolled, zero_ctrl, problem.z, problem.weights, ops, grid
    )

    ctrl0 = initial_control(sc, ops.n_nodes)
    report = minimize(ops, problem, ctrl0, optimizer_options(sc))
    controlled = solve_forward(ops, report.control, problem.q0, problem.S0, grid)

    times = grid.times()
    mass_c = np.array([total_mass(S, ops.M_S) for S in controlled.S])
    mass_u = np.array([total_mass(S, ops.M_S) for S in uncontrolled.S])
    mass_q = np.array([total_mass(q, ops.M_q) for q in controlled.q])
    _write_csv(
        os.path.join(out_dir, "mass_timeseries.csv"),
        ["t", "m_S_controlled", "m_S_uncontrolled", "m_q"],
        [times, mass_c, mass_u, mass_q],
    )

    history = np.array(report.history)
    _write_csv(
        os.path.join(out_dir, "convergence.csv"),
        ["iter", "J", "grad_norm", "step"],
        [np.arange(len(report.history)), history[:, 0], history[:, 1], history[:, 2]],
    )

    u_mag = np.hypot(report.control.u_x, report.control.u_y)
    for t in sc.snapshot_times:
        node_idx = int(round(t / grid.dt))
        node_idx = min(max(node_idx, 0), grid.n_steps)
        ctrl_idx = max(node_idx, 1) - 1
        t_snap = times[node_idx]
        for name, values in (
            ("q", controlled.q[node_idx]),
            ("S", controlled.S[node_idx]),
            ("k", report.control.k[ctrl_idx]),
            ("u_mag", u_mag[ctrl_idx]),
        ):
            export_snapshot(
                values, mesh,
                os.path.join(out_dir, f"{name}_t{t_snap:.4f}.vtk"),
                name=name,
            )

    with open(os.path.join(out_dir, "manifest.cfg"), "w") as fh:
        fh.write(scenario_to_config(sc))

    return RunResult(
        scenario=sc,
        out_dir=str(out_dir),
        report=report,
        controlled=controlled,
        uncontrolled=uncontrolled,
        uncontrolled_cost=uncontrolled_cost,
        mass_controlled=mass_c,
        mass_uncontrolled=mass_u,
        mass_density=mass_q,
    )
