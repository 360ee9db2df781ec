import os

import numpy as np
import pytest

import swarmfield as sf
from swarmfield.cli import main
from swarmfield.scenario import (
    ConfigError,
    Scenario,
    build_problem,
    parse_config,
    preset,
    scenario_from_values,
    scenario_to_config,
)

SMALL_RUN = """
# tiny configuration used by the artifact tests
mesh.nx = 4
mesh.ny = 4
grid.t_final = 0.5
grid.n_steps = 5
optimize.max_iters = 3
output.snapshot_times = 0.0,0.25,0.5
"""


def test_parse_and_override_defaults(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text(SMALL_RUN)
    sc = sf.load_scenario(path)
    assert sc.mesh_nx == 4
    assert sc.n_steps == 5
    assert sc.max_iters == 3
    assert sc.d_q == 0.01  # untouched default


def test_unknown_key_is_named():
    with pytest.raises(ConfigError, match="mesh.resolution"):
        parse_config("mesh.resolution = 12")


def test_parse_error_carries_line_info():
    with pytest.raises(ConfigError, match=":2:"):
        parse_config("mesh.nx = 4\nnot a key value pair")


def test_duplicate_key_rejected():
    with pytest.raises(ConfigError, match="duplicate"):
        parse_config("mesh.nx = 4\nmesh.nx = 5")


def test_invalid_diffusivity_names_key():
    with pytest.raises(ConfigError, match="physics.d_s"):
        scenario_from_values({"physics.d_s": "-0.5"})


def test_invalid_interval_names_keys():
    with pytest.raises(ConfigError, match="source.a"):
        scenario_from_values({"source.a": "0.9", "source.b": "0.1"})


def test_all_zero_weights_rejected():
    values = {
        "cost.alpha_t": "0", "cost.alpha": "0", "cost.beta": "0", "cost.gamma": "0",
    }
    with pytest.raises(ConfigError, match="cost"):
        scenario_from_values(values)


def test_snapshot_time_outside_horizon_rejected():
    with pytest.raises(ConfigError, match="snapshot_times"):
        scenario_from_values({"output.snapshot_times": "0.0,9.0"})


def test_preset_testcase1():
    sc = preset("testcase1")
    assert sc.target_kind == "zero"
    assert sc.s_d == 10.0
    assert sc.source_side == "left"
    assert sc.box_u == 1.0
    assert sc.flow_kind == "double_gyre"


def test_preset_testcase2():
    sc = preset("testcase2")
    assert sc.source_side == "none"
    assert sc.target_kind == "initial"
    assert sc.s0_kind == "gaussian"


def test_full_scale_presets_exist_without_running():
    sc = preset("testcase1-full")
    assert (sc.mesh_nx + 1) * (sc.mesh_ny + 1) == 2809
    assert sc.n_steps == 61
    assert sc.t_final == 1.5
    with pytest.raises(ConfigError):
        preset("testcase9")


def test_config_roundtrip_identity():
    sc = preset("testcase2")
    values = parse_config(scenario_to_config(sc))
    assert scenario_from_values(values) == sc


def test_target_construction():
    sc = Scenario(target_kind="constant", target_value=2.0)
    _, _, problem = build_problem(sc)
    assert np.all(problem.z == 2.0)
    sc2 = Scenario(source_side="none", s0_kind="gaussian", target_kind="initial")
    _, _, problem2 = build_problem(sc2)
    assert np.array_equal(problem2.z, problem2.S0)


def test_initial_field_respects_boundary_values():
    sc = Scenario(s0_kind="gaussian", s0_center_y=0.9, s0_width=0.3)
    _, ops, problem = build_problem(sc)
    dmap = ops.dirichlet
    assert np.array_equal(problem.S0[dmap.constrained], dmap.values)
    assert problem.S0[dmap.free].max() > 0.0


@pytest.fixture(scope="module")
def small_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("artifacts")
    sc = scenario_from_values(parse_config(SMALL_RUN))
    result = sf.run(sc, out)
    return sc, out, result


def test_run_writes_expected_artifacts(small_run):
    _, out, _ = small_run
    names = sorted(os.listdir(out))
    assert "mass_timeseries.csv" in names
    assert "convergence.csv" in names
    assert "manifest.cfg" in names
    for field in ("q", "S", "k", "u_mag"):
        for stamp in ("0.0000", "0.2000", "0.5000"):
            assert f"{field}_t{stamp}.vtk" in names


def test_mass_csv_has_one_row_per_time_node(small_run):
    sc, out, result = small_run
    lines = (out / "mass_timeseries.csv").read_text().splitlines()
    assert lines[0] == "t,m_S_controlled,m_S_uncontrolled,m_q"
    assert len(lines) == 1 + sc.n_steps + 1
    mass_q = np.array([float(line.split(",")[3]) for line in lines[1:]])
    assert np.abs(mass_q - 1.0).max() <= 1e-10


def test_convergence_csv_matches_history(small_run):
    _, out, result = small_run
    lines = (out / "convergence.csv").read_text().splitlines()
    assert lines[0] == "iter,J,grad_norm,step"
    assert len(lines) == 1 + len(result.report.history)
    costs = [float(line.split(",")[1]) for line in lines[1:]]
    assert all(b <= a for a, b in zip(costs, costs[1:]))


def test_rerun_from_manifest_is_bitwise_identical(small_run, tmp_path):
    _, out, _ = small_run
    sc = sf.load_scenario(out / "manifest.cfg")
    rerun_dir = tmp_path / "rerun"
    sf.run(sc, rerun_dir)
    for name in ("mass_timeseries.csv", "convergence.csv"):
        assert (out / name).read_text() == (rerun_dir / name).read_text()


def test_snapshot_fields_parse_back(small_run):
    _, out, result = small_run
    points, triangles, values = sf.read_snapshot(out / "q_t0.5000.vtk")
    assert np.array_equal(values, result.controlled.q[-1])


# --- command-line interface ---------------------------------------------------

def test_cli_run_exit_zero(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(SMALL_RUN)
    out = tmp_path / "out"
    assert main(["run", str(cfg), "--out", str(out)]) == 0
    assert (out / "manifest.cfg").exists()


def test_cli_rejects_bad_config(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("physics.d_s = -1\n")
    assert main(["run", str(cfg), "--out", str(tmp_path / "o")]) == 2


def test_cli_requires_config_or_preset(tmp_path):
    assert main(["run", "--out", str(tmp_path / "o")]) == 2


def test_cli_missing_file_is_validation_error(tmp_path):
    assert main(["run", str(tmp_path / "nope.cfg"), "--out", str(tmp_path / "o")]) == 2


def test_cli_export_mesh(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("mesh.nx = 2\nmesh.ny = 2\n")
    out = tmp_path / "mesh.vtk"
    assert main(["export-mesh", str(cfg), "--out", str(out)]) == 0
    points, triangles, _ = sf.read_snapshot(out)
    assert len(points) == 9
    assert len(triangles) == 8


def test_cli_check_gradient_small(tmp_path, capsys):
    cfg = tmp_path / "tiny.cfg"
    cfg.write_text(
        "mesh.nx = 3\nmesh.ny = 3\ngrid.t_final = 0.4\ngrid.n_steps = 4\n"
        "output.snapshot_times = 0.0,0.4\n"
    )
    code = main(["check-gradient", str(cfg), "--directions", "3"])
    captured = capsys.readouterr()
    assert "max relative error" in captured.out
    assert code == 0


def test_cli_run_multiple_configs_with_jobs(tmp_path):
    cfg_a = tmp_path / "a.cfg"
    cfg_b = tmp_path / "b.cfg"
    cfg_a.write_text(SMALL_RUN)
    cfg_b.write_text(SMALL_RUN + "cost.beta = 0.2\n")
    out = tmp_path / "multi"
    assert main(["run", str(cfg_a), str(cfg_b), "--out", str(out), "--jobs", "2"]) == 0
    assert (out / "a" / "manifest.cfg").exists()
    assert (out / "b" / "manifest.cfg").exists()
