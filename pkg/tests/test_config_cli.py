import math
from pathlib import Path

import numpy as np
import pytest

from geondi import cli, sim
from geondi.config import ConfigError, ScenarioConfig, from_dict, load_scenario, to_dict

ROOT = Path(__file__).resolve().parents[1]
SCENARIOS = ROOT / "scenarios"

# short regulation used wherever a real simulation is needed
SHORT = """\
name: short
controller: {feedforward: false}
sensor: {enabled: false}
actuation: {enabled: false}
sim: {dt: 1e-3, duration: 0.5, initial_attitude: [0.3, -0.2, 0.1]}
"""

# positive attitude gain with an ideal inner loop: the error grows until attitude is lost
UNSTABLE = """\
name: unstable
controller:
  inner_loop: ideal
  feedforward: false
  attitude: {kp: 5.0, ki: 0.0, kd: 0.0}
sensor: {enabled: false}
actuation: {enabled: false}
sim: {dt: 1e-3, duration: 3.0, initial_attitude: [0.1, 0.0, 0.0]}
"""


def _write(tmp_path, text, name="cfg.yaml"):
    p = tmp_path / name
    p.write_text(text)
    return p


# --- loading -------------------------------------------------------------------------


def test_empty_file_gives_valid_defaults(tmp_path):
    cfg = load_scenario(_write(tmp_path, "", "minimal.yaml"))
    assert cfg.name == "minimal"
    assert cfg.sim.dt == 5e-4 and cfg.sim.duration == 6.0
    assert cfg.controller.type == "geometric"
    assert cfg.controller.rate.kp == 4.2 and cfg.controller.rate.kd == 0.42


def test_scientific_notation_is_a_float(tmp_path):
    cfg = load_scenario(_write(tmp_path, "sim: {dt: 1e-3}\n"))
    assert isinstance(cfg.sim.dt, float) and cfg.sim.dt == 1e-3


def test_zero_dt_names_the_field(tmp_path):
    with pytest.raises(ConfigError) as exc:
        load_scenario(_write(tmp_path, "sim:\n  dt: 0\n"))
    assert exc.value.field == "dt" and "dt" in str(exc.value)


def test_unknown_key_reports_path_and_line(tmp_path):
    with pytest.raises(ConfigError) as exc:
        load_scenario(_write(tmp_path, "sim:\n  dt: 1e-3\n  durration: 2.0\n"))
    assert exc.value.field == "sim.durration" and exc.value.line == 3


def test_parse_error_reports_line(tmp_path):
    with pytest.raises(ConfigError) as exc:
        load_scenario(_write(tmp_path, "sim:\n  dt: 1e-3\n  duration: [1, 2\n"))
    assert exc.value.line is not None and exc.value.line >= 3


@pytest.mark.parametrize(
    "data, field",
    [
        ({"controller": {"type": "quaternion"}}, "type"),
        ({"controller": {"attitude": {"kp": [1.0, 2.0]}}}, "attitude.kp"),
        ({"sim": {"initial_attitude": [0.0, 1.0]}}, "initial_attitude"),
        ({"plant": {"inertia": [0.03, -0.03, 0.05]}}, "inertia"),
        ({"actuation": {"w_min": 2000.0}}, "w_min"),
        ({"sensor": {"pade_order": 0}}, "pade_order"),
        ({"sim": {"duration": -1.0}}, "duration"),
    ],
)
def test_validation_names_field(data, field):
    with pytest.raises(ConfigError) as exc:
        from_dict(data)
    assert exc.value.field == field


def test_flip_scenario_has_three_axis_compensators():
    cfg = load_scenario(SCENARIOS / "flip_geometric_ff.yaml")
    comp = sim.rate_compensator(cfg)
    att = sim.attitude_block(cfg)
    assert comp.n_inputs == comp.n_outputs == 3
    assert att.n_inputs == att.n_outputs == 3
    # kp + kd s/(tau_f s + 1) at DC is kp on every axis
    from geondi import lti

    assert np.allclose(lti.transfer_eval(comp, 0.0), 4.2 * np.eye(3))


def test_all_shipped_scenarios_load():
    files = sorted(SCENARIOS.glob("*.yaml"))
    assert len(files) >= 4
    for f in files:
        assert load_scenario(f).name == f.stem


def test_replace_and_roundtrip():
    cfg = ScenarioConfig().replace(**{"sim.dt": 1e-3, "controller.type": "euler"})
    assert cfg.sim.dt == 1e-3 and cfg.controller.type == "euler"
    assert from_dict(to_dict(cfg)) == cfg
    assert from_dict({}) == ScenarioConfig()


# --- runs, CSV and determinism -------------------------------------------------------------


def test_csv_header_and_columns(tmp_path):
    cfg = load_scenario(_write(tmp_path, SHORT))
    res = sim.run(cfg, out_dir=tmp_path / "out")
    lines = (tmp_path / "out" / "short.csv").read_text().splitlines()
    assert lines[0].startswith(f"# geondi timeseries v{sim.CSV_VERSION}")
    assert lines[1].split(",") == sim.CSV_COLUMNS
    assert len(lines) - 2 == len(res.trace.rows) == 501
    assert (tmp_path / "out" / "short.summary.txt").exists()
    assert not res.summary.unstable and math.isfinite(res.summary.final_psi)


def test_repeated_runs_are_bit_identical(tmp_path):
    cfg = load_scenario(_write(tmp_path, SHORT))
    a = sim.csv_text(sim.run(cfg, with_bandwidth=False).trace, cfg.name)
    b = sim.csv_text(sim.run(cfg, with_bandwidth=False).trace, cfg.name)
    assert a == b


def test_random_initial_attitude_depends_on_seed():
    cfg = ScenarioConfig().replace(**{"sim.random_initial_attitude": True, "sim.seed": 3})
    assert np.array_equal(sim.initial_attitude(cfg), sim.initial_attitude(cfg))
    other = cfg.replace(**{"sim.seed": 4})
    assert not np.allclose(sim.initial_attitude(cfg), sim.initial_attitude(other))


def test_divergence_keeps_partial_log(tmp_path):
    cfg = load_scenario(_write(tmp_path, UNSTABLE))
    res = sim.run(cfg, with_bandwidth=False)
    assert res.summary.unstable and "attitude lost" in res.summary.reason
    assert math.isnan(res.summary.final_psi)
    assert 0 < len(res.trace.rows) < 3000


def test_compare_needs_two_runs_and_is_deterministic(tmp_path):
    cfg = load_scenario(_write(tmp_path, SHORT))
    s1 = sim.run(cfg, with_bandwidth=False).summary
    s2 = sim.run(cfg, with_bandwidth=False).summary
    assert s1 == s2
    with pytest.raises(ValueError):
        sim.compare([s1])
    table = sim.compare([s1, s2])
    assert "peak_psi" in table and "effort" in table


# --- command line ----------------------------------------------------------------------


def test_cli_run_success(tmp_path, capsys):
    cfg = _write(tmp_path, SHORT)
    assert cli.main(["run", str(cfg), "--out", str(tmp_path / "o")]) == 0
    assert "final psi" in capsys.readouterr().out
    assert (tmp_path / "o" / "short.csv").exists()


def test_cli_run_divergence_exit_code(tmp_path):
    cfg = _write(tmp_path, UNSTABLE)
    assert cli.main(["run", str(cfg), "--out", str(tmp_path / "o")]) == cli.EXIT_DIVERGED
    assert (tmp_path / "o" / "unstable.csv").exists()


def test_cli_config_errors(tmp_path, capsys):
    assert cli.main(["run", str(_write(tmp_path, "sim: {dt: 0}\n"))]) == cli.EXIT_CONFIG
    assert "dt" in capsys.readouterr().err
    assert cli.main(["certify", str(tmp_path / "missing.yaml")]) == cli.EXIT_CONFIG
    assert cli.main(["compare", str(_write(tmp_path, SHORT))]) == cli.EXIT_CONFIG


def test_cli_certify_default_gains(tmp_path, capsys):
    assert cli.main(["certify", str(_write(tmp_path, "")), "--skip-sensor"]) == 0
    out = capsys.readouterr().out
    assert "attitude LMI       feasible" in out and "certified          True" in out


def test_cli_certify_flipped_gains(tmp_path, capsys):
    text = "controller:\n  attitude: {kp: 27.75, ki: 1.85, kd: 5.55, eps: 0.001, tau_f: 10.0}\n"
    assert cli.main(["certify", str(_write(tmp_path, text)), "--skip-sensor"]) == cli.EXIT_UNCERTIFIED
    assert "attitude LMI       infeasible" in capsys.readouterr().out


def test_cli_certify_warns_on_low_bandwidth_ratio(capsys):
    assert cli.main(["certify", str(SCENARIOS / "proportional.yaml"), "--skip-sensor"]) == 0
    assert "warning: axis x" in capsys.readouterr().out


def test_cli_compare_merges_duplicate_ids(tmp_path, capsys):
    a = _write(tmp_path, SHORT, "a.yaml")
    b = _write(tmp_path, SHORT, "b.yaml")
    assert cli.main(["compare", str(a), str(b)]) == 0
    out = capsys.readouterr().out
    assert "short#0" in out and "short#1" in out
