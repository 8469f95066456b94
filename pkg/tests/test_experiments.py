import pytest

from meccoop import cli
from meccoop.experiments import (ConfigError, ExperimentConfig, build_scenario, csv_header,
                                 format_rows, parse_config, run_sweep)

SMALL = """
# two-point block-length sweep
[task]
bits_mbits = 0.02
[sweep]
variable = T
start = 0.05
stop = 0.06
step = 0.01
[run]
schemes = local, joint
"""


def test_build_scenario_examples():
    s = build_scenario(ExperimentConfig(helper_distance_m=120))
    assert s.gain_user_helper == pytest.approx(5.787e-10, abs=1e-13)
    assert s.gain_helper_ap == pytest.approx(4.552e-10, abs=1e-13)
    assert s.gain_user_ap == pytest.approx(6.4e-11, rel=1e-12)
    assert s.noise_ap_w == pytest.approx(1e-10, rel=1e-12)
    assert s.p_user_max_w == pytest.approx(10.0, rel=1e-12)
    assert s.task_bits == pytest.approx(2e4)
    assert s.local_bits_cap == pytest.approx(2e5)


def test_sweep_variable_substitution():
    c = ExperimentConfig(sweep_variable="D", sweep_start=50, sweep_stop=200, sweep_step=50)
    s = build_scenario(c, 50.0)
    assert s.gain_user_helper == pytest.approx(1e-6 / 125)
    assert build_scenario(ExperimentConfig(sweep_variable="L"), 0.05).task_bits == pytest.approx(5e4)
    assert build_scenario(ExperimentConfig(), 0.03).block_length_s == 0.03
    with pytest.raises(ConfigError):
        build_scenario(c, 250.0)


def test_sweep_values():
    assert ExperimentConfig().sweep_values() == [0.02, 0.03, 0.04, 0.05, 0.06, 0.07, 0.08, 0.09, 0.1]
    c = ExperimentConfig(sweep_start=0.1, sweep_stop=0.1)
    assert c.sweep_values() == [0.1]


def test_parse_config():
    c = parse_config(SMALL)
    assert c.schemes == ("local", "joint")
    assert c.sweep_start == 0.05 and c.bits_mbits == 0.02
    c = parse_config("schemes.literal_comm_time = true\nlayout.helper_distance_m = 80")
    assert c.literal_comm_time and c.helper_distance_m == 80


@pytest.mark.parametrize("text", [
    "sweep.variable = P",
    "layout.helper_distance_m = 300",
    "sweep.step = 0",
    "sweep.start = 0.2\nsweep.stop = 0.1",
    "bogus.key = 1",
    "task.bits_mbits = lots",
    "run.schemes = local, teleport",
    "no equals sign",
])
def test_config_errors(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_csv_shape_and_format():
    c = parse_config(SMALL)
    rows = run_sweep(c)
    text = format_rows(c, rows)
    lines = text.split("\n")
    assert text.endswith("\n") and "\r" not in text
    assert lines[0].split(",") == csv_header(c)
    assert len(lines) - 2 == len(c.sweep_values())
    first = lines[1].split(",")
    assert first[0] == "0.050000000000000003"  # 17 significant digits
    assert float(first[1]) == rows[0].results["local"].energy_j
    assert first[-1] == "optimal"


def test_infeasible_marker():
    c = parse_config(SMALL + "\n[task]\nbits_mbits = 50\n")
    text = format_rows(c, run_sweep(c))
    row = text.split("\n")[1].split(",")
    assert row[1] == "infeasible" and row[2] == "infeasible"
    assert row[-1] == "infeasible_task"


def test_empty_scheme_list_header_only():
    c = parse_config(SMALL + "\nrun.schemes =\n")
    assert c.schemes == ()
    text = format_rows(c, run_sweep(c))
    assert text.count("\n") == 1 and text.startswith("sweep_T,joint_tau1_s")


def test_parallel_rows_match_serial():
    c = parse_config(SMALL)
    serial = format_rows(c, run_sweep(c))
    c2 = parse_config(SMALL + "\nrun.workers = 2\n")
    assert format_rows(c2, run_sweep(c2)) == serial


# ---- command line ------------------------------------------------------

@pytest.fixture
def cfg(tmp_path):
    p = tmp_path / "small.cfg"
    p.write_text(SMALL)
    return p


def test_cli_sweep_writes_csv(cfg, tmp_path):
    out = tmp_path / "out.csv"
    assert cli.main(["sweep", "--config", str(cfg), "--out", str(out)]) == 0
    assert out.read_text().count("\n") == 3


def test_cli_scheme_override(cfg, tmp_path):
    out = tmp_path / "out.csv"
    assert cli.main(["sweep", "--config", str(cfg), "--out", str(out), "--scheme", "local"]) == 0
    assert "energy_joint_j" not in out.read_text()


def test_cli_solve_and_feasibility(cfg, tmp_path, capsys):
    assert cli.main(["solve", "--config", str(cfg)]) == 0
    assert "status" in capsys.readouterr().out
    out = tmp_path / "feas.csv"
    assert cli.main(["feasibility", "--config", str(cfg), "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "sweep_T,task_bits,l_max_bits,feasible" and len(lines) == 3


def test_cli_oracle_check(cfg, tmp_path):
    out = tmp_path / "oracle.csv"
    assert cli.main(["oracle-check", "--config", str(cfg), "--out", str(out),
                     "--grid", "12,16,30,1"]) == 0
    rows = [l.split(",") for l in out.read_text().splitlines()[1:]]
    assert all(float(r[4]) < 0.05 for r in rows)


def test_cli_config_errors(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("sweep.variable = Q\n")
    assert cli.main(["sweep", "--config", str(bad)]) == 1
    assert cli.main(["sweep", "--config", str(tmp_path / "missing.cfg")]) == 1
    assert cli.main(["oracle-check", "--grid", "1,1"]) == 1
    assert "config error" in capsys.readouterr().err


def test_cli_not_converged_exit_code(cfg, monkeypatch):
    from meccoop.dual import EllipsoidConfig, solve_joint
    import meccoop.experiments as ex

    starved = lambda s, tolerance=1e-9: solve_joint(s, EllipsoidConfig(max_iters=3), tolerance)
    monkeypatch.setattr(ex, "solve_joint", starved)
    assert cli.main(["sweep", "--config", str(cfg), "--out", "-"]) == 2
