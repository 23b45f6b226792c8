import json
import subprocess
import sys

import pytest

from bec_resonance import cli
from bec_resonance.gpe import read_snapshot


def run(argv, capsys):
    code = cli.main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def strip_timestamp(text):
    return "\n".join(line for line in text.splitlines() if not line.startswith("# timestamp:"))


def test_default_config_round_trip():
    cfg = cli.RunConfig()
    assert cli.RunConfig.from_dict(cfg.to_dict()) == cfg


def test_yaml_config_and_overrides(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text("model:\n  interaction: 46\ntrap:\n  epsilon: 0.15\n  omega: 2.04\n")
    cfg = cli.resolve_config(str(path), {"trap.damping": "0.1", "sweep.workers": "2"})
    assert cfg.model.interaction == 46.0
    assert cfg.trap.epsilon == 0.15 and cfg.trap.damping == 0.1
    assert cfg.sweep.workers == 2


def test_unknown_key_reports_line(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text("model:\n  interaction: 9.2\ntrap:\n  epsilon: 0.1\n  omgea: 2.0\n")
    with pytest.raises(cli.ConfigError) as info:
        cli.resolve_config(str(path), {})
    assert info.value.key == "trap.omgea"
    assert info.value.line == 5
    assert "line 5" in str(info.value)


def test_wrong_type_reports_line(tmp_path):
    path = tmp_path / "run.json"
    path.write_text('{\n "simulate": {\n  "samples": "many"\n }\n}\n')
    with pytest.raises(cli.ConfigError) as info:
        cli.resolve_config(str(path), {})
    assert info.value.key == "simulate.samples" and info.value.line == 3


def test_exponent_notation_is_a_number(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text("integrator:\n  rel_tol: 1e-8\n")
    assert cli.resolve_config(str(path), {"integrator.abs_tol": "1e-10"}).integrator.abs_tol == 1e-10


def test_override_is_attributed_to_command_line():
    with pytest.raises(cli.ConfigError) as info:
        cli.resolve_config(None, {"model.kind": "cubic"})
    assert "command line" in str(info.value)


@pytest.mark.parametrize("argv", [
    ["simulate", "--model.interaction", "-1"],
    ["simulate", "--trap.epsilon", "1.5"],
    ["simulate", "--simulate.coordinates", "[1.0, 2.0]"],
    ["floquet", "--floquet.wedges", "[4]"],
    ["sweep", "--sweep.omega_step", "0"],
    ["gpe", "--gpe.dt", "0.1"],
    ["verify", "--verify.criteria", "[12]"],
    ["simulate", "--config", "/nonexistent/run.yaml"],
])
def test_validation_errors_exit_one(argv, capsys):
    code, out, err = run(argv, capsys)
    assert code == 1
    assert "config error" in err
    assert out == ""


def test_bad_worker_env_exits_one(capsys, monkeypatch):
    monkeypatch.setenv(cli.WORKERS_ENV, "lots")
    code, _, err = run(["sweep", "--sweep.omega_max", "1.8", "--sweep.eps_max", "0.0"], capsys)
    assert code == 1 and cli.WORKERS_ENV in err


def test_simulate_csv_is_deterministic(tmp_path, capsys):
    argv = ["simulate", "--simulate.tau_end", "10", "--simulate.samples", "11",
            "--trap.epsilon", "0.15", "--trap.omega", "2.04"]
    code1, out1, _ = run(argv, capsys)
    code2, out2, _ = run(argv, capsys)
    assert code1 == code2 == 0
    assert strip_timestamp(out1) == strip_timestamp(out2)
    lines = [line for line in out1.splitlines() if not line.startswith("#")]
    assert lines[0] == "tau,v,dv,energy"
    assert len(lines) == 12
    meta = [line for line in out1.splitlines() if line.startswith("# ")]
    assert any(line.startswith("# command: simulate") for line in meta)
    assert any(line.startswith("# config: ") for line in meta)


def test_simulate_json_output_file(tmp_path, capsys):
    out = tmp_path / "traj.json"
    code, stdout, _ = run(["simulate", "--model.kind", "impact", "--model.interaction", "0",
                           "--simulate.coordinates", "[0.0]", "--simulate.velocities", "[1.0]",
                           "--simulate.tau_end", "4", "--simulate.samples", "5",
                           "--output.path", str(out), "--output.format", "json"], capsys)
    assert code == 0 and stdout == ""
    doc = json.loads(out.read_text())
    assert doc["columns"] == ["tau", "v", "dv", "energy"]
    assert doc["metadata"]["events"] == 1
    assert len(doc["rows"]) == 5


def test_simulate_3d(capsys):
    code, out, _ = run(["simulate", "--model.kind", "variational3d", "--trap.drive", "m0",
                        "--trap.epsilon", "0.1", "--simulate.tau_end", "2", "--simulate.samples", "3"], capsys)
    assert code == 0
    header = [line for line in out.splitlines() if not line.startswith("#")][0]
    assert header == "tau,v_x,v_y,v_z,dv_x,dv_y,dv_z,energy"


def test_simulate_failure_exits_two_with_partial_output(capsys):
    code, out, err = run(["simulate", "--integrator.max_steps", "20", "--simulate.samples", "101"], capsys)
    assert code == 2
    assert "error" in err
    assert "# status: failed" in out


def test_asymptote_table(capsys):
    code, out, _ = run(["asymptote", "--asymptote.eps_values", "[0.4]", "--asymptote.omegas", "[2.0]",
                        "--trap.damping", "0.15", "--output.format", "json"], capsys)
    assert code == 0
    doc = json.loads(out)
    row = dict(zip(doc["columns"], doc["rows"][0]))
    assert row["q"] == pytest.approx(0.1)
    assert row["damped_exponent"] == pytest.approx(-0.05)


def test_floquet_table(capsys):
    code, out, _ = run(["floquet", "--floquet.wedges", "[1]", "--floquet.eps_max", "0.2",
                        "--floquet.eps_count", "3", "--floquet.omega_tol", "1e-4", "--output.format", "json"],
                       capsys)
    assert code == 0
    doc = json.loads(out)
    rows = [dict(zip(doc["columns"], r)) for r in doc["rows"]]
    assert [r["eps"] for r in rows] == [0.0, 0.1, 0.2]
    assert rows[2]["omega_lower"] < 2.0 < rows[2]["omega_upper"]
    assert rows[2]["band_lower"] == pytest.approx(2 - 0.1 - 0.04 / 32)


SWEEP = ["sweep", "--sweep.omega_min", "1.95", "--sweep.omega_max", "2.05", "--sweep.omega_step", "0.05",
         "--sweep.eps_min", "0.1", "--sweep.eps_max", "0.2", "--sweep.eps_step", "0.1"]


def test_sweep_resume(tmp_path, capsys):
    out = tmp_path / "map.csv"
    code, _, _ = run(SWEEP + ["--output.path", str(out), "--workers", "1"], capsys)
    assert code == 0
    first = out.read_text()
    manifest = tmp_path / "map.csv.manifest.jsonl"
    records = manifest.read_text().splitlines()
    assert len(records) == 1 + 6
    # simulate an interruption: drop the last two cells and leave a torn line
    manifest.write_text("\n".join(records[:-2]) + '\n{"i": 1, "j"')
    code, _, _ = run(SWEEP + ["--output.path", str(out), "--workers", "2"], capsys)
    assert code == 0
    second = out.read_text()
    assert "# resumed_cells: 4" in second
    body = [line for line in first.splitlines() if not line.startswith("#")]
    assert body == [line for line in second.splitlines() if not line.startswith("#")]


def test_sweep_refuses_foreign_manifest(tmp_path, capsys):
    out = tmp_path / "map.csv"
    (tmp_path / "map.csv.manifest.jsonl").write_text('{"config_hash": "0000"}\n')
    code, _, err = run(SWEEP + ["--output.path", str(out)], capsys)
    assert code == 1 and "different configuration" in err


def test_gpe_command_writes_snapshots(tmp_path, capsys):
    snaps = tmp_path / "snaps"
    code, out, _ = run(["gpe", "--gpe.points", "256", "--gpe.tau_end", "0.2", "--gpe.output_interval", "0.1",
                        "--gpe.dilation", "1.1", "--gpe.snapshot_every", "0.1", "--gpe.snapshot_dir", str(snaps),
                        "--model.interaction", "0"], capsys)
    assert code == 0
    files = sorted(snaps.iterdir())
    assert len(files) == 3
    assert read_snapshot(files[-1]).time == pytest.approx(0.2)
    header = [line for line in out.splitlines() if not line.startswith("#")][0]
    assert header == "tau,norm,energy,width"


def test_gpe_escape_exits_two(capsys):
    code, out, err = run(["gpe", "--gpe.points", "256", "--gpe.extent", "3", "--gpe.tau_end", "1",
                          "--model.interaction", "0"], capsys)
    assert code == 2
    assert "# status: failed" in out


def test_verify_single_criterion(tmp_path, capsys):
    report = tmp_path / "report.json"
    code, _, err = run(["verify", "--verify.criteria", "[9]", "--output.path", str(report)], capsys)
    doc = json.loads(report.read_text())
    assert [c["number"] for c in doc["criteria"]] == [9]
    assert code == (0 if doc["passed"] else 3)
    assert "[9]" in err or "9" in err


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "bec_resonance", "asymptote", "--asymptote.eps_values", "[0.15]"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert "1.994375" in proc.stdout
    proc = subprocess.run([sys.executable, "-m", "bec_resonance", "simulate", "--nonsense", "1"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 1
    assert "unrecognized arguments" in proc.stderr
