import json

import pytest

import oracles
from conftest import data_path
from emsim import cli, geometry

CIRCLE_PROMPT = ("Place 10 conductors in a circle of radius 0.02 m and "
                 "report the ohmic loss density of the first conductor.")


def write_layout(tmp_path, points, radius=5e-3):
    path = tmp_path / "layout.json"
    geometry.ConductorLayout.from_points(points, radius_m=radius).save(path)
    return str(path)


# -- run ---------------------------------------------------------------------

def test_run_happy_path(tmp_path, capsys):
    code = cli.main(["run", "--prompt", CIRCLE_PROMPT,
                     "--out", str(tmp_path)])
    out = capsys.readouterr().out
    assert code == 0
    assert "summary_semantics" in out
    assert "needs_human" in out
    assert "skin" in out  # the summary is printed


def test_run_json_output(tmp_path, capsys):
    code = cli.main(["run", "--prompt", CIRCLE_PROMPT, "--json",
                     "--out", str(tmp_path)])
    assert code == 0
    data = json.loads(capsys.readouterr().out)
    assert data["schema_version"] == 1
    assert data["verdict"]["physics_semantics"]["status"] == "ok"


def test_run_validation_failure_exit_code(tmp_path, capsys):
    code = cli.main(["run", "--prompt", "Produce the overlap fixture.",
                     "--out", str(tmp_path)])
    assert code == 4
    assert "overlapping" in capsys.readouterr().out


def test_run_provider_error_exit_code(tmp_path, capsys, monkeypatch):
    monkeypatch.delenv("EMSIM_LLM_API_KEY", raising=False)
    code = cli.main(["run", "--prompt", "anything", "--provider", "http",
                     "--out", str(tmp_path)])
    assert code == 3
    assert "provider error" in capsys.readouterr().err


def test_run_requires_prompt():
    with pytest.raises(SystemExit) as err:
        cli.main(["run"])
    assert err.value.code == 2


def test_no_command_is_usage_error():
    with pytest.raises(SystemExit) as err:
        cli.main([])
    assert err.value.code == 2


def test_config_file_controls_frequency(tmp_path, capsys):
    cfg_path = tmp_path / "config.json"
    cfg_path.write_text(json.dumps({"frequency_Hz": 0.0}))
    layout = write_layout(tmp_path, [(0.0, 0.0)])
    code = cli.main(["run", "--prompt", "Simulate one conductor at the "
                     "origin.", "--mode", "layout_only",
                     "--config", str(cfg_path), "--json",
                     "--out", str(tmp_path / "out")])
    assert code == 0
    data = json.loads(capsys.readouterr().out)
    assert data["fact_sheet"]["frequency_Hz"] == 0.0
    assert data["fact_sheet"]["skin_depth_m"] is None
    assert layout  # silence unused warning


# -- solve -------------------------------------------------------------------

def test_solve_table_output(tmp_path, capsys):
    layout = write_layout(tmp_path, [(0.0, 0.0)])
    code = cli.main(["solve", layout])
    out = capsys.readouterr().out
    assert code == 0
    assert "total loss" in out
    assert "impedance per length" in out


def test_solve_json_matches_oracle(tmp_path, capsys):
    layout = write_layout(tmp_path, [(0.0, 0.0)])
    code = cli.main(["solve", layout, "--json"])
    assert code == 0
    data = json.loads(capsys.readouterr().out)
    r = data["impedance_per_length"]["R"]
    assert abs(r - oracles.Z_50HZ_REF.real) / oracles.Z_50HZ_REF.real < 0.01
    assert data["conductors"][0]["loss_W_per_m"] == pytest.approx(
        data["total_loss_W_per_m"])


def test_solve_dc(tmp_path, capsys):
    layout = write_layout(tmp_path, [(0.0, 0.0)])
    code = cli.main(["solve", layout, "--freq", "0", "--json"])
    assert code == 0
    data = json.loads(capsys.readouterr().out)
    assert data["impedance_per_length"]["X"] == 0.0
    assert abs(data["impedance_per_length"]["R"] - oracles.R_DC_REF) \
        / oracles.R_DC_REF < 5e-3


def test_solve_overlap_exit_code(tmp_path, capsys):
    layout = write_layout(tmp_path, [(0.0, 0.0), (0.004, 0.0)])
    code = cli.main(["solve", layout])
    assert code == 4
    assert "overlapping" in capsys.readouterr().err


def test_solve_overlap_json(tmp_path, capsys):
    layout = write_layout(tmp_path, [(0.0, 0.0), (0.004, 0.0)])
    code = cli.main(["solve", layout, "--json"])
    assert code == 4
    data = json.loads(capsys.readouterr().out)
    assert data["error"] == "overlap"
    assert data["pairs"] == [[0, 1]]


def test_solve_missing_file_is_usage_error(tmp_path, capsys):
    code = cli.main(["solve", str(tmp_path / "absent.json")])
    assert code == 2
    assert "cannot load layout" in capsys.readouterr().err


def test_solve_writes_artifacts(tmp_path, capsys):
    layout = write_layout(tmp_path, [(0.0, 0.0)])
    out_dir = tmp_path / "artifacts"
    code = cli.main(["solve", layout, "--out", str(out_dir)])
    assert code == 0
    assert (out_dir / "mesh.json").exists()
    assert (out_dir / "mesh.vtk").exists()
    assert (out_dir / "solution.vtk").exists()


# -- check -------------------------------------------------------------------

def test_check_clean_file(tmp_path, capsys):
    code = cli.main(["check", data_path("loss_density_conductor4.pro"),
                     "--conductors", "7"])
    out = capsys.readouterr().out
    assert code == 0
    assert "physics_semantics    ok" in out


def test_check_unknown_region_fails(capsys):
    # only one conductor region exists, the fixture wants Omega_c_4
    code = cli.main(["check", data_path("loss_density_conductor4.pro"),
                     "--conductors", "1"])
    out = capsys.readouterr().out
    assert code == 4
    assert "unknown region" in out
    assert "dsl_semantics        failed" in out


def test_check_wrong_factor_fails(tmp_path, capsys):
    src = open(data_path("loss_density_conductor4.pro")).read()
    mutated = tmp_path / "wrong.pro"
    mutated.write_text(src.replace("sigma[]/2", "sigma[]"))
    code = cli.main(["check", str(mutated), "--conductors", "7"])
    out = capsys.readouterr().out
    assert code == 4
    assert "0.5" in out
    assert "physics_semantics    failed" in out


def test_check_parse_error_reports_location(tmp_path, capsys):
    src = open(data_path("loss_density_conductor4.pro")).read()
    mutated = tmp_path / "broken.pro"
    mutated.write_text(src[:src.rindex("}")])
    code = cli.main(["check", str(mutated), "--json"])
    assert code == 4
    data = json.loads(capsys.readouterr().out)
    assert data["layers"]["dsl_syntax"] == "failed"
    assert data["layers"]["dsl_semantics"] == "skipped"
    syntax = [d for d in data["diagnostics"] if d["layer"] == "dsl_syntax"]
    assert syntax and syntax[0]["line"] >= 1


def test_check_with_layout_file(tmp_path, capsys):
    layout = write_layout(
        tmp_path, [(i * 0.012, 0.0) for i in range(5)])
    code = cli.main(["check", data_path("loss_density_conductor4.pro"),
                     "--layout", layout])
    assert code == 0


def test_check_missing_file(tmp_path, capsys):
    code = cli.main(["check", str(tmp_path / "none.pro")])
    assert code == 2


# -- repl --------------------------------------------------------------------

def test_repl_runs_one_prompt(tmp_path, capsys, monkeypatch):
    lines = iter(["Simulate one conductor at the origin.", "exit"])
    monkeypatch.setattr("builtins.input", lambda prompt="": next(lines))
    code = cli.main(["repl", "--mode", "layout_only",
                     "--out", str(tmp_path)])
    out = capsys.readouterr().out
    assert code == 0
    assert "geometry_semantics" in out


def test_repl_eof_exits_cleanly(tmp_path, capsys, monkeypatch):
    def raise_eof(prompt=""):
        raise EOFError

    monkeypatch.setattr("builtins.input", raise_eof)
    assert cli.main(["repl", "--out", str(tmp_path)]) == 0
