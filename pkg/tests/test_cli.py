import subprocess
import sys

import pytest

from stokes_darcy.cli import EXIT_CONFIG, EXIT_INVARIANT, EXIT_OK, main


def run(tmp_path, *args):
    return main(list(args) + ["--output-dir", str(tmp_path)])


def test_check_benchmark_violated(tmp_path, capsys):
    assert run(tmp_path, "check") == EXIT_OK
    out = capsys.readouterr().out
    assert "verdict=violated" in out and "R2=1.01007" in out
    assert (tmp_path / "check.csv").exists() and (tmp_path / "check_report.txt").exists()


def test_check_sweep_csv(tmp_path):
    assert run(tmp_path, "check", "--set", "C_sweep=[0.001, 0.01, 1]") == EXIT_OK
    rows = (tmp_path / "check_sweep.csv").read_text().splitlines()
    assert len(rows) == 4 and rows[1].endswith(",holds,9.900218897e-03")


def test_empty_dirichlet_boundary_is_invariant_violation(tmp_path, caplog):
    assert run(tmp_path, "solve", "--set", "pm_dirichlet=[]") == EXIT_INVARIANT
    assert "Gamma_pm^D" in caplog.text


def test_config_errors(tmp_path):
    assert run(tmp_path, "solve", "--set", "bogus=1") == EXIT_CONFIG
    assert run(tmp_path, "mms", "--set", "levels=[8, 32]") == EXIT_CONFIG
    assert run(tmp_path, "check", "--set", "C") == EXIT_CONFIG
    assert main(["check", "--config", str(tmp_path / "missing.yaml")]) == EXIT_CONFIG
    bad = tmp_path / "bad.yaml"
    bad.write_text("check: [1, 2\n")
    assert main(["check", "--config", str(bad)]) == EXIT_CONFIG


def test_other_invariant_violations(tmp_path):
    assert run(tmp_path, "check", "--set", "N_tau=0") == EXIT_INVARIANT
    assert run(tmp_path, "micro-cell", "--set", "geometry.d=0") == EXIT_INVARIANT
    assert run(tmp_path, "solve", "--set", "h=0.3") == EXIT_INVARIANT
    assert run(tmp_path, "micro-bl", "--set", "a=0.02") == EXIT_INVARIANT


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "run.yaml"
    cfg.write_text(f"output_dir: {tmp_path / 'o'}\nsolve:\n  h: 0.125\n  k: 0.01\n  coefficients:\n    M_tau1: -0.05\n")
    assert main(["solve", "--config", str(cfg), "--set", "lid_velocity=2.0"]) == EXIT_OK
    report = (tmp_path / "o" / "solve_report.txt").read_text()
    assert "h=1.250000000e-01" in report and "residual=" in report
    assert (tmp_path / "o" / "solve_field.csv").read_text().startswith("variable,i,j,x,y,value")


def test_commands_produce_csvs(tmp_path):
    assert run(tmp_path, "mms", "--set", "levels=[8, 16]") == EXIT_OK
    assert len((tmp_path / "mms_convergence.csv").read_text().splitlines()) == 3
    assert run(tmp_path, "micro-cell", "--set", "h_micro=0.0625") == EXIT_OK
    assert run(tmp_path, "micro-bl", "--set", "h_micro=0.0625") == EXIT_OK
    assert run(tmp_path, "sweep", "--set", "h_micro=0.0625", "--set", "count=3") == EXIT_OK
    assert len((tmp_path / "sweep.csv").read_text().splitlines()) == 4


def test_help_lists_schema_keys(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["sweep", "--help"])
    assert exc.value.code == 0
    out = capsys.readouterr().out
    for key in ("geometry.shape", "geometry.d", "h_micro", "a_list", "workers", "output_dir"):
        assert key in out


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "stokes_darcy", "check", "-o", str(tmp_path)],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "verdict=violated" in proc.stdout
