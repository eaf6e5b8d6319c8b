import csv
import subprocess
import sys

import pytest

from mixdual.cli import (EXIT_CHECKS, EXIT_CONFIG, EXIT_OK, EXIT_SOLVER, build_config,
                         default_partition, main, read_config_file)


def run(tmp_path, *args, name="out"):
    out = tmp_path / name
    code = main(["run", "--out", str(out), *args])
    return code, out


def test_strong_p1(tmp_path, capsys):
    code, out = run(tmp_path, "--problem", "P1", "--grid", "201", "--partition", "J0={1};J1={2}",
                    "--mode", "strong")
    assert code == EXIT_OK
    rows = list(csv.DictReader((out / "objective_gap.csv").open()))
    assert len(rows) == 2 and all(float(r["relative_gap"]) <= 1e-4 for r in rows)
    for name in ("summary.txt", "checks.csv", "config.echo", "recovery.csv", "solution.csv"):
        assert (out / name).is_file()
    assert "overall: PASS" in (out / "summary.txt").read_text()
    assert "overall: PASS" in capsys.readouterr().out


def test_weak_p1(tmp_path):
    code, out = run(tmp_path, "--problem", "P1", "--mode", "weak", "--samples", "100")
    assert code == EXIT_OK
    rows = list(csv.DictReader((out / "weak_samples.csv").open()))
    assert len(rows) == 100 and not any(r["violation"] == "1" for r in rows)


@pytest.mark.parametrize("args,needle", [
    (["--problem", "P1", "--partition", "J0={1;J1={2}"], "cannot parse"),
    (["--problem", "P1", "--partition", "J0={1}"], "not covered"),
    (["--problem", "P1", "--partition", "J0={1,2,3}"], "outside"),
    (["--problem", "nope"], "unknown problem"),
    (["--problem", "P1", "--grid", "4"], "at least 5"),
    (["--problem", "P1", "--mode", "static"], "t-independent"),
    (["--problem", "P1", "--weights", "0.2,0.2"], "weights"),
    (["--mode", "strong"], "no problem"),
])
def test_configuration_errors(tmp_path, capsys, args, needle):
    code, _ = run(tmp_path, *args)
    assert code == EXIT_CONFIG
    assert needle in capsys.readouterr().err


def test_bad_flags():
    assert main(["run", "--mode", "sideways"]) == EXIT_CONFIG
    assert main(["frobnicate"]) == EXIT_CONFIG
    assert main(["--help"]) == EXIT_OK


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text("# comment\nproblem = P1\ngrid = 51\nmode = weak\nsolver.max_outer = 40\n")
    file_cfg = read_config_file(cfg)
    c, opts = build_config(file_cfg, {"grid": 61, "mode": None})
    assert c.grid == 61 and c.mode == "weak" and opts.max_outer == 40
    (tmp_path / "bad.cfg").write_text("problem P1\n")
    assert main(["run", "--config", str(tmp_path / "bad.cfg")]) == EXIT_CONFIG
    (tmp_path / "bad2.cfg").write_text("problem = P1\ncolour = red\n")
    assert main(["run", "--config", str(tmp_path / "bad2.cfg")]) == EXIT_CONFIG
    (tmp_path / "bad3.cfg").write_text("problem = P1\ngrid = many\n")
    assert main(["run", "--config", str(tmp_path / "bad3.cfg")]) == EXIT_CONFIG


def test_config_echo_has_defaults(tmp_path):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text("problem = S1\nmode = strong\n")
    code = main(["run", "--config", str(cfg), "--out", str(tmp_path / "o"), "--seed", "3"])
    assert code == EXIT_OK
    echo = dict(line.split(" = ", 1) for line in
                (tmp_path / "o" / "config.echo").read_text().splitlines())
    assert echo["problem"] == "S1" and echo["seed"] == "3" and echo["grid"] == "201"
    assert echo["partition.effective"] == "J0={1};J1={2}"
    assert echo["solver.tol"] == "1e-06" and echo["solver.max_inner"] == "500"


def test_check_failure_exit(tmp_path):
    code, out = run(tmp_path, "--problem", "P3", "--mode", "invexity", "--pairs", "200",
                    "--grid", "101")
    assert code == EXIT_CHECKS
    assert "FAIL" in (out / "invexity.csv").read_text()


def test_solver_failure_exit(tmp_path, capsys):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text("problem = P1\nsolver.max_outer = 1\nsolver.max_inner = 3\n")
    code = main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")])
    assert code == EXIT_SOLVER
    assert "solver failure" in capsys.readouterr().err
    assert (tmp_path / "o" / "summary.txt").is_file()


def test_deterministic_outputs(tmp_path):
    args = ["--problem", "P1", "--mode", "weak", "--samples", "20", "--seed", "5", "--grid", "101"]
    _, a = run(tmp_path, *args, name="a")
    _, b = run(tmp_path, *args, name="b")
    names = sorted(p.name for p in a.iterdir())
    assert names == sorted(p.name for p in b.iterdir())
    for name in names:
        if name != "config.echo":     # records the output directory itself
            assert (a / name).read_bytes() == (b / name).read_bytes(), name


def test_list(capsys, tmp_path):
    assert main(["list"]) == EXIT_OK
    text = capsys.readouterr().out
    for name in ("P1", "P2", "P3", "S1"):
        assert name in text
    assert main(["list", "--csv"]) == EXIT_OK
    assert capsys.readouterr().out.startswith("name,n,p,m,boundary,static,note\n")
    assert main(["list", "--catalog", str(tmp_path)]) == EXIT_OK
    assert capsys.readouterr().out == ""
    assert main(["list", "--catalog", str(tmp_path / "missing")]) == EXIT_CONFIG


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "mixdual", "list", "--csv"], capture_output=True,
                          text=True, check=False)
    assert proc.returncode == 0 and "P1,2,2,2,FixedZero" in proc.stdout


def test_default_partition():
    assert str(default_partition(1)) == "J0={1}"
    assert str(default_partition(3)) == "J0={1};J1={2,3}"
