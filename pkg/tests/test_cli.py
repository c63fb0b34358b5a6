import csv
import os
import subprocess
import sys

import pytest

from waveprobe.cli import main

SMALL = """
grid.n_space = 2
grid.nx = 16
probe.lambdas = 4, 6
probe.steps_per_lambda = 8
potential.kind = bump
potential.radius = 0.3
run.count = 3
run.lambda = 4
"""

HIDDEN = """
grid.nx = 64
grid.nt = 91
potential.kind = bump
potential.radius = 0.1
potential.t_off = 0.25
run.count = 5
"""


def write(tmp_path, text, name="c.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


@pytest.mark.parametrize("sub", ["forward", "go", "carleman", "probe", "obstruct", "convergence"])
def test_subcommands_run_and_are_deterministic(tmp_path, sub):
    cfg = write(tmp_path, SMALL + ("run.nx_list = 8, 16\n" if sub == "convergence" else ""))
    a, b = tmp_path / "a", tmp_path / "b"
    assert main([sub, "--config", cfg, "--out", str(a), "--seed", "3"]) == 0
    assert main([sub, "--config", cfg, "--out", str(b), "--seed", "3"]) == 0
    names = sorted(os.listdir(a))
    assert names == sorted(os.listdir(b)) and names
    for n in names:
        assert (a / n).read_bytes() == (b / n).read_bytes()


def test_reconstruct_small(tmp_path):
    cfg = write(tmp_path, SMALL + "probe.omega_count = 2\nprobe.eta = -1, 0, 1\n"
                "probe.epsilon = 0.5\nrun.basis = sampled\n")
    assert main(["reconstruct", "--config", cfg, "--out", str(tmp_path / "r")]) == 0
    row = read_csv(tmp_path / "r" / "reconstruct.csv")[0]
    assert int(row["samples"]) == 18 and float(row["relative_error"]) >= 0
    assert (tmp_path / "r" / "q_est.wpf").exists()


def test_underdetermined_reconstruction_is_config_error(tmp_path, capsys):
    cfg = write(tmp_path, SMALL + "probe.omega_count = 2\nprobe.eta = -1, 0, 1\n"
                "probe.epsilon = 0.5\nrun.basis = union\n")
    assert main(["reconstruct", "--config", cfg, "--out", str(tmp_path / "r")]) == 2
    assert "41 real unknowns from 36 real data" in capsys.readouterr().err


def test_obstruct_hidden_bump(tmp_path):
    cfg = write(tmp_path, HIDDEN)
    assert main(["obstruct", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    row = read_csv(tmp_path / "o" / "obstruct.csv")[0]
    assert float(row["max_difference"]) <= 1e-12 and row["within_tolerance"] == "1"


def test_carleman_empty_ensemble_is_all_zero(tmp_path):
    cfg = write(tmp_path, SMALL.replace("run.count = 3", "run.count = 0"))
    assert main(["carleman", "--config", cfg, "--out", str(tmp_path / "c")]) == 0
    rows = read_csv(tmp_path / "c" / "carleman.csv")
    assert rows and all(float(r["sup_ratio"]) == 0 for r in rows)


def test_carleman_columns_use_term_names(tmp_path):
    cfg = write(tmp_path, SMALL)
    main(["carleman", "--config", cfg, "--out", str(tmp_path / "c")])
    header = (tmp_path / "c" / "carleman_terms.csv").read_text().splitlines()[0]
    assert "lhs_final_velocity" in header and "rhs_lambda3_final_value" in header


def test_config_error_exit_code(tmp_path, capsys):
    cfg = write(tmp_path, "grid.nx = 16\ngrid.nt = -4\n")
    assert main(["forward", "--config", cfg, "--out", str(tmp_path / "x")]) == 2
    err = capsys.readouterr().err
    assert "kind=config code=2" in err and "line 2" in err


def test_cfl_violation_is_config_error(tmp_path):
    cfg = write(tmp_path, "grid.nx = 32\ngrid.nt = 10\n")
    assert main(["forward", "--config", cfg, "--out", str(tmp_path / "x")]) == 2


def test_missing_config_is_io_error(tmp_path):
    assert main(["forward", "--config", str(tmp_path / "nope.cfg"), "--out", str(tmp_path)]) == 4


def test_bad_potential_file_is_io_error(tmp_path):
    bad = tmp_path / "q.wpf"
    bad.write_text("WPF1\n2 8 8 1.0 1.0 real\n1 2 3\n")
    cfg = write(tmp_path, f"grid.nx = 8\npotential.kind = file\npotential.path = {bad}\n")
    assert main(["forward", "--config", cfg, "--out", str(tmp_path / "x")]) == 4


def test_numerical_failure_exit_code(tmp_path):
    cfg = write(tmp_path, "grid.n_space = 1\ngrid.nx = 8\ngrid.nt = 128\nprobe.omega0 = 1\npotential.xi = 1, 1\n"
                "potential.kind = bump\npotential.amp = -1e10\npotential.radius = 0.4\n")
    assert main(["forward", "--config", cfg, "--out", str(tmp_path / "x")]) == 3


def test_unknown_subcommand(tmp_path):
    assert main(["explode", "--config", "x", "--out", "y"]) == 2


def test_threads_do_not_change_output(tmp_path):
    cfg = write(tmp_path, SMALL + "probe.omega_count = 3\nprobe.eta = -1, 0, 1\n"
                "probe.epsilon = 0.5\nrun.basis = sampled\n")
    outs = []
    for threads in ("0", "3"):
        out = tmp_path / f"t{threads}"
        env = dict(os.environ, WAVEPROBE_THREADS=threads)
        r = subprocess.run([sys.executable, "-m", "waveprobe.cli", "reconstruct", "--config", cfg,
                            "--out", str(out)], env=env, capture_output=True)
        assert r.returncode == 0, r.stderr
        outs.append({n: (out / n).read_bytes() for n in os.listdir(out)})
    assert outs[0] == outs[1]
