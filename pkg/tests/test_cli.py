"""CLI subcommands, exit codes, and report artifacts (torus T^2 scale)."""

import os

import numpy as np
import pytest

from scflab import cli
from scflab import flow as fl


def _cfg(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


RUN_CONVERGES = """
grid.dim = 2
grid.res = 16
flow.mode = gauge-fixed
flow.t_max = 0.4
flow.rhs_tol = 1e-6
flow.sigma = 2.0
flow.diag_stride = 25
perturbation.epsilon = 0.01
perturbation.1.k = 1, 0
perturbation.1.slot = 0, 1
perturbation.1.amp = 1.0
"""


def test_threads_flag_parsing(monkeypatch):
    assert cli._configure_threads(["--threads", "4"]) == "4"
    assert cli._configure_threads(["--threads=2"]) == "2"
    monkeypatch.setenv("SCF_THREADS", "3")
    assert cli._configure_threads([]) == "3"
    monkeypatch.delenv("SCF_THREADS")
    assert cli._configure_threads([]) == "1"


def test_run_converges_and_writes_artifacts(tmp_path):
    out = tmp_path / "out"
    rc = cli.main(["run", "--config", _cfg(tmp_path, RUN_CONVERGES),
                   "--out", str(out)])
    assert rc == cli.EXIT_OK
    assert (out / "diagnostics.csv").exists()
    for name in ("final_g.scffld", "final_omega.scffld", "final_J.scffld"):
        assert (out / name).exists()
    records = fl.read_csv_records(out / "diagnostics.csv")
    assert records[-1].sup_rhs <= 1e-6
    assert records[0].t == 0.0


def test_run_hits_t_max_exit_code(tmp_path):
    cfg = RUN_CONVERGES.replace("flow.t_max = 0.4", "flow.t_max = 0.002") \
                       .replace("flow.rhs_tol = 1e-6", "flow.rhs_tol = 1e-13")
    out = tmp_path / "out"
    rc = cli.main(["run", "--config", _cfg(tmp_path, cfg), "--out", str(out)])
    assert rc == cli.EXIT_NUMERICAL
    assert (out / "diagnostics.csv").exists()


def test_run_oversized_dt_aborts(tmp_path):
    cfg = RUN_CONVERGES + "flow.dt_user = 10.0\n"
    out = tmp_path / "out"
    rc = cli.main(["run", "--config", _cfg(tmp_path, cfg), "--out", str(out)])
    assert rc == cli.EXIT_NUMERICAL


def test_config_error_exit_code(tmp_path):
    rc = cli.main(["run", "--config", _cfg(tmp_path, "grid.bogus = 1\n"),
                   "--out", str(tmp_path / "out")])
    assert rc == cli.EXIT_CONFIG


def test_missing_config_file(tmp_path):
    rc = cli.main(["run", "--config", str(tmp_path / "absent.cfg"),
                   "--out", str(tmp_path / "out")])
    assert rc == cli.EXIT_CONFIG


def test_moser_subcommand(tmp_path):
    cfg = """
grid.dim = 2
grid.res = 16
moser.steps = 32
moser.amp = 0.008
"""
    out = tmp_path / "out"
    rc = cli.main(["moser", "--config", _cfg(tmp_path, cfg),
                   "--out", str(out)])
    assert rc == cli.EXIT_OK
    report = (out / "moser_report.txt").read_text()
    assert "pullback_residual" in report


def test_linearize_subcommand(tmp_path):
    cfg = """
grid.dim = 2
grid.res = 8
linearize.kernel_res = 8
"""
    out = tmp_path / "out"
    rc = cli.main(["linearize", "--config", _cfg(tmp_path, cfg),
                   "--out", str(out)])
    assert rc == cli.EXIT_OK
    assert (out / "linearize_report.txt").exists()
    csv_text = (out / "linearize_report.csv").read_text()
    assert "L1,full" in csv_text.replace(" ", "")


@pytest.mark.slow
def test_theorem_subcommand_t2(tmp_path):
    cfg = """
grid.dim = 2
grid.res = 16
flow.t_max = 0.6
flow.rhs_tol = 5e-8
flow.sigma = 2.0
flow.diag_stride = 25
perturbation.epsilon = 0.01
perturbation.1.k = 1, 0
perturbation.1.slot = 0, 1
perturbation.1.amp = 1.0
perturbation.2.kind = harmonic
perturbation.2.slot = 0, 1
perturbation.2.amp = 0.5
moser.steps = 32
"""
    out = tmp_path / "out"
    rc = cli.main(["theorem", "--config", _cfg(tmp_path, cfg),
                   "--out", str(out)])
    assert rc == cli.EXIT_OK
    report = (out / "theorem_report.txt").read_text()
    assert "certificate: PASS" in report
    for name in ("certified_g.scffld", "certified_omega.scffld",
                 "certified_J.scffld"):
        assert (out / name).exists()


@pytest.mark.slow
def test_verify_subcommand_t2(tmp_path):
    cfg = "grid.dim = 2\n"
    out = tmp_path / "out"
    rc = cli.main(["verify", "--config", _cfg(tmp_path, cfg),
                   "--out", str(out)])
    assert rc == cli.EXIT_OK
    report = (out / "verify_report.txt").read_text()
    assert "FAIL" not in report
    assert "flow.flat_fixed_point" in report
