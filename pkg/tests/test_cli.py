"""Command-line interface: exit codes, reports, determinism."""

import json
import subprocess
import sys

import numpy as np
import pytest

from fpcert import cli, model_io


def _run(argv, capsys):
    code = cli.run(argv)
    out = capsys.readouterr().out
    return code, out


class TestVerifyLocal:
    def test_certified_exit_zero(self, demo_model_file, capsys):
        code, out = _run(
            ["verify-local", "--model", demo_model_file, "--input", "0.2,0.5",
             "--eps", "0.05", "--target", "1"],
            capsys,
        )
        assert code == 0
        report = json.loads(out)
        assert report["status"] == "Certified" and report["margin"] > 0

    def test_unknown_exit_one(self, demo_model_file, capsys):
        code, out = _run(
            ["verify-local", "--model", demo_model_file, "--input", "0.2,0.5",
             "--eps", "0.05", "--target", "0"],
            capsys,
        )
        assert code == 1
        assert json.loads(out)["status"] == "Unknown"

    def test_missing_model_flag_usage_error(self, capsys):
        code = cli.run(["verify-local", "--input", "0.2,0.5", "--eps", "0.05",
                        "--target", "1"])
        capsys.readouterr()
        assert code == 2

    def test_unreadable_model_parse_error(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("not json")
        code = cli.run(["verify-local", "--model", str(bad), "--input", "0.2,0.5",
                        "--eps", "0.05", "--target", "1"])
        capsys.readouterr()
        assert code == 2

    def test_trace_and_out_files(self, demo_model_file, tmp_path, capsys):
        trace = tmp_path / "trace.csv"
        out = tmp_path / "report.json"
        code = cli.run(
            ["verify-local", "--model", demo_model_file, "--input", "0.2,0.5",
             "--eps", "0.05", "--target", "1",
             "--trace", str(trace), "--out", str(out)],
        )
        capsys.readouterr()
        assert code == 0
        assert trace.read_text().startswith("step,phase,mean_width,margin")
        assert json.loads(out.read_text())["status"] == "Certified"

    def test_determinism(self, demo_model_file, capsys):
        argv = ["verify-local", "--model", demo_model_file, "--input", "0.2,0.5",
                "--eps", "0.05", "--target", "1"]
        _, out1 = _run(argv, capsys)
        _, out2 = _run(argv, capsys)
        r1, r2 = json.loads(out1), json.loads(out2)
        r1.pop("wallclock")
        r2.pop("wallclock")
        assert r1 == r2


class TestHouseholderCommand:
    def test_fix_mode_report(self, capsys):
        code, out = _run(["householder", "--lo", "16", "--hi", "25"], capsys)
        assert code == 0
        report = json.loads(out)
        assert report["status"] == "ok"
        assert report["root_lo"] <= 4.0 and report["root_hi"] >= 5.0
        assert report["iterations"] > 0

    def test_trace_csv(self, tmp_path, capsys):
        trace = tmp_path / "hh.csv"
        code = cli.run(["householder", "--lo", "16", "--hi", "20",
                        "--mode", "reach", "--trace", str(trace)])
        capsys.readouterr()
        assert code == 0
        assert trace.read_text().startswith("step,s_lo,s_hi")

    def test_invalid_interval_usage_error(self, capsys):
        code = cli.run(["householder", "--lo", "-1", "--hi", "20"])
        capsys.readouterr()
        assert code == 2


class TestGenModel:
    def test_writes_loadable_model(self, tmp_path, capsys):
        path = tmp_path / "model.json"
        code = cli.run(["gen-model", "--p", "4", "--q", "2", "--m", "20",
                        "--out", str(path)])
        capsys.readouterr()
        assert code == 0
        model = model_io.load_model(path)
        assert model.p == 4 and model.q == 2 and model.m == 20.0

    def test_seeded_determinism(self, tmp_path, capsys):
        p1 = tmp_path / "a.json"
        p2 = tmp_path / "b.json"
        cli.run(["--seed", "5", "gen-model", "--out", str(p1)])
        cli.run(["--seed", "5", "gen-model", "--out", str(p2)])
        capsys.readouterr()
        assert p1.read_bytes() == p2.read_bytes()


class TestBaselines:
    def test_kleene_unknown_exit_one(self, demo_model_file, capsys):
        code, out = _run(
            ["baseline", "--model", demo_model_file, "--input", "0.2,0.5",
             "--eps", "0.05", "--target", "1"],
            capsys,
        )
        assert code == 1
        assert json.loads(out)["status"] == "Unknown"

    def test_box_diverges_exit_three(self, demo_model_file, capsys):
        # The interval-only pipeline with the default splitting solver blows
        # up on this model, exercising the divergence exit code.
        code, out = _run(
            ["baseline", "--model", demo_model_file, "--input", "0.2,0.5",
             "--eps", "0.05", "--target", "1", "--method", "box"],
            capsys,
        )
        assert code == 3
        assert json.loads(out)["status"] == "Diverged"


class TestVerifyGlobal:
    def test_fully_certified_box(self, demo_model_file, tmp_path, capsys):
        leaves = tmp_path / "leaves.csv"
        code, out = _run(
            ["verify-global", "--model", demo_model_file,
             "--lo", "0.18,0.48", "--hi", "0.22,0.52", "--max-depth", "0",
             "--leaves-csv", str(leaves)],
            capsys,
        )
        assert code == 0
        assert json.loads(out)["certified_fraction"] == 1.0
        assert leaves.read_text().startswith("lo,hi,status,label,depth")


class TestInstalledEntryPoint:
    def test_subprocess_invocation(self, demo_model_file):
        proc = subprocess.run(
            [sys.executable, "-m", "fpcert.cli", "verify-local",
             "--model", demo_model_file, "--input", "0.2,0.5",
             "--eps", "0.05", "--target", "1"],
            capture_output=True, text=True,
        )
        assert proc.returncode == 0
        assert json.loads(proc.stdout)["status"] == "Certified"
