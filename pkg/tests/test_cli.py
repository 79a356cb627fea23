import json
import subprocess
import sys

import numpy as np
import pytest

from lpstab.cli import main
from lpstab.model import write_matrix_csv


def run(tmp_path, *argv, out="out"):
    code = main([*argv, "--out", str(tmp_path / out)])
    return code, tmp_path / out


def read_vec(path):
    return np.loadtxt(path, delimiter=",", ndmin=1)


def write_config(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


class TestSolve:
    def test_outputs(self, tmp_path):
        code, out = run(tmp_path, "solve", "--p", "1.5", "--seed", "3")
        assert code == 0
        f = read_vec(out / "solution.csv")
        a = read_vec(out / "coefficients.csv")
        cert = json.loads((out / "certificate.json").read_text())
        assert f.shape == (3,) and a.shape == (2,)
        assert cert["grad_residual"] <= 1e-8
        assert cert["representer_residual"] <= 1e-6
        assert {"iterations", "objective", "p", "lambda"} <= cert.keys()

    def test_zero_measurement(self, tmp_path):
        cfg = write_config(tmp_path, {"problem": {"y": [0.0, 0.0]}, "p": 1.5})
        code, out = run(tmp_path, "solve", "--config", cfg)
        assert code == 0
        assert np.all(read_vec(out / "solution.csv") == 0)
        assert np.all(read_vec(out / "coefficients.csv") == 0)

    def test_prox_matches_tikhonov(self, tmp_path):
        cfg = write_config(tmp_path, {"problem": {"y": [0.7, -1.2]}, "solver": {"grad_tolerance": 1e-12}})
        assert run(tmp_path, "solve", "--config", cfg, out="a")[0] == 0
        assert run(tmp_path, "solve", "--config", cfg, "--method", "tikhonov", out="b")[0] == 0
        fa = read_vec(tmp_path / "a" / "solution.csv")
        fb = read_vec(tmp_path / "b" / "solution.csv")
        assert np.linalg.norm(fa - fb) <= 1e-8

    def test_operator_and_y_files(self, tmp_path):
        write_matrix_csv(tmp_path / "A.csv", np.array([[1.0]]))
        write_matrix_csv(tmp_path / "y.csv", np.array([[3.0]]))
        code, out = run(tmp_path, "solve", "--operator-csv", str(tmp_path / "A.csv"),
                        "--y-csv", str(tmp_path / "y.csv"))
        assert code == 0
        assert read_vec(out / "solution.csv")[0] == pytest.approx(1.0, abs=1e-8)

    def test_tikhonov_needs_p2(self, tmp_path):
        assert run(tmp_path, "solve", "--p", "3", "--method", "tikhonov")[0] == 2


class TestConfigErrors:
    def test_zero_lambda(self, tmp_path, capsys):
        code, out = run(tmp_path, "solve", "--lambda", "0")
        assert code == 2
        err = json.loads(capsys.readouterr().err)
        assert err["field"] == "lambda"
        assert not out.exists()

    def test_unknown_key(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {"problem": {"M": 2, "bogus": 1}})
        assert run(tmp_path, "solve", "--config", cfg)[0] == 2
        assert "bogus" in json.loads(capsys.readouterr().err)["field"]

    def test_p_not_above_one(self, tmp_path, capsys):
        assert run(tmp_path, "bounds", "--p", "1")[0] == 2
        assert json.loads(capsys.readouterr().err)["field"] == "p"

    def test_wide_operator(self, tmp_path):
        cfg = write_config(tmp_path, {"problem": {"M": 4, "N": 3}})
        assert run(tmp_path, "solve", "--config", cfg)[0] == 2

    def test_measurement_length(self, tmp_path):
        cfg = write_config(tmp_path, {"problem": {"y": [1.0, 2.0, 3.0]}})
        assert run(tmp_path, "solve", "--config", cfg)[0] == 2

    def test_missing_config(self, tmp_path):
        assert run(tmp_path, "solve", "--config", str(tmp_path / "none.json"))[0] == 2


class TestSolverFailure:
    def test_iteration_cap(self, tmp_path):
        cfg = write_config(tmp_path, {"p": 1.5, "solver": {"max_iterations": 1}})
        assert run(tmp_path, "solve", "--config", cfg)[0] == 3


class TestBounds:
    def load(self, tmp_path, *argv):
        code, out = run(tmp_path, "bounds", *argv)
        assert code == 0
        return json.loads((out / "bounds.json").read_text())

    def test_p2(self, tmp_path):
        rep = self.load(tmp_path, "--p", "2")
        srcs = [b["source"] for b in rep["bounds"]]
        assert "TikhonovTight" in srcs and "TikhonovLoose" in srcs
        assert all(b["exponent"] == 1 for b in rep["bounds"])

    def test_plt2(self, tmp_path):
        rep = self.load(tmp_path, "--p", "1.5", "--rho", "2")
        local = [b for b in rep["bounds"] if b["source"] == "LocalLipschitzPlt2"]
        assert local and local[0]["exponent"] == 1
        assert local[0]["region"]["radius"] == 2
        assert rep["r_p"] == pytest.approx((4 / 2) ** (1 / 1.5))

    def test_p3(self, tmp_path):
        rep = self.load(tmp_path, "--p", "3")
        holder = [b for b in rep["bounds"] if b["source"] == "HolderPge2"]
        assert holder[0]["exponent"] == 0.5
        assert holder[0]["K_p"]["exactness"] == "UpperBound"


class TestProbe:
    def test_pass(self, tmp_path):
        code, out = run(tmp_path, "probe", "--p", "2", "--p", "3", "--n-pairs", "10")
        assert code == 0
        summary = json.loads((out / "probe_summary.json").read_text())
        assert summary["violations"] == 0
        assert [r["p"] for r in summary["runs"]] == [2, 3]
        assert (out / "probe.csv").exists()

    def test_violation_exit(self, tmp_path, monkeypatch, capsys):
        import lpstab.experiments as ex

        real = ex.applicable_bound

        def shrunk(spec, rho=None):
            b = real(spec, rho)
            return type(b)(b.coefficient * 1e-3, b.exponent, b.region, b.source)

        monkeypatch.setattr(ex, "applicable_bound", shrunk)
        code, out = run(tmp_path, "probe", "--p", "2", "--n-pairs", "3")
        assert code == 4
        bundle = json.loads((out / "repro_bundle.json").read_text())
        assert {"seed", "y1", "y2", "operator"} <= bundle.keys()
        assert json.loads(capsys.readouterr().err)["error"] == "violation"


class TestFigureAndGrowth:
    @pytest.mark.parametrize("kind, rows", [("duality", 10), ("manifold", 3 * 4 * 4)])
    def test_figure(self, tmp_path, kind, rows):
        code, out = run(tmp_path, "figure", kind, "--grid-side", "4")
        assert code == 0
        lines = (out / f"figure_{kind}.csv").read_text().strip().splitlines()
        assert len(lines) == rows + 1

    def test_figure_json(self, tmp_path):
        code, out = run(tmp_path, "figure", "duality", "--format", "json")
        assert code == 0
        data = json.loads((out / "figure_duality.json").read_text())
        assert len(data) == 10

    def test_growth(self, tmp_path):
        code, out = run(tmp_path, "check-growth", "--p", "2", "--p", "1.5", "--samples", "1000")
        assert code == 0
        summary = json.loads((out / "growth_summary.json").read_text())
        assert summary["violations"] == 0
        assert summary["checks"][0]["min_slack"] == 0


class TestDeterminism:
    @pytest.mark.parametrize(
        "argv",
        [
            ["solve", "--p", "1.5", "--seed", "7"],
            ["bounds", "--p", "1.25"],
            ["probe", "--p", "1.5", "--n-pairs", "5"],
            ["figure", "scaling", "--n-pairs", "5"],
            ["check-growth", "--samples", "500"],
        ],
    )
    def test_byte_identical(self, tmp_path, argv):
        assert run(tmp_path, *argv, out="a")[0] == 0
        assert run(tmp_path, *argv, out="b")[0] == 0
        a = sorted((tmp_path / "a").iterdir())
        b = sorted((tmp_path / "b").iterdir())
        assert [x.name for x in a] == [x.name for x in b]
        for x, y in zip(a, b):
            assert x.read_bytes() == y.read_bytes()

    def test_fifteen_digits(self, tmp_path):
        code, out = run(tmp_path, "solve", "--p", "1.5")
        for line in (out / "solution.csv").read_text().splitlines():
            digits = line.split(",")[-1].lstrip("-").split("e")[0].replace(".", "").lstrip("0")
            assert len(digits) <= 15


def test_module_entry_point(tmp_path):
    res = subprocess.run(
        [sys.executable, "-m", "lpstab", "bounds", "--p", "3", "--out", str(tmp_path)],
        capture_output=True, text=True,
    )
    assert res.returncode == 0, res.stderr
    assert (tmp_path / "bounds.json").exists()
