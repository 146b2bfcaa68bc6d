import json
import os

import numpy as np
import pytest

from skewmix.cli import cli_main


def run_cli(args):
    return cli_main([str(a) for a in args])


class TestUsage:
    def test_unknown_flag_is_usage_error(self, capsys):
        assert run_cli(["fit", "--bogus", "1"]) == 2

    def test_missing_subcommand_is_usage_error(self):
        assert run_cli([]) == 2

    def test_help_exits_clean(self):
        assert run_cli(["--help"]) == 0

    def test_runtime_error_is_one(self, tmp_path, capsys):
        missing = tmp_path / "nope.csv"
        code = run_cli(["fit", "--data", missing, "--clusters", "2"])
        assert code == 1


class TestSimulateAndFit:
    def test_simulate_shapes_and_sidecar(self, tmp_path):
        out = tmp_path / "sim.csv"
        assert run_cli(["simulate", "--part", "A", "--case", "b", "--n", 300,
                        "--proximity", "far", "--seed", 1, "--out", out]) == 0
        lines = out.read_text().splitlines()
        assert len(lines) == 301  # header + rows
        truth = tmp_path / "sim_truth.csv"
        assert truth.exists()
        assert truth.read_text().splitlines()[0].startswith("label,good_flag")

    def test_fit_is_byte_deterministic(self, tmp_path):
        data = tmp_path / "d.csv"
        run_cli(["simulate", "--part", "A", "--case", "msn", "--n", 200,
                 "--seed", 3, "--out", data])
        outs = []
        for name in ("a.json", "b.json"):
            out = tmp_path / name
            assert run_cli(["fit", "--data", data, "--clusters", 2, "--seed", 7,
                            "--starts", 2, "--max-iter", 60, "--tol", "1e-3",
                            "--out", out]) == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]

    def test_constrained_flags_are_recorded(self, tmp_path):
        data = tmp_path / "d.csv"
        run_cli(["simulate", "--part", "A", "--case", "msn", "--n", 150,
                 "--seed", 2, "--out", data])
        out = tmp_path / "c.json"
        assert run_cli(["fit", "--data", data, "--clusters", 1, "--no-skew",
                        "--no-contamination", "--starts", 1, "--max-iter", 40,
                        "--out", out]) == 0
        doc = json.loads(out.read_text())
        assert doc["constraints"] == {"no_skew": True, "no_contamination": True}

    def test_env_variable_overrides_default(self, tmp_path, monkeypatch):
        data = tmp_path / "d.csv"
        run_cli(["simulate", "--part", "A", "--case", "msn", "--n", 120,
                 "--seed", 5, "--out", data])
        monkeypatch.setenv("SKEWMIX_MAX_ITER", "7")
        out = tmp_path / "env.json"
        assert run_cli(["fit", "--data", data, "--clusters", 1, "--starts", 1,
                        "--out", out]) == 0
        doc = json.loads(out.read_text())
        assert doc["manifest"]["config"]["max_iter"] == 7
        assert doc["n_iters"] <= 7


class TestEvaluate:
    def test_perfect_predictions(self, tmp_path, capsys):
        truth = tmp_path / "t.csv"
        truth.write_text("label,good_flag\n0,1\n0,1\n1,0\n1,1\n")
        pred = tmp_path / "p.csv"
        pred.write_text("label,outlier\n0,0\n0,0\n1,1\n1,0\n")
        assert run_cli(["evaluate", "--pred", pred, "--truth", truth]) == 0
        out = capsys.readouterr().out
        assert "ARI 1.0000" in out
        assert "TPR 1.0000" in out
        assert "FPR 0.0000" in out
        assert "accuracy 1.0000" in out


class TestImputeCommand:
    def test_impute_completes_file(self, tmp_path):
        data = tmp_path / "d.csv"
        run_cli(["simulate", "--part", "A", "--case", "msn", "--n", 250,
                 "--seed", 6, "--missing-frac", "0.3", "--out", data])
        model = tmp_path / "m.json"
        assert run_cli(["fit", "--data", data, "--clusters", 2, "--starts", 1,
                        "--max-iter", 60, "--tol", "1e-3", "--out", model]) == 0
        out = tmp_path / "full.csv"
        assert run_cli(["impute", "--model", model, "--data", data,
                        "--out", out]) == 0
        from skewmix import io as sio

        completed = sio.read_csv(out)
        assert completed.mask.all()
        original = sio.read_csv(data)
        np.testing.assert_array_equal(
            completed.values[original.mask], original.values[original.mask])


class TestBenchmark:
    def test_grid_run_writes_tables(self, tmp_path):
        grid = tmp_path / "grid.txt"
        grid.write_text(
            "part=A\ncase=d\nn=120\nproximity=far\nfractions=0\n"
            "replicates=1\nseed=2\nconfigs=fmcmsn,fmcmn\nstarts=1\n"
            "max_iter=30\ntol=1e-3\n")
        out = tmp_path / "runs.csv"
        assert run_cli(["benchmark", "--grid", grid, "--out", out]) == 0
        lines = out.read_text().splitlines()
        assert len(lines) == 3  # header + 1 replicate x 2 configs
        means = tmp_path / "runs_means.csv"
        assert means.exists()
