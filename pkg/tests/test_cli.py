"""End-to-end command-line workflow on small simulated files."""

import json

import pytest

from splinetree.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


@pytest.fixture
def sim_csv(tmp_path, capsys):
    path = tmp_path / "data.csv"
    code, _, _ = run(
        capsys, "simulate", "--kind", "f1", "--n", "1200", "--sigma", "0.5",
        "--seed", "7", "--out", str(path),
    )
    assert code == 0
    return path


@pytest.fixture
def fitted_model(tmp_path, sim_csv, capsys):
    model = tmp_path / "tree.json"
    code, out, err = run(
        capsys, "fit", "--data", str(sim_csv), "--response", "f",
        "--original", "y", "--features", ",".join(f"x{k}" for k in range(1, 11)),
        "--knots", "5", "--max-depth", "1", "--num-bins", "8",
        "--min-samples-leaf", "60", "--seed", "3", "--out", str(model),
    )
    assert code == 0, err
    return model


class TestSimulate:
    def test_writes_expected_columns(self, sim_csv):
        header = open(sim_csv).readline().strip().split(",")
        assert header == [f"x{k}" for k in range(1, 11)] + ["f", "y"]
        assert sum(1 for _ in open(sim_csv)) == 1201

    def test_noiseless_sigma_zero(self, tmp_path, capsys):
        path = tmp_path / "clean.csv"
        code, _, _ = run(capsys, "simulate", "--kind", "f1", "--n", "50",
                         "--sigma", "0", "--seed", "1", "--out", str(path))
        assert code == 0
        rows = [line.strip().split(",") for line in open(path)][1:]
        for row in rows:
            assert row[10] == row[11]  # f == y exactly

    def test_deterministic_bytes(self, tmp_path, capsys):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        for path in (a, b):
            code, _, _ = run(capsys, "simulate", "--kind", "f2", "--n", "100",
                             "--sigma", "0.5", "--seed", "9", "--out", str(path))
            assert code == 0
        assert a.read_bytes() == b.read_bytes()

    def test_negative_sigma_rejected(self, tmp_path, capsys):
        code, _, err = run(capsys, "simulate", "--kind", "f1", "--n", "10",
                           "--sigma", "-1", "--seed", "0",
                           "--out", str(tmp_path / "x.csv"))
        assert code == 2 and "sigma" in err

    def test_unknown_flag_exits_2(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            main(["simulate", "--bogus", "1"])
        assert exc.value.code == 2


class TestFit:
    def test_report_layout(self, tmp_path, sim_csv, capsys):
        model = tmp_path / "t.json"
        code, out, err = run(
            capsys, "fit", "--data", str(sim_csv), "--response", "f",
            "--original", "y", "--knots", "4", "--max-depth", "1",
            "--num-bins", "6", "--min-samples-leaf", "60", "--seed", "3",
            "--out", str(model),
        )
        assert code == 0, err
        assert "Fidelity" in out and "Accuracy" in out
        assert "train" in out and "test" in out
        assert model.exists()

    def test_depth_zero_global_model(self, tmp_path, sim_csv, capsys):
        model = tmp_path / "t.json"
        code, out, _ = run(
            capsys, "fit", "--data", str(sim_csv), "--response", "f",
            "--knots", "4", "--max-depth", "0", "--min-samples-leaf", "60",
            "--seed", "3", "--out", str(model),
        )
        assert code == 0
        assert "1 nodes, 1 leaves, depth 0" in out

    def test_missing_response_column(self, tmp_path, sim_csv, capsys):
        code, _, err = run(
            capsys, "fit", "--data", str(sim_csv), "--response", "nope",
            "--out", str(tmp_path / "t.json"),
        )
        assert code == 3 and "'nope'" in err

    def test_config_file_defaults(self, tmp_path, sim_csv, capsys):
        conf = tmp_path / "run.conf"
        conf.write_text("max_depth = 0\nknots = 4\nmin_samples_leaf = 60\nseed = 3\n")
        model = tmp_path / "t.json"
        code, out, _ = run(
            capsys, "fit", "--data", str(sim_csv), "--response", "f",
            "--config", str(conf), "--out", str(model),
        )
        assert code == 0
        assert "depth 0" in out
        saved = json.loads(model.read_text())
        assert saved["config"]["max_depth"] == 0
        assert saved["config"]["knots"] == 4

    def test_additive_benchmark_prunes_to_root(self, tmp_path, capsys):
        # fitting the noiseless additive response at depth 2 with the
        # default pruning thresholds collapses the report to one node
        data = tmp_path / "f1.csv"
        code, _, _ = run(capsys, "simulate", "--kind", "f1", "--n", "3000",
                         "--sigma", "0.5", "--seed", "5", "--out", str(data))
        assert code == 0
        model = tmp_path / "t.json"
        code, out, err = run(
            capsys, "fit", "--data", str(data), "--response", "f",
            "--original", "y", "--knots", "8", "--max-depth", "2",
            "--num-bins", "20", "--seed", "5", "--out", str(model),
        )
        assert code == 0, err
        assert "1 nodes, 1 leaves, depth 0" in out

    def test_flags_override_config(self, tmp_path, sim_csv, capsys):
        conf = tmp_path / "run.conf"
        conf.write_text("max_depth = 0\nknots = 4\nmin_samples_leaf = 60\nseed = 3\n")
        model = tmp_path / "t.json"
        code, _, _ = run(
            capsys, "fit", "--data", str(sim_csv), "--response", "f",
            "--config", str(conf), "--max-depth", "1", "--out", str(model),
        )
        assert code == 0
        assert json.loads(model.read_text())["config"]["max_depth"] == 1


class TestPredictEvaluate:
    def test_predict_writes_csv(self, tmp_path, sim_csv, fitted_model, capsys):
        out_csv = tmp_path / "pred.csv"
        code, _, _ = run(capsys, "predict", "--model", str(fitted_model),
                         "--data", str(sim_csv), "--out", str(out_csv))
        assert code == 0
        lines = open(out_csv).read().strip().splitlines()
        assert lines[0] == "prediction" and len(lines) == 1201

    def test_evaluate_consistent_with_fit_report(self, tmp_path, sim_csv, capsys):
        # fit with no holdout: evaluate on the same file must reproduce
        # the training row of the report
        model = tmp_path / "t.json"
        code, fit_out, _ = run(
            capsys, "fit", "--data", str(sim_csv), "--response", "f",
            "--original", "y", "--knots", "4", "--max-depth", "0",
            "--min-samples-leaf", "60", "--seed", "3", "--test-fraction", "0",
            "--out", str(model),
        )
        assert code == 0
        code, eval_out, _ = run(
            capsys, "evaluate", "--model", str(model), "--data", str(sim_csv),
            "--response", "f", "--original", "y",
        )
        assert code == 0
        fit_line = next(l for l in fit_out.splitlines() if l.startswith("Fidelity"))
        mse_fit = float(fit_line.split()[2])
        mse_eval = float(eval_out.split("mse=")[1].split()[0])
        assert mse_eval == pytest.approx(mse_fit, rel=2e-6)

    def test_idempotent_outputs(self, tmp_path, sim_csv, fitted_model, capsys):
        a, b = tmp_path / "p1.csv", tmp_path / "p2.csv"
        for out_csv in (a, b):
            code, _, _ = run(capsys, "predict", "--model", str(fitted_model),
                             "--data", str(sim_csv), "--out", str(out_csv))
            assert code == 0
        assert a.read_bytes() == b.read_bytes()

    def test_inputs_not_mutated(self, tmp_path, sim_csv, fitted_model, capsys):
        before = sim_csv.read_bytes()
        run(capsys, "predict", "--model", str(fitted_model),
            "--data", str(sim_csv), "--out", str(tmp_path / "p.csv"))
        run(capsys, "evaluate", "--model", str(fitted_model),
            "--data", str(sim_csv), "--response", "f")
        assert sim_csv.read_bytes() == before


class TestDiagnoseExport:
    def test_diagnose_writes_tables(self, tmp_path, sim_csv, fitted_model, capsys):
        out_dir = tmp_path / "diag"
        code, out, _ = run(capsys, "diagnose", "--model", str(fitted_model),
                           "--data", str(sim_csv), "--out-dir", str(out_dir))
        assert code == 0
        for name in ("importance.csv", "contributions.csv", "curves.csv"):
            assert (out_dir / name).exists()

    def test_root_only_diagnose(self, tmp_path, sim_csv, capsys):
        model = tmp_path / "t.json"
        run(capsys, "fit", "--data", str(sim_csv), "--response", "f",
            "--original", "y", "--knots", "4", "--max-depth", "0",
            "--min-samples-leaf", "60", "--seed", "3", "--out", str(model))
        out_dir = tmp_path / "diag"
        code, _, _ = run(capsys, "diagnose", "--model", str(model),
                         "--data", str(sim_csv), "--out-dir", str(out_dir))
        assert code == 0
        importance = open(out_dir / "importance.csv").read().strip().splitlines()
        assert len(importance) == 11  # header + one row per feature
        contributions = open(out_dir / "contributions.csv").read().strip().splitlines()
        assert contributions == ["node_id,feature,c,p"]

    def test_export_dot(self, tmp_path, fitted_model, capsys):
        code, out, _ = run(capsys, "export", "--model", str(fitted_model),
                           "--format", "dot")
        assert code == 0
        assert out.startswith("digraph tree {")
        assert "size=" in out and "R2=" in out

    def test_missing_model_file(self, tmp_path, capsys):
        with pytest.raises(FileNotFoundError):
            run(capsys, "export", "--model", str(tmp_path / "none.json"))
