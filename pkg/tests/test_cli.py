"""End-to-end command-line behavior, driven in-process through ``main``."""

import numpy as np
import pytest

import support
from ldep.cli import main
from ldep.data import load_csv, load_model, save_model
from ldep.model import LDepModel, decision_values
from ldep.train import TrainReport, TrainStatus


def run(argv, capsys):
    code = main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def kv(out):
    """Parse key=value stdout lines into a dict (last write wins)."""
    pairs = {}
    for line in out.splitlines():
        if "=" in line:
            k, _, v = line.partition("=")
            pairs[k] = v
    return pairs


def write_toy(path):
    path.write_text("-1,-1\n1,1\n")
    return str(path)


def band_model():
    """Score x2 - 0.5: separates the synthetic benchmark's two bands."""
    return LDepModel(
        W=np.array([[0.0, 1.0]]),
        a=np.array([-0.5]),
        M=np.array([[0.0, 0.0]]),
        b=np.array([0.0]),
    )


TOY_TRAIN = [
    "train",
    "--n1", "1",
    "--n2", "1",
    "--c", "10",
]


class TestGenData:
    def test_default_counts(self, tmp_path, capsys):
        prefix = str(tmp_path / "synth")
        code, out, _ = run(["gen-data", "--out-prefix", prefix], capsys)
        assert code == 0
        pairs = kv(out)
        assert pairs["train_rows"] == "250"
        assert pairs["test_rows"] == "1000"
        train = load_csv(pairs["train_path"])
        test = load_csv(pairs["test_path"])
        assert train.m == 250 and test.m == 1000
        assert train.n == test.n == 2

    def test_same_seed_identical_files(self, tmp_path, capsys):
        a = str(tmp_path / "a")
        b = str(tmp_path / "b")
        for prefix in (a, b):
            code, _, _ = run(
                ["gen-data", "--out-prefix", prefix, "--seed", "7"], capsys
            )
            assert code == 0
        for suffix in ("_train.csv", "_test.csv"):
            assert (tmp_path / f"a{suffix}").read_bytes() == (
                tmp_path / f"b{suffix}"
            ).read_bytes()

    def test_count_one_rejected(self, tmp_path, capsys):
        code, _, err = run(
            ["gen-data", "--train-count", "1", "--out-prefix", str(tmp_path / "x")],
            capsys,
        )
        assert code == 1
        assert "error" in err


class TestTrain:
    def test_toy_perfect_accuracy(self, tmp_path, capsys):
        data = write_toy(tmp_path / "toy.csv")
        out_path = str(tmp_path / "model.txt")
        code, out, _ = run(
            TOY_TRAIN + ["--data", data, "--out", out_path], capsys
        )
        assert code == 0
        pairs = kv(out)
        assert pairs["train_accuracy"] == "1"
        assert pairs["status"] == "Converged"
        assert float(pairs["objective"]) >= 0.0
        assert int(pairs["iterations"]) >= 1
        model = load_model(out_path)
        assert (model.n, model.n1, model.n2) == (1, 1, 1)

    def test_invalid_alpha_exits_one(self, tmp_path, capsys):
        data = write_toy(tmp_path / "toy.csv")
        code, _, err = run(
            ["train", "--data", data, "--alpha", "1.5", "--out", str(tmp_path / "m")],
            capsys,
        )
        assert code == 1
        assert "alpha" in err

    def test_missing_data_exits_one(self, tmp_path, capsys):
        code, _, err = run(
            ["train", "--data", str(tmp_path / "missing.csv")], capsys
        )
        assert code == 1
        assert "error" in err

    def test_unknown_flag_exits_one(self, tmp_path, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["train", "--data", "x.csv", "--bogus"])
        assert exc.value.code == 1

    def test_standardize_model_acts_on_raw_features(self, tmp_path, capsys):
        # Features far from the origin: training on z-scores must fold the
        # shift/scale back so the saved model classifies the raw file.
        data_path = tmp_path / "shifted.csv"
        data_path.write_text("100,-1\n104,1\n")
        out_path = str(tmp_path / "model.txt")
        code, out, _ = run(
            TOY_TRAIN
            + ["--data", str(data_path), "--out", out_path, "--standardize"],
            capsys,
        )
        assert code == 0
        assert kv(out)["train_accuracy"] == "1"
        code, out, _ = run(
            ["eval", "--model", out_path, "--data", str(data_path)], capsys
        )
        assert code == 0
        assert kv(out)["accuracy"] == "1"

    def test_restarts_zero_rejected(self, tmp_path, capsys):
        data = write_toy(tmp_path / "toy.csv")
        code, _, err = run(
            ["train", "--data", data, "--restarts", "0"], capsys
        )
        assert code == 1
        assert "restarts" in err

    def test_solver_failure_exits_two(self, tmp_path, capsys, monkeypatch):
        report = TrainReport(
            records=(),
            status=TrainStatus.SOLVER_FAILURE,
            objective=float("nan"),
            wall_time_s=0.0,
            seed=0,
        )
        monkeypatch.setattr(
            "ldep.cli.train_best", lambda data, cfg, restarts: (None, report)
        )
        data = write_toy(tmp_path / "toy.csv")
        code, _, err = run(
            ["train", "--data", data, "--out", str(tmp_path / "m")], capsys
        )
        assert code == 2
        assert "solver" in err
        assert not (tmp_path / "m").exists()


class TestEval:
    def test_matches_train_printed_accuracy(self, tmp_path, capsys):
        data = write_toy(tmp_path / "toy.csv")
        out_path = str(tmp_path / "model.txt")
        code, out, _ = run(
            TOY_TRAIN + ["--data", data, "--out", out_path], capsys
        )
        assert code == 0
        trained_acc = kv(out)["train_accuracy"]
        code, out, _ = run(["eval", "--model", out_path, "--data", data], capsys)
        assert code == 0
        pairs = kv(out)
        assert pairs["accuracy"] == trained_acc
        assert (pairs["tp"], pairs["tn"], pairs["fp"], pairs["fn"]) == (
            "1", "1", "0", "0",
        )

    def test_band_model_on_generated_test_set(self, tmp_path, capsys):
        model_path = str(tmp_path / "band.txt")
        save_model(band_model(), model_path)
        prefix = str(tmp_path / "synth")
        code, out, _ = run(["gen-data", "--out-prefix", prefix], capsys)
        assert code == 0
        test_path = kv(out)["test_path"]
        code, out, _ = run(
            ["eval", "--model", model_path, "--data", test_path], capsys
        )
        assert code == 0
        assert 0.84 <= float(kv(out)["accuracy"]) <= 0.92

    def test_dimension_mismatch_exits_one(self, tmp_path, capsys):
        model_path = str(tmp_path / "band.txt")
        save_model(band_model(), model_path)
        data = write_toy(tmp_path / "toy.csv")
        code, _, err = run(["eval", "--model", model_path, "--data", data], capsys)
        assert code == 1
        assert "error" in err


class TestPredict:
    def test_scores_match_decision_values(self, tmp_path, capsys):
        model_path = str(tmp_path / "band.txt")
        save_model(band_model(), model_path)
        feats = tmp_path / "points.csv"
        feats.write_text("0.0,0.0\n0.0,1.0\n0.25,0.5\n")
        code, out, _ = run(
            ["predict", "--model", model_path, "--data", str(feats)], capsys
        )
        assert code == 0
        lines = out.strip().splitlines()
        assert lines[0] == "tau,label"
        X = np.array([[0.0, 0.0], [0.0, 1.0], [0.25, 0.5]])
        expected = decision_values(band_model(), X)
        for line, tau in zip(lines[1:], expected):
            tau_s, label_s = line.split(",")
            assert float(tau_s) == tau
            assert int(label_s) == (1 if tau >= 0 else -1)

    def test_trailing_label_column_ignored(self, tmp_path, capsys):
        model_path = str(tmp_path / "band.txt")
        save_model(band_model(), model_path)
        feats = tmp_path / "points.csv"
        feats.write_text("0.0,0.0,1\n0.0,1.0,-1\n")
        code, out, _ = run(
            ["predict", "--model", model_path, "--data", str(feats)], capsys
        )
        assert code == 0
        labels = [line.split(",")[1] for line in out.strip().splitlines()[1:]]
        assert labels == ["-1", "1"]

    def test_out_file(self, tmp_path, capsys):
        model_path = str(tmp_path / "band.txt")
        save_model(band_model(), model_path)
        feats = tmp_path / "points.csv"
        feats.write_text("0.0,0.0\n")
        out_path = tmp_path / "pred.csv"
        code, out, _ = run(
            [
                "predict",
                "--model", model_path,
                "--data", str(feats),
                "--out", str(out_path),
            ],
            capsys,
        )
        assert code == 0
        assert kv(out)["rows"] == "1"
        assert out_path.read_text().splitlines()[0] == "tau,label"

    def test_wrong_arity_exits_one(self, tmp_path, capsys):
        model_path = str(tmp_path / "band.txt")
        save_model(band_model(), model_path)
        feats = tmp_path / "points.csv"
        feats.write_text("0.0,0.0,1,9\n")
        code, _, err = run(
            ["predict", "--model", model_path, "--data", str(feats)], capsys
        )
        assert code == 1
        assert "error" in err


class TestGrid:
    def test_rows_and_header(self, tmp_path, capsys):
        model_path = str(tmp_path / "band.txt")
        save_model(band_model(), model_path)
        out_path = tmp_path / "grid.csv"
        code, out, _ = run(
            [
                "grid",
                "--model", model_path,
                "--steps", "3",
                "--out", str(out_path),
            ],
            capsys,
        )
        assert code == 0
        assert kv(out)["rows"] == "9"
        lines = out_path.read_text().strip().splitlines()
        assert lines[0] == "x,y,tau,label"
        assert len(lines) == 10

    def test_reversed_range_exits_one(self, tmp_path, capsys):
        model_path = str(tmp_path / "band.txt")
        save_model(band_model(), model_path)
        code, _, err = run(
            [
                "grid",
                "--model", model_path,
                "--xmin", "2",
                "--xmax", "-2",
                "--out", str(tmp_path / "g.csv"),
            ],
            capsys,
        )
        assert code == 1
        assert "error" in err

    def test_missing_model_exits_one(self, tmp_path, capsys):
        code, _, err = run(
            [
                "grid",
                "--model", str(tmp_path / "nope.txt"),
                "--out", str(tmp_path / "g.csv"),
            ],
            capsys,
        )
        assert code == 1
        assert "error" in err


class TestDeterminism:
    def test_pipeline_repeats_byte_identical(self, tmp_path, capsys):
        models = []
        for tag in ("one", "two"):
            workdir = tmp_path / tag
            workdir.mkdir()
            prefix = str(workdir / "synth")
            code, out, _ = run(
                ["gen-data", "--out-prefix", prefix, "--train-count", "40",
                 "--test-count", "40", "--seed", "3"],
                capsys,
            )
            assert code == 0
            train_path = kv(out)["train_path"]
            model_path = workdir / "model.txt"
            code, _, _ = run(
                TOY_TRAIN + [
                    "--data", train_path,
                    "--out", str(model_path),
                    "--seed", "3",
                ],
                capsys,
            )
            assert code == 0
            models.append(model_path.read_bytes())
        assert models[0] == models[1]
