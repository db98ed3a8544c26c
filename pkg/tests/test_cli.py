import numpy as np
import pytest

import prcrf.cli as cli
from prcrf.cli import main
from prcrf.data import write_csv
from prcrf.models import Activation
from prcrf.repo import ModelRepository

from conftest import make_dataset, write_text


@pytest.fixture
def separable_csv(tmp_path, separable):
    path = tmp_path / "separable.csv"
    write_csv(separable, path, target_column="y")
    return path


@pytest.fixture
def noisy_csv(tmp_path):
    rng = np.random.default_rng(8)
    labels = np.array([1, -1] * 50)
    d = make_dataset(rng.normal(size=(100, 3)) + (labels == 1)[:, None], labels)
    path = tmp_path / "noisy.csv"
    write_csv(d, path, target_column="y")
    return path


def read_predictions(path):
    lines = path.read_text().splitlines()
    assert lines[0] == "row,label,vote_fraction"
    return [int(line.split(",")[1]) for line in lines[1:]]


def test_help_lists_defaults(capsys):
    with pytest.raises(SystemExit) as exit_info:
        main(["benchmark", "--help"])
    assert exit_info.value.code == 0
    out = " ".join(capsys.readouterr().out.split())
    for text in ("default: 100", "default: 0.3", "default: 0.95", "default: majority", "default: 0)"):
        assert text in out
    assert "--ae-activation" in out
    assert "default: relu" in out


def test_inspect(capsys, tmp_path):
    path = write_text(tmp_path / "cells.csv", [[1, "M"], [2, "B"], [3, "B"], [4, "B"], [5, "M"]], ["x", "diagnosis"])
    assert main(["inspect", "--data", str(path), "--target", "diagnosis", "--positive-label", "M"]) == 0
    assert capsys.readouterr().out.strip() == "cells,5,0.4000,1"


def test_inspect_missing_file(capsys, tmp_path):
    out = tmp_path / "summary.txt"
    code = main(["inspect", "--data", str(tmp_path / "absent.csv"), "--target", "y", "--out", str(out)])
    assert code != 0
    assert "not found" in capsys.readouterr().err
    assert not out.exists()


def test_train_then_predict(tmp_path, separable_csv, separable, capsys):
    model = tmp_path / "model.json"
    assert main(["train", "--data", str(separable_csv), "--target", "y", "--n-trees", "15", "--out", str(model)]) == 0
    summary = capsys.readouterr().out
    assert "trees: 15" in summary
    assert "tree 14:" in summary

    predictions = tmp_path / "predictions.csv"
    code = main(["predict", "--model", str(model), "--data", str(separable_csv), "--target", "y", "--out", str(predictions)])
    assert code == 0
    assert read_predictions(predictions) == separable.labels.tolist()


def test_train_is_byte_identical_across_runs_and_threads(tmp_path, noisy_csv):
    paths = []
    for name, threads in (("a.json", "1"), ("b.json", "1"), ("c.json", "3")):
        path = tmp_path / name
        args = ["train", "--data", str(noisy_csv), "--target", "y", "--n-trees", "6", "--seed", "5"]
        assert main(args + ["--threads", threads, "--out", str(path)]) == 0
        paths.append(path)
    assert paths[0].read_bytes() == paths[1].read_bytes() == paths[2].read_bytes()


def test_train_ae_mode_reports_flagged_rows(tmp_path, noisy_csv, capsys):
    model = tmp_path / "ae.json"
    args = [
        "train", "--data", str(noisy_csv), "--target", "y", "--ae",
        "--ae-quantile", "0.95", "--ae-population", "all", "--ae-epochs", "5",
        "--n-trees", "3", "--out", str(model),
    ]
    assert main(args) == 0
    out = capsys.readouterr().out
    assert "algorithm: AE-PRC-RF" in out
    assert "flagged rows: 5 " in out


def test_predict_rejects_wrong_column_count(tmp_path, separable_csv, capsys):
    model = tmp_path / "model.json"
    assert main(["train", "--data", str(separable_csv), "--target", "y", "--n-trees", "2", "--out", str(model)]) == 0
    wide = write_text(tmp_path / "wide.csv", [[1, 2], [3, 4]], ["a", "b"])
    out = tmp_path / "predictions.csv"
    assert main(["predict", "--model", str(model), "--data", str(wide), "--out", str(out)]) != 0
    assert "input has 2" in capsys.readouterr().err
    assert not out.exists()


def test_filter_writes_cleaned_rows_and_flags(tmp_path, noisy_csv, capsys):
    out = tmp_path / "clean.csv"
    args = [
        "filter", "--data", str(noisy_csv), "--target", "y", "--ae-population", "all",
        "--ae-epochs", "3", "--out", str(out),
    ]
    assert main(args) == 0
    flagged = [int(line) for line in (tmp_path / "clean.csv.flagged").read_text().split()]
    kept = out.read_text().splitlines()
    assert len(flagged) == 5
    assert len(kept) - 1 == 100 - len(flagged)
    assert kept[0] == noisy_csv.read_text().splitlines()[0]


def test_benchmark_reports_are_reproducible(tmp_path, noisy_csv):
    outputs = []
    for prefix in ("first", "second"):
        args = [
            "benchmark", "--data", str(noisy_csv), "--target", "y", "--repetitions", "2",
            "--n-trees", "3", "--ae-epochs", "2", "--algorithms", "PRC-RF,AE-PRC-RF",
            "--out", str(tmp_path / prefix),
        ]
        assert main(args) == 0
        outputs.append(((tmp_path / f"{prefix}.txt").read_text(), (tmp_path / f"{prefix}.csv").read_text()))
    assert outputs[0] == outputs[1]
    records = outputs[0][1].splitlines()
    assert len(records) == 1 + 2 * 2
    assert {line.split(",")[0] for line in records[1:]} == {"PRC-RF", "AE-PRC-RF"}


def test_invalid_setting_exits_with_usage_error(capsys, separable_csv):
    assert main(["benchmark", "--data", str(separable_csv), "--target", "y", "--test-fraction", "1.5"]) == 2
    assert "invalid configuration" in capsys.readouterr().err


def test_config_file_is_overridden_by_flags(tmp_path, separable_csv, capsys):
    config = tmp_path / "run.yaml"
    config.write_text(f"data: {separable_csv}\ntarget: y\nn_trees: 4\n")
    model = tmp_path / "model.json"
    assert main(["train", "--config", str(config), "--n-trees", "2", "--out", str(model)]) == 0
    assert "trees: 2" in capsys.readouterr().out


def test_no_ae_flag_overrides_config_file(tmp_path, noisy_csv, capsys):
    config = tmp_path / "run.yaml"
    config.write_text(f"data: {noisy_csv}\ntarget: y\nae: true\nae_epochs: 2\nn_trees: 2\n")
    model = tmp_path / "model.json"
    assert main(["train", "--config", str(config), "--out", str(model)]) == 0
    assert "algorithm: AE-PRC-RF" in capsys.readouterr().out
    assert main(["train", "--config", str(config), "--no-ae", "--out", str(model)]) == 0
    assert "algorithm: PRC-RF" in capsys.readouterr().out
    _, autoencoder = ModelRepository(model).load()
    assert autoencoder is None


def test_ae_activation_flag_reaches_the_model(tmp_path, noisy_csv):
    model = tmp_path / "model.json"
    args = [
        "train", "--data", str(noisy_csv), "--target", "y", "--ae", "--ae-activation", "sigmoid",
        "--ae-population", "all", "--ae-epochs", "2", "--n-trees", "2", "--out", str(model),
    ]
    assert main(args) == 0
    _, autoencoder = ModelRepository(model).load()
    assert autoencoder.config.hidden_activation == Activation.SIGMOID


def test_filter_leaves_nothing_when_flag_file_fails(tmp_path, noisy_csv, monkeypatch, capsys):
    def refuse(path, text):
        raise OSError(f"cannot write {path}")

    monkeypatch.setattr(cli, "write_text_atomic", refuse)
    out = tmp_path / "clean.csv"
    args = [
        "filter", "--data", str(noisy_csv), "--target", "y", "--ae-population", "all",
        "--ae-epochs", "2", "--out", str(out),
    ]
    assert main(args) == 1
    assert "cannot write" in capsys.readouterr().err
    assert not out.exists()
    assert not (tmp_path / "clean.csv.flagged").exists()


def test_filter_leaves_nothing_when_cleaned_rows_fail(tmp_path, noisy_csv, monkeypatch):
    def refuse(*args, **kwargs):
        raise OSError("disk full")

    monkeypatch.setattr(cli, "write_rows", refuse)
    out = tmp_path / "clean.csv"
    args = [
        "filter", "--data", str(noisy_csv), "--target", "y", "--ae-population", "all",
        "--ae-epochs", "2", "--out", str(out),
    ]
    assert main(args) == 1
    assert not out.exists()
    assert not (tmp_path / "clean.csv.flagged").exists()
