import csv
import dataclasses
import json
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from spatialgnn import cli, datagen, serialize
from spatialgnn.baselines import MlpConfig, MlpModel
from spatialgnn.pipeline import Preprocessing, TrainedModel

FAST = {"n": 120, "max_epochs": 30, "smooth_trials": 3, "smooth_grid": 16, "smooth_redraws": 5}


@pytest.fixture
def config(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps(FAST))
    return str(path)


def run(*argv):
    return cli.main([str(a) for a in argv])


def tree(directory):
    return {p.name: p.read_bytes() for p in sorted(directory.iterdir()) if p.is_file()}


def test_generate_writes_dataset(tmp_path, config):
    assert run("generate", "--config", config, "--out", tmp_path / "a") == 0
    ds = datagen.load(tmp_path / "a" / "dataset.csv")
    assert ds.n == 120
    meta = json.loads((tmp_path / "a" / "dataset.meta.json").read_text())
    assert meta["seed"] == 42


def test_generate_default_has_400_rows(tmp_path):
    assert run("generate", "--out", tmp_path) == 0
    assert len((tmp_path / "dataset.csv").read_text().splitlines()) == 401


def test_generate_is_byte_stable(tmp_path, config):
    run("generate", "--config", config, "--out", tmp_path / "a")
    run("generate", "--config", config, "--out", tmp_path / "b")
    assert tree(tmp_path / "a") == tree(tmp_path / "b")
    run("generate", "--config", config, "--seed", 43, "--out", tmp_path / "c")
    assert tree(tmp_path / "c") != tree(tmp_path / "a")


def test_invalid_split_fractions_exit_code(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"split_train": 0.9, "split_val": 0.3, "split_test": 0.3}))
    assert run("generate", "--config", path, "--out", tmp_path) != 0
    assert "split" in capsys.readouterr().err


def test_unknown_config_key_is_usage_error(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"learning_rte": 0.1}))
    assert run("generate", "--config", path, "--out", tmp_path) == 1


def test_usage_errors_exit_1(tmp_path):
    with pytest.raises(SystemExit) as exc:
        run("train", tmp_path / "d.csv", "--model", "svm")
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        run("frobnicate")
    assert exc.value.code == 1


def test_missing_dataset_exit_2(tmp_path):
    assert run("train", tmp_path / "missing.csv", "--out", tmp_path) == 2


def test_divergent_training_exit_3(tmp_path):
    path = tmp_path / "hot.json"
    path.write_text(json.dumps({**FAST, "learning_rate": 1e300}))
    run("generate", "--config", path, "--out", tmp_path)
    assert run("train", tmp_path / "dataset.csv", "--config", path, "--out", tmp_path) == 3


@pytest.fixture
def trained(tmp_path, config):
    run("generate", "--config", config, "--out", tmp_path)
    assert run("train", tmp_path / "dataset.csv", "--config", config, "--out", tmp_path) == 0
    return tmp_path


def test_train_writes_model_and_trace(trained):
    lines = (trained / "trace_geoggnn.csv").read_text().splitlines()
    assert lines[0] == "epoch,loss,train_acc,val_acc"
    assert len(lines) == 1 + FAST["max_epochs"]
    serialize.model_from_json((trained / "model_geoggnn.json").read_text())


def test_train_is_byte_stable(tmp_path, config):
    run("generate", "--config", config, "--out", tmp_path)
    for sub in ("a", "b"):
        for model in ("geoggnn", "nn", "cnn"):
            assert run("train", tmp_path / "dataset.csv", "--model", model, "--config", config,
                       "--out", tmp_path / sub) == 0
    assert tree(tmp_path / "a") == tree(tmp_path / "b")


def test_evaluate_outputs(trained):
    assert run("evaluate", trained / "model_geoggnn.json", trained / "dataset.csv") == 0
    report = json.loads((trained / "report.json").read_text())
    assert 0.0 <= report["accuracy"] <= 1.0
    for name in ("roc.svg", "pr.svg", "confusion.svg", "loss.svg"):
        root = ET.fromstring((trained / name).read_text())
        assert root.tag.endswith("svg")
    for k in range(4):
        assert (trained / f"roc_class{k}.csv").exists()
        assert (trained / f"pr_class{k}.csv").exists()


def test_curve_rows_match_unique_thresholds(trained):
    from spatialgnn import pipeline

    run("evaluate", trained / "model_geoggnn.json", trained / "dataset.csv")
    tm = serialize.model_from_json((trained / "model_geoggnn.json").read_text())
    ds = datagen.load(trained / "dataset.csv")
    probs = pipeline.predict_proba(tm, ds)[ds.masks["test"]]
    for k in range(4):
        with open(trained / f"roc_class{k}.csv") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["fpr", "tpr"]
        assert len(rows) - 1 == np.unique(probs[:, k]).size + 1


def test_evaluate_bad_split_exits_nonzero(trained):
    with pytest.raises(SystemExit) as exc:
        run("evaluate", trained / "model_geoggnn.json", trained / "dataset.csv", "--split", "holdout")
    assert exc.value.code != 0


def test_evaluate_dimension_mismatch_exit_2(trained, tmp_path):
    ds = datagen.load(trained / "dataset.csv")
    narrow = dataclasses.replace(ds, features=ds.features[:, :3])
    datagen.save(narrow, tmp_path / "narrow.csv")
    assert run("evaluate", trained / "model_geoggnn.json", tmp_path / "narrow.csv") == 2


def test_evaluate_perfect_model(tmp_path):
    base = datagen.generate(datagen.GenConfig(seed=7, n=80))
    features = 10.0 * np.eye(4)[base.labels]
    ds = dataclasses.replace(base, features=features)
    datagen.save(ds, tmp_path / "d.csv")
    # after standardization the own-class column is the only positive one
    w = np.vstack([np.eye(4), np.zeros((2, 4))])
    model = MlpModel(params=[w, np.zeros((1, 4))], config=MlpConfig(layer_dims=(6, 4)))
    prep = Preprocessing(features.mean(axis=0), features.std(axis=0), np.zeros(2), np.ones(2))
    (tmp_path / "m.json").write_text(serialize.model_to_json(TrainedModel("nn", model, prep)))
    assert run("evaluate", tmp_path / "m.json", tmp_path / "d.csv", "--out", tmp_path / "ev") == 0
    report = json.loads((tmp_path / "ev" / "report.json").read_text())
    assert report["accuracy"] == 1.0
    assert all(pc["auc_roc"] == 1.0 for pc in report["per_class"])


def test_benchmark_outputs_and_determinism(tmp_path, config, capsys):
    assert run("benchmark", "--config", config, "--out", tmp_path / "a") == 0
    assert "GeogGNN" in capsys.readouterr().out
    assert run("benchmark", "--config", config, "--out", tmp_path / "b") == 0
    a, b = tree(tmp_path / "a"), tree(tmp_path / "b")
    a.pop("timings.json")
    b.pop("timings.json")
    assert a == b
    doc = json.loads(a["benchmark.json"])
    assert [m["model"] for m in doc["models"]] == ["geoggnn", "nn", "cnn"]
    assert all(m["log_loss"] is not None for m in doc["models"])
    header = a["benchmark.txt"].decode().splitlines()[0]
    assert "Log-Loss" in header and "AUC-PR c3" in header
    for kind in ("geoggnn", "nn", "cnn"):
        ET.fromstring(a[f"{kind}_roc.svg"])


def test_smoothlab_outputs(tmp_path, config):
    assert run("smoothlab", "--config", config, "--out", tmp_path / "a") == 0
    assert run("smoothlab", "--config", config, "--out", tmp_path / "b") == 0
    assert tree(tmp_path / "a") == tree(tmp_path / "b")
    summary = json.loads((tmp_path / "a" / "smoothlab_summary.json").read_text())
    assert summary["trials"] == 3
    assert summary["variance_check"]["fraction_reduced"] == 1.0


def test_smoothlab_noiseless_documents_boundary(tmp_path):
    path = tmp_path / "quiet.json"
    path.write_text(json.dumps({**FAST, "smooth_noise_std": 0.0}))
    assert run("smoothlab", "--config", path, "--out", tmp_path) == 0
    summary = json.loads((tmp_path / "smoothlab_summary.json").read_text())
    assert summary["win_rate"] == 0.0
    assert summary["variance_check"] is None
    assert "cannot lower" in summary["note"]


def test_module_entry_point():
    import subprocess
    import sys

    proc = subprocess.run([sys.executable, "-m", "spatialgnn", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "benchmark" in proc.stdout
