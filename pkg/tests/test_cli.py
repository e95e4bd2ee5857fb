import json

import numpy as np
import pytest

from dualmp.cli import main


def read_metrics(path):
    out = {}
    for line in path.read_text().splitlines():
        key, value = line.split(" ", 1)
        out[key] = value
    return out


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("data")
    assert main(["synth", "--out", str(root), "--nodes", "120", "--fraud-ratio", "0.2",
                 "--mean-degree", "6", "--seed", "3"]) == 0
    return root / "manifest.txt"


@pytest.fixture(scope="module")
def trained(dataset, tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    code = main(["train", "--data", str(dataset), "--out", str(out),
                 "--seed", "5", "--epochs", "8", "--patience", "8"])
    assert code == 0
    return out


class TestSynth:
    def test_writes_loadable_dataset(self, dataset):
        from dualmp.data import load_dataset

        graph = load_dataset(dataset)
        assert graph.num_nodes == 120
        assert (graph.labels == 1).sum() == 24  # floor(120 * 0.2)

    def test_same_seed_is_byte_identical(self, tmp_path):
        args = ["synth", "--nodes", "50", "--seed", "11"]
        assert main(args + ["--out", str(tmp_path / "a")]) == 0
        assert main(args + ["--out", str(tmp_path / "b")]) == 0
        for name in ("manifest.txt", "features.csv", "labels.csv", "splits.txt", "edges_rel0.csv"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_multiple_relations_multiple_edge_files(self, tmp_path):
        assert main(["synth", "--out", str(tmp_path), "--nodes", "50", "--relations", "3"]) == 0
        for r in range(3):
            assert (tmp_path / f"edges_rel{r}.csv").exists()

    def test_invalid_probability_exits_one(self, tmp_path):
        assert main(["synth", "--out", str(tmp_path), "--fraud-homophily", "1.5"]) == 1


class TestTrain:
    def test_outputs_exist(self, trained):
        assert (trained / "train_log.jsonl").exists()
        assert (trained / "checkpoint.bin").exists()
        assert (trained / "metrics.txt").exists()

    def test_log_structure(self, trained):
        lines = [json.loads(l) for l in (trained / "train_log.jsonl").read_text().splitlines()]
        assert lines[0]["type"] == "header"
        assert lines[0]["config"]["seed"] == 5
        epochs = [l for l in lines if l["type"] == "epoch"]
        assert len(epochs) == 8
        assert {"loss_total", "val_auc"} <= set(epochs[0])

    def test_deterministic_metrics(self, dataset, tmp_path):
        args = ["train", "--data", str(dataset), "--seed", "5", "--epochs", "4", "--patience", "4"]
        assert main(args + ["--out", str(tmp_path / "r1")]) == 0
        assert main(args + ["--out", str(tmp_path / "r2")]) == 0
        assert (tmp_path / "r1" / "metrics.txt").read_bytes() == (tmp_path / "r2" / "metrics.txt").read_bytes()
        assert (tmp_path / "r1" / "checkpoint.bin").read_bytes() == (tmp_path / "r2" / "checkpoint.bin").read_bytes()
        # logs differ only in the header timestamp
        body = lambda p: (p / "train_log.jsonl").read_text().splitlines()[1:]
        assert body(tmp_path / "r1") == body(tmp_path / "r2")

    def test_missing_manifest_exits_one(self, tmp_path, capsys):
        assert main(["train", "--data", str(tmp_path / "nope.txt"), "--out", str(tmp_path)]) == 1
        assert "nope.txt" in capsys.readouterr().err

    def test_ablation_noted_and_parameters_reduced(self, dataset, tmp_path):
        out_full = tmp_path / "full"
        out_heter = tmp_path / "heter"
        base = ["train", "--data", str(dataset), "--seed", "5", "--epochs", "3", "--patience", "3"]
        assert main(base + ["--out", str(out_full)]) == 0
        assert main(base + ["--out", str(out_heter), "--ablation", "heter"]) == 0
        header = json.loads((out_heter / "train_log.jsonl").read_text().splitlines()[0])
        assert header["config"]["ablation"] == "heter"
        from dualmp.data import load_checkpoint

        full_params, _ = load_checkpoint(out_full / "checkpoint.bin")
        heter_params, _ = load_checkpoint(out_heter / "checkpoint.bin")
        count = lambda params: sum(v.size for v in params.values())
        assert count(heter_params) < count(full_params)

    def test_config_file_and_flag_precedence(self, dataset, tmp_path):
        cfg = tmp_path / "overrides.txt"
        cfg.write_text("epochs 3\npatience 2\nlearning_rate 0.05\n")
        out = tmp_path / "run"
        assert main(["train", "--data", str(dataset), "--out", str(out),
                     "--config", str(cfg), "--patience", "3", "--seed", "1"]) == 0
        header = json.loads((out / "train_log.jsonl").read_text().splitlines()[0])
        assert header["config"]["epochs"] == 3  # from file
        assert header["config"]["patience"] == 3  # flag wins over file
        assert header["config"]["learning_rate"] == 0.05

    def test_invalid_config_value_exits_one(self, dataset, tmp_path):
        assert main(["train", "--data", str(dataset), "--out", str(tmp_path / "x"),
                     "--epochs", "0"]) == 1


class TestEval:
    def test_matches_training_metrics(self, dataset, trained, capsys):
        assert main(["eval", "--data", str(dataset), "--checkpoint",
                     str(trained / "checkpoint.bin")]) == 0
        printed = capsys.readouterr().out
        stored = read_metrics(trained / "metrics.txt")
        assert f"auc={float(stored['auc']):.4f}" in printed

    def test_val_split_flag(self, dataset, trained, capsys):
        assert main(["eval", "--data", str(dataset), "--checkpoint",
                     str(trained / "checkpoint.bin"), "--split", "val"]) == 0
        assert "val split:" in capsys.readouterr().out

    def test_relation_count_mismatch_exits_one(self, trained, tmp_path, capsys):
        assert main(["synth", "--out", str(tmp_path / "r3"), "--nodes", "120",
                     "--fraud-ratio", "0.2", "--relations", "3", "--seed", "3"]) == 0
        code = main(["eval", "--data", str(tmp_path / "r3" / "manifest.txt"),
                     "--checkpoint", str(trained / "checkpoint.bin")])
        assert code == 1
        assert "does not match" in capsys.readouterr().err

    def test_embedding_export(self, dataset, trained, tmp_path):
        out = tmp_path / "emb.csv"
        assert main(["eval", "--data", str(dataset), "--checkpoint",
                     str(trained / "checkpoint.bin"), "--export-embeddings", str(out)]) == 0
        lines = out.read_text().splitlines()
        assert lines[0].startswith("node,label,e0")
        assert len(lines) == 121


class TestGradcheck:
    def test_single_wiring_passes(self, capsys):
        assert main(["gradcheck", "--ablation", "sep"]) == 0
        assert "gradcheck passed" in capsys.readouterr().out

    def test_reports_per_parameter(self, capsys):
        assert main(["gradcheck", "--ablation", "heter"]) == 0
        out = capsys.readouterr().out
        assert "[heter]" in out and "filter_w" in out
