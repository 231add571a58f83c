import json
import time

import pytest

from ocref.cli import main
from ocref.corpus import save_transcripts
from synth import synth_corpus


@pytest.fixture(scope="module")
def corpus_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "transcripts.jsonl"
    save_transcripts(path, synth_corpus(50, seed=13))
    return path


@pytest.fixture(scope="module")
def split_dir(tmp_path_factory, corpus_file):
    out = tmp_path_factory.mktemp("split")
    assert main(["split", "--in", str(corpus_file), "--out", str(out),
                 "--seed", "1"]) == 0
    return out


class TestGenerate:
    def test_three_lines(self, capsys):
        assert main(["generate", "--num-shared", "5", "--count", "3",
                     "--seed", "7"]) == 0
        lines = [l for l in capsys.readouterr().out.splitlines() if l.strip()]
        assert len(lines) == 3
        for line in lines:
            d = json.loads(line)
            assert d["num_shared"] == 5

    def test_deterministic(self, capsys):
        main(["generate", "--num-shared", "4", "--count", "2", "--seed", "3"])
        first = capsys.readouterr().out
        main(["generate", "--num-shared", "4", "--count", "2", "--seed", "3"])
        assert capsys.readouterr().out == first

    def test_out_file(self, tmp_path):
        out = tmp_path / "worlds.jsonl"
        assert main(["generate", "--num-shared", "6", "--count", "4",
                     "--seed", "0", "--out", str(out)]) == 0
        assert len(out.read_text().splitlines()) == 4

    def test_bad_k_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            main(["generate", "--num-shared", "9", "--count", "1"])
        assert exc.value.code == 2


class TestAnalyze:
    def test_empty_file(self, tmp_path, capsys):
        empty = tmp_path / "empty.jsonl"
        empty.write_text("")
        report = tmp_path / "report.json"
        assert main(["analyze", "--in", str(empty), "--report", str(report)]) == 0
        data = json.loads(report.read_text())
        assert data["stats"]["overall"]["n_dialogues"] == 0

    def test_report_and_plots(self, corpus_file, tmp_path):
        report = tmp_path / "report.json"
        plots = tmp_path / "plots"
        assert main(["analyze", "--in", str(corpus_file), "--report", str(report),
                     "--plots", str(plots)]) == 0
        data = json.loads(report.read_text())
        assert data["stats"]["overall"]["n_dialogues"] == 50
        assert (plots / "selection_by_color.png").exists()
        assert (plots / "selection_by_size.png").exists()

    def test_json_mode(self, corpus_file, tmp_path, capsys):
        report = tmp_path / "r.json"
        main(["analyze", "--in", str(corpus_file), "--report", str(report), "--json"])
        out = capsys.readouterr().out
        assert json.loads(out)["stats"]["overall"]["n_dialogues"] == 50

    def test_missing_file_is_error(self, tmp_path, capsys):
        assert main(["analyze", "--in", str(tmp_path / "nope.jsonl"),
                     "--report", str(tmp_path / "r.json")]) == 1


class TestSplitVocab:
    def test_split_output(self, split_dir):
        counts = {name: len((split_dir / f"{name}.jsonl").read_text().splitlines())
                  for name in ("train", "valid", "test")}
        assert counts == {"train": 40, "valid": 5, "test": 5}

    def test_vocab(self, split_dir, tmp_path, capsys):
        out = tmp_path / "vocab.json"
        assert main(["vocab", "--train", str(split_dir / "train.jsonl"),
                     "--out", str(out)]) == 0
        vocab = json.loads(out.read_text())
        assert vocab["id_to_token"][0] == "<unk>"
        assert len(vocab["id_to_token"]) > 4


class TestTrainEval:
    def test_train_context_mlp_under_60s(self, split_dir, tmp_path, capsys):
        out = tmp_path / "m.npz"
        t0 = time.perf_counter()
        rc = main(["train", "--variant", "context-mlp", "--data", str(split_dir),
                   "--out", str(out), "--seed", "0", "--epochs", "5"])
        dt = time.perf_counter() - t0
        assert rc == 0
        assert dt < 60.0
        assert out.exists()

    def test_eval_report(self, split_dir, tmp_path, capsys):
        models = tmp_path / "models"
        models.mkdir()
        for seed in (0, 1):
            main(["train", "--variant", "context-mlp", "--data", str(split_dir),
                  "--out", str(models / f"context-mlp-s{seed}.npz"),
                  "--seed", str(seed), "--epochs", "2"])
        report = tmp_path / "eval.json"
        rc = main(["eval", "--models", str(models), "--data", str(split_dir),
                   "--report", str(report)])
        assert rc == 0
        data = json.loads(report.read_text())
        rep = data["variants"]["context-mlp"]
        assert len(rep["seed_accuracies"]) == 2
        assert 0.0 <= rep["mean"] <= 1.0

    def test_eval_no_models_errors(self, split_dir, tmp_path):
        empty = tmp_path / "none"
        empty.mkdir()
        rc = main(["eval", "--models", str(empty), "--data", str(split_dir),
                   "--report", str(tmp_path / "r.json")])
        assert rc == 1


class TestSelfcheck:
    def test_quick_selfcheck_passes(self, capsys):
        assert main(["selfcheck"]) == 0
        out = capsys.readouterr().out
        assert out.count("ok  ") == 5


class TestAnalyzeDictsOverride:
    def test_custom_dictionary_directory(self, corpus_file, tmp_path):
        dicts = tmp_path / "dicts"
        dicts.mkdir()
        (dicts / "custom.json").write_text(json.dumps(
            {"category": "Custom", "keywords": ["dot", "dark"]}))
        report = tmp_path / "report.json"
        assert main(["analyze", "--in", str(corpus_file), "--report", str(report),
                     "--dicts", str(dicts)]) == 0
        data = json.loads(report.read_text())
        assert list(data["nuance_per_100_utterances"]) == ["Custom"]
        assert data["nuance_per_100_utterances"]["Custom"] > 0
