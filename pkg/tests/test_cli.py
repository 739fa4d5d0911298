import json

import pytest

from pmuse import cli, corpus
from pmuse.model import ModelConfig, init
from pmuse.train import Checkpoint, save_checkpoint


@pytest.fixture(scope="module")
def tiny_ckpt(tmp_path_factory):
    root = tmp_path_factory.mktemp("ckpt")
    config = ModelConfig(d=16, self_layers=1, self_heads=4, cross_heads=1,
                         max_len=18, text_dim=8, dropout=0.0, seed=0)
    path = root / "crello.pmuse"
    save_checkpoint(Checkpoint(model_config=config, params=init(config, seed=0),
                               mode="crello"), path)
    pat_config = ModelConfig(d=16, self_layers=1, self_heads=4, cross_heads=1,
                             max_len=6, text_dim=8, dropout=0.0, seed=0)
    pat_path = root / "pat.pmuse"
    save_checkpoint(Checkpoint(model_config=pat_config, params=init(pat_config, seed=1),
                               mode="pat"), pat_path)
    return {"crello": str(path), "pat": str(pat_path)}


class TestUsage:
    def test_no_args_is_usage(self, capsys):
        assert cli.main([]) == cli.EXIT_USAGE
        assert "usage" in capsys.readouterr().err.lower()

    def test_unknown_flag_is_usage_on_stderr(self, capsys):
        assert cli.main(["synth", "--n", "3", "--frobnicate"]) == cli.EXIT_USAGE
        err = capsys.readouterr().err.lower()
        assert "usage" in err

    def test_unknown_command(self, capsys):
        assert cli.main(["conquer"]) == cli.EXIT_USAGE


class TestSynth:
    def test_writes_corpus(self, tmp_path, capsys):
        out = tmp_path / "c.jsonl"
        assert cli.main(["synth", "--n", "25", "--seed", "3", "--out", str(out)]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["documents"] == 25
        assert len(corpus.load_jsonl(out)) == 25

    def test_bad_n_is_data_error(self, tmp_path, capsys):
        out = tmp_path / "c.jsonl"
        assert cli.main(["synth", "--n", "0", "--out", str(out)]) == cli.EXIT_DATA


class TestExtractPalette:
    def test_extracts(self, tmp_path, capsys):
        pixels = tmp_path / "px.json"
        pixels.write_text(json.dumps(["#000000"] * 10 + ["#ffffff"] * 10))
        assert cli.main(["extract-palette", "--pixels", str(pixels), "--k", "2"]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["codes"] == [136, 3976]

    def test_bad_hex_is_data_error(self, tmp_path, capsys):
        pixels = tmp_path / "px.json"
        pixels.write_text(json.dumps(["nope"]))
        assert cli.main(["extract-palette", "--pixels", str(pixels), "--k", "2"]) == cli.EXIT_DATA

    def test_missing_file_is_data_error(self, capsys):
        assert cli.main(["extract-palette", "--pixels", "/no/such.json", "--k", "2"]) == cli.EXIT_DATA


class TestRecommend:
    def test_recommend_document(self, tmp_path, capsys, tiny_ckpt):
        doc = {"id": "d", "palettes": {"graphic": ["#000000", "#ffffff"]},
               "phrases": [{"text": "forest"}]}
        doc_path = tmp_path / "doc.json"
        doc_path.write_text(json.dumps(doc))
        assert cli.main(["recommend", "--ckpt", tiny_ckpt["crello"], "--doc", str(doc_path),
                         "--mask", "graphic:0", "--k", "4"]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert len(payload["recommendations"]) == 1
        assert len(payload["recommendations"][0]["candidates"]) == 4

    def test_bad_mask_spec_is_usage(self, tmp_path, capsys, tiny_ckpt):
        doc_path = tmp_path / "doc.json"
        doc_path.write_text(json.dumps({"id": "d", "palettes": {"graphic": ["#000000"]}}))
        assert cli.main(["recommend", "--ckpt", tiny_ckpt["crello"], "--doc", str(doc_path),
                         "--mask", "banner:0"]) == cli.EXIT_USAGE

    def test_masking_empty_slot_is_data_error(self, tmp_path, capsys, tiny_ckpt):
        doc_path = tmp_path / "doc.json"
        doc_path.write_text(json.dumps({"id": "d", "palettes": {"graphic": ["#000000"]}}))
        assert cli.main(["recommend", "--ckpt", tiny_ckpt["crello"], "--doc", str(doc_path),
                         "--mask", "image:0"]) == cli.EXIT_DATA


class TestGenerate:
    def test_pp_emits_five_distinct_hex(self, capsys, tiny_ckpt):
        assert cli.main(["generate", "--ckpt", tiny_ckpt["pat"], "--text", "forest;poster"]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert len(payload["colors"]) == 5
        assert len(set(payload["colors"])) == 5

    def test_crello_checkpoint_is_data_error(self, capsys, tiny_ckpt):
        assert cli.main(["generate", "--ckpt", tiny_ckpt["crello"], "--text", "x"]) == cli.EXIT_DATA

    def test_corrupt_checkpoint_is_data_error(self, tmp_path, capsys, tiny_ckpt):
        bad = tmp_path / "bad.pmuse"
        raw = bytearray(open(tiny_ckpt["pat"], "rb").read())
        raw[-40] ^= 0x55
        bad.write_bytes(bytes(raw))
        assert cli.main(["generate", "--ckpt", str(bad), "--text", "x"]) == cli.EXIT_DATA


class TestEvaluateAndTrain:
    def test_train_then_evaluate(self, tmp_path, capsys, tiny_ckpt):
        data = tmp_path / "train.jsonl"
        val = tmp_path / "val.jsonl"
        corpus.save_jsonl(corpus.synth_corpus(16, seed=1), data)
        corpus.save_jsonl(corpus.synth_corpus(8, seed=2), val)
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({
            "model": {"d": 16, "self_layers": 1, "self_heads": 4, "text_dim": 8, "dropout": 0.0},
            "train": {"batch_size": 8, "lr": 0.001, "max_epochs": 2, "patience": 5, "seed": 0},
        }))
        out = tmp_path / "m.pmuse"
        assert cli.main(["train", "--data", str(data), "--val", str(val),
                         "--config", str(cfg), "--out", str(out)]) == 0
        summary = json.loads(capsys.readouterr().out)
        assert summary["epochs_run"] == 2

        assert cli.main(["evaluate", "--ckpt", str(out), "--data", str(val),
                         "--mask-count", "1"]) == 0
        report = json.loads(capsys.readouterr().out)
        assert set(report) >= {"accuracy_at_1", "distribution_at_1"}
        assert 0.0 <= report["accuracy_at_1"] <= 1.0

    def test_evaluate_requires_known_mask_count(self, capsys, tiny_ckpt):
        assert cli.main(["evaluate", "--ckpt", tiny_ckpt["crello"], "--data", "x.jsonl",
                         "--mask-count", "7"]) == cli.EXIT_USAGE

    def test_malformed_corpus_is_data_error(self, tmp_path, capsys, tiny_ckpt):
        bad = tmp_path / "bad.jsonl"
        bad.write_text("{nope\n")
        assert cli.main(["evaluate", "--ckpt", tiny_ckpt["crello"], "--data", str(bad),
                         "--mask-count", "1"]) == cli.EXIT_DATA


class TestServe:
    def test_bad_addr_is_usage(self, capsys, tiny_ckpt):
        assert cli.main(["serve", "--ckpt", tiny_ckpt["crello"],
                         "--addr", "nonsense"]) == cli.EXIT_USAGE
