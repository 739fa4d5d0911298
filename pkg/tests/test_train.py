import math

import numpy as np
import pytest

from pmuse import corpus, model as M, nn
from pmuse.model import ModelConfig, collate, forward, init
from pmuse.text_embed import HashEmbedder, embed_phrases
from pmuse.train import (Checkpoint, CheckpointError, EarlyStopper, TrainConfig,
                         load_checkpoint, masking_sweep, save_checkpoint, train)


def micro_setup(n_train=12, n_val=6, seed=0, **model_over):
    docs = corpus.synth_corpus(n_train + n_val, seed=seed)
    cfg = dict(d=16, self_layers=1, self_heads=4, cross_heads=1, max_len=18,
               text_dim=8, dropout=0.0, seed=0)
    cfg.update(model_over)
    return docs[:n_train], docs[n_train:], ModelConfig(**cfg), HashEmbedder(8)


class TestEarlyStopper:
    def test_rising_loss_stops_after_second_epoch(self):
        stopper = EarlyStopper(patience=1)
        assert stopper.update(1.0) == "improved"
        assert stopper.update(1.5) == "stop"
        assert stopper.best_index == 1
        assert stopper.best == 1.0

    def test_waits_until_patience_exhausted(self):
        stopper = EarlyStopper(patience=3)
        assert stopper.update(2.0) == "improved"
        assert stopper.update(2.1) == "wait"
        assert stopper.update(2.2) == "wait"
        assert stopper.update(1.9) == "improved"
        assert stopper.update(2.0) == "wait"
        assert stopper.update(2.0) == "wait"
        assert stopper.update(2.0) == "stop"
        assert stopper.best_index == 4

    def test_patience_validated(self):
        with pytest.raises(ValueError):
            EarlyStopper(0)


class TestTrainLoop:
    def test_deterministic_loss_trace(self):
        tr, va, cfg, prov = micro_setup()
        tc = TrainConfig(batch_size=6, lr=1e-3, max_epochs=3, patience=30, seed=11)
        _, hist_a = train(tr, va, cfg, tc, prov)
        _, hist_b = train(tr, va, cfg, tc, prov)
        assert hist_a == hist_b

    def test_untrained_loss_near_uniform(self):
        tr, va, cfg, prov = micro_setup()
        tc = TrainConfig(batch_size=6, lr=1e-9, max_epochs=1, patience=5, seed=0)
        _, hist = train(tr, va, cfg, tc, prov)
        assert abs(hist[0]["val_loss"] - math.log(4099)) <= 0.2

    def test_best_checkpoint_not_worse_than_any_epoch(self):
        tr, va, cfg, prov = micro_setup()
        tc = TrainConfig(batch_size=6, lr=3e-3, max_epochs=6, patience=2, seed=1)
        ckpt, hist = train(tr, va, cfg, tc, prov)
        assert ckpt.best_val_loss == min(h["val_loss"] for h in hist)
        assert hist[ckpt.epoch - 1]["val_loss"] == ckpt.best_val_loss

    def test_one_step_changes_params_with_gradient(self):
        tr, va, cfg, prov = micro_setup()
        params = init(cfg, seed=0)
        seqs = [corpus.build_sequence(d) for d in tr[:4]]
        masked = [corpus.apply_mask(s, 0.4, 0.5, seed=i)[0] for i, s in enumerate(seqs)]
        ctxs = [embed_phrases(d.phrases, prov) for d in tr[:4]]
        batch = collate(masked, ctxs, cfg)
        before = {n: t.data.copy() for n, t in params.named_parameters()}
        opt = nn.Adam(params.parameters(), lr=1e-3)
        loss = M.loss_on_batch(params, cfg, batch, train=False)
        opt.zero_grad()
        loss.backward()
        opt.step()
        for name, t in params.named_parameters():
            if t.grad is not None and np.any(t.grad != 0):
                assert not np.array_equal(before[name], t.data), name

    def test_empty_corpus_rejected(self):
        tr, va, cfg, prov = micro_setup()
        tc = TrainConfig(max_epochs=1)
        with pytest.raises(ValueError):
            train([], va, cfg, tc, prov)

    def test_mode_length_mismatch_rejected(self):
        tr, va, cfg, prov = micro_setup()
        tc = TrainConfig(max_epochs=1, mode="pat")
        with pytest.raises(ValueError):
            train(tr, va, cfg, tc, prov)

    def test_config_invariants(self):
        with pytest.raises(ValueError):
            TrainConfig(masking_rate=0.0)
        with pytest.raises(ValueError):
            TrainConfig(masked_token_rate=-0.1)
        with pytest.raises(ValueError):
            TrainConfig(patience=0)


class TestCheckpointIO:
    def _small_ckpt(self):
        tr, va, cfg, prov = micro_setup()
        tc = TrainConfig(batch_size=6, lr=1e-3, max_epochs=2, patience=5, seed=3)
        ckpt, _ = train(tr, va, cfg, tc, prov)
        return ckpt, tr, prov, cfg

    def test_round_trip_bit_identical_forward(self, tmp_path):
        ckpt, tr, prov, cfg = self._small_ckpt()
        seq = corpus.build_sequence(tr[0])
        ctx = embed_phrases(tr[0].phrases, prov)
        batch = collate([seq], [ctx], cfg)
        before = forward(ckpt.params, cfg, batch).data

        path = tmp_path / "model.pmuse"
        save_checkpoint(ckpt, path)
        loaded = load_checkpoint(path)
        after = forward(loaded.params, loaded.model_config, batch).data
        assert np.array_equal(before, after)
        assert loaded.epoch == ckpt.epoch
        assert loaded.best_val_loss == pytest.approx(ckpt.best_val_loss)
        assert loaded.mode == ckpt.mode
        assert loaded.adam_state["step"] == ckpt.adam_state["step"]

    def test_truncated_file_fails_checksum(self, tmp_path):
        ckpt, *_ = self._small_ckpt()
        path = tmp_path / "model.pmuse"
        save_checkpoint(ckpt, path)
        raw = path.read_bytes()
        path.write_bytes(raw[: len(raw) // 2])
        with pytest.raises(CheckpointError, match="[Cc]hecksum|CRC"):
            load_checkpoint(path)

    def test_wrong_version_byte(self, tmp_path):
        ckpt, *_ = self._small_ckpt()
        path = tmp_path / "model.pmuse"
        save_checkpoint(ckpt, path)
        raw = bytearray(path.read_bytes())
        raw[5] = 99
        path.write_bytes(bytes(raw))
        with pytest.raises(CheckpointError, match="version"):
            load_checkpoint(path)

    def test_flipped_blob_byte_fails_checksum(self, tmp_path):
        ckpt, *_ = self._small_ckpt()
        path = tmp_path / "model.pmuse"
        save_checkpoint(ckpt, path)
        raw = bytearray(path.read_bytes())
        raw[-100] ^= 0xFF
        path.write_bytes(bytes(raw))
        with pytest.raises(CheckpointError, match="[Cc]hecksum|CRC"):
            load_checkpoint(path)

    def test_not_a_checkpoint(self, tmp_path):
        path = tmp_path / "junk.bin"
        path.write_bytes(b"hello world, definitely not a checkpoint")
        with pytest.raises(CheckpointError, match="magic"):
            load_checkpoint(path)


def five_color_corpus(n):
    from pmuse.colors import Palette
    hexes = ["#000000", "#333333", "#777777", "#bbbbbb", "#ffffff"]
    return [
        corpus.DocumentSample(
            f"doc-{i}", {"graphic": Palette.from_hexes("graphic", hexes)},
            [corpus.Phrase(f"word{i % 4}")])
        for i in range(n)
    ]


class TestMaskingSweep:
    def test_table_shape(self):
        _, _, cfg, prov = micro_setup()
        tr, va = five_color_corpus(12), five_color_corpus(6)
        tc = TrainConfig(batch_size=6, lr=1e-3, max_epochs=2, patience=5, seed=0)
        table = masking_sweep(tr, va, [0.15, 0.4], cfg, tc, prov)
        assert set(table.keys()) == {0.15, 0.4}
        for row in table.values():
            assert set(row.keys()) == {1, 2, 3}
            for acc in row.values():
                assert 0.0 <= acc <= 1.0

    def test_empty_rates_rejected(self):
        tr, va, cfg, prov = micro_setup()
        tc = TrainConfig(max_epochs=1)
        with pytest.raises(ValueError):
            masking_sweep(tr, va, [], cfg, tc, prov)
