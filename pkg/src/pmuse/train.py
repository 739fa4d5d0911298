"""Mini-batch training with dynamic masking, early stopping on validation loss,
checkpoint persistence, and the masking-rate sweep harness.

Checkpoint file layout: magic "PMUSE", u32 version, u32 header length, JSON
header (configs, tensor directory with name/shape/offset), raw little-endian
float32 blobs, trailing CRC32 over everything before it.
"""

from __future__ import annotations

import dataclasses
import json
import os
import zlib
from dataclasses import dataclass

import numpy as np

from . import corpus as corpus_mod
from . import model as model_mod
from . import nn
from .corpus import CRELLO_LEN, PAT_LEN, IGNORE_LABEL, MASK_ID, NUM_SPECIALS, DocumentSample
from .model import Batch, ModelConfig, ModelParams, collate, init
from .text_embed import TextContext, embed_phrases

MAGIC = b"PMUSE"
VERSION = 1


class CheckpointError(Exception):
    """Unreadable or corrupt checkpoint file."""


@dataclass
class TrainConfig:
    masking_rate: float = 0.4
    masked_token_rate: float = 0.5
    batch_size: int = 32
    lr: float = 1e-4
    max_epochs: int = 300
    patience: int = 30
    seed: int = 0
    mode: str = "crello"
    random_token_rate: float = 0.0
    include_kept_in_loss: bool = True

    def __post_init__(self):
        if not 0.0 < self.masking_rate <= 1.0:
            raise ValueError(f"masking_rate {self.masking_rate} outside (0,1]")
        if not 0.0 <= self.masked_token_rate <= 1.0:
            raise ValueError(f"masked_token_rate {self.masked_token_rate} outside [0,1]")
        if self.patience < 1 or self.batch_size < 1 or self.max_epochs < 1:
            raise ValueError("patience, batch_size and max_epochs must be >= 1")
        if self.mode not in corpus_mod.MODES:
            raise ValueError(f"unknown mode {self.mode!r}")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        return cls(**d)


@dataclass
class Checkpoint:
    model_config: ModelConfig
    params: ModelParams
    mode: str = "crello"
    train_config: TrainConfig | None = None
    epoch: int = 0
    best_val_loss: float = float("inf")
    rng_state: dict | None = None
    adam_state: dict | None = None  # {"step": int, "m": {name: arr}, "v": {name: arr}}


class EarlyStopper:
    """Stop after `patience` updates without improvement of the tracked loss."""

    def __init__(self, patience: int):
        if patience < 1:
            raise ValueError("patience must be >= 1")
        self.patience = patience
        self.best = float("inf")
        self.best_index = -1
        self.waited = 0
        self.count = 0

    def update(self, loss: float) -> str:
        """Returns 'improved', 'wait', or 'stop'."""
        self.count += 1
        if loss < self.best:
            self.best = loss
            self.best_index = self.count
            self.waited = 0
            return "improved"
        self.waited += 1
        return "stop" if self.waited >= self.patience else "wait"


def _derive_seed(*parts: int) -> int:
    return int(np.random.SeedSequence(list(parts)).generate_state(1)[0])


def _expected_len(mode: str) -> int:
    return CRELLO_LEN if mode == "crello" else PAT_LEN


def _contexts(docs: list[DocumentSample], provider) -> list[TextContext]:
    return [embed_phrases(d.phrases, provider) for d in docs]


def _masked_accuracy(logits: np.ndarray, batch: Batch) -> tuple[int, int, int, int]:
    """(correct_replaced, n_replaced, correct_selected, n_selected) for one batch."""
    pred = logits[:, :, NUM_SPECIALS:].argmax(axis=-1) + NUM_SPECIALS
    selected = batch.labels != IGNORE_LABEL
    replaced = selected & (batch.tokens == MASK_ID)
    hits = pred == batch.labels
    return (int(hits[replaced].sum()), int(replaced.sum()),
            int(hits[selected].sum()), int(selected.sum()))


def train(corpus_train: list[DocumentSample], corpus_val: list[DocumentSample],
          model_config: ModelConfig, train_config: TrainConfig, provider,
          log=None) -> tuple[Checkpoint, list[dict]]:
    """Train with per-epoch fresh mask plans; return the best checkpoint and the
    per-epoch metrics log."""
    if not corpus_train or not corpus_val:
        raise ValueError("training and validation corpora must be non-empty")
    mode = train_config.mode
    if model_config.max_len != _expected_len(mode):
        raise ValueError(f"model max_len {model_config.max_len} does not match mode {mode!r}")
    if model_config.text_dim != provider.dim:
        raise ValueError(f"model text_dim {model_config.text_dim} != provider dim {provider.dim}")

    train_seqs = [corpus_mod.build_sequence(d, mode) for d in corpus_train]
    val_seqs = [corpus_mod.build_sequence(d, mode) for d in corpus_val]
    train_ctx = _contexts(corpus_train, provider)
    val_ctx = _contexts(corpus_val, provider)

    seed = train_config.seed
    params = init(model_config, seed=seed)
    optimizer = nn.Adam(params.parameters(), lr=train_config.lr)
    shuffle_rng = np.random.Generator(np.random.PCG64(_derive_seed(seed, 2, 0)))
    dropout_rng = np.random.Generator(np.random.PCG64(_derive_seed(seed, 3, 0)))

    # validation masks stay fixed across epochs so the early-stopping signal is stable
    val_masked = [corpus_mod.apply_mask(s, train_config.masking_rate, train_config.masked_token_rate,
                                        _derive_seed(seed, 0, i),
                                        train_config.random_token_rate,
                                        train_config.include_kept_in_loss)[0]
                  for i, s in enumerate(val_seqs)]

    def eval_val() -> tuple[float, float, float]:
        losses, nsel = [], []
        cr = nr = cs = ns = 0
        with nn.no_grad():
            for lo in range(0, len(val_masked), 64):
                batch = collate(val_masked[lo:lo + 64], val_ctx[lo:lo + 64], model_config)
                logits = model_mod.forward(params, model_config, batch, train=False)
                loss = nn.cross_entropy(logits, batch.labels, ignore_index=IGNORE_LABEL)
                n = int((batch.labels != IGNORE_LABEL).sum())
                losses.append(loss.item() * n)
                nsel.append(n)
                a, b, c, d = _masked_accuracy(logits.data, batch)
                cr, nr, cs, ns = cr + a, nr + b, cs + c, ns + d
        val_loss = float(np.sum(losses) / np.sum(nsel))
        return val_loss, (cr / nr if nr else float("nan")), (cs / ns if ns else float("nan"))

    stopper = EarlyStopper(train_config.patience)
    history: list[dict] = []
    best: dict | None = None
    n_train = len(train_seqs)

    for epoch in range(1, train_config.max_epochs + 1):
        order = shuffle_rng.permutation(n_train)
        epoch_losses = []
        for lo in range(0, n_train, train_config.batch_size):
            idxs = order[lo:lo + train_config.batch_size]
            masked = [corpus_mod.apply_mask(train_seqs[i], train_config.masking_rate,
                                            train_config.masked_token_rate,
                                            _derive_seed(seed, 1 + epoch, int(i)),
                                            train_config.random_token_rate,
                                            train_config.include_kept_in_loss)[0]
                      for i in idxs]
            batch = collate(masked, [train_ctx[i] for i in idxs], model_config)
            loss = model_mod.loss_on_batch(params, model_config, batch, train=True, rng=dropout_rng)
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            epoch_losses.append(loss.item())

        val_loss, acc_replaced, acc_selected = eval_val()
        row = {"epoch": epoch, "train_loss": float(np.mean(epoch_losses)), "val_loss": val_loss,
               "val_acc_masked": acc_replaced, "val_acc_selected": acc_selected}
        history.append(row)
        if log:
            log(row)

        verdict = stopper.update(val_loss)
        if verdict == "improved":
            best = {
                "epoch": epoch,
                "val_loss": val_loss,
                "arrays": {name: t.data.copy() for name, t in params.named_parameters()},
                "adam": {"step": optimizer.step_count,
                         "m": {name: m.copy() for (name, _), m in
                               zip(params.named_parameters(), optimizer.m)},
                         "v": {name: v.copy() for (name, _), v in
                               zip(params.named_parameters(), optimizer.v)}},
                "rng_state": dropout_rng.bit_generator.state,
            }
        if verdict == "stop":
            break

    assert best is not None  # first epoch always improves on +inf
    return Checkpoint(
        model_config=model_config,
        params=materialize_params(model_config, best["arrays"]),
        mode=mode,
        train_config=train_config,
        epoch=best["epoch"],
        best_val_loss=best["val_loss"],
        rng_state=best["rng_state"],
        adam_state=best["adam"],
    ), history


def materialize_params(config: ModelConfig, arrays: dict[str, np.ndarray]) -> ModelParams:
    """Build a ModelParams tree whose tensors hold the given arrays."""
    params = init(config, seed=0)
    for name, tensor in params.named_parameters():
        if name not in arrays:
            raise CheckpointError(f"missing tensor {name!r}")
        arr = np.asarray(arrays[name])
        if tuple(arr.shape) != tensor.data.shape:
            raise CheckpointError(f"tensor {name!r} has shape {arr.shape}, expected {tensor.data.shape}")
        tensor.data = arr.astype(np.float32, copy=True)
    return params


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    entries: list[tuple[str, np.ndarray]] = [(n, t.data) for n, t in ckpt.params.named_parameters()]
    if ckpt.adam_state is not None:
        entries += [(f"adam.m.{n}", a) for n, a in ckpt.adam_state["m"].items()]
        entries += [(f"adam.v.{n}", a) for n, a in ckpt.adam_state["v"].items()]

    directory = []
    blobs = []
    offset = 0
    for name, arr in entries:
        raw = np.ascontiguousarray(arr, dtype="<f4").tobytes()
        directory.append({"name": name, "shape": list(arr.shape), "offset": offset})
        blobs.append(raw)
        offset += len(raw)

    header = {
        "model_config": ckpt.model_config.to_dict(),
        "train_config": ckpt.train_config.to_dict() if ckpt.train_config else None,
        "mode": ckpt.mode,
        "epoch": ckpt.epoch,
        "best_val_loss": ckpt.best_val_loss,
        "rng_state": ckpt.rng_state,
        "adam_step": ckpt.adam_state["step"] if ckpt.adam_state else None,
        "tensors": directory,
    }
    header_bytes = json.dumps(header).encode("utf-8")
    body = MAGIC
    body += VERSION.to_bytes(4, "little")
    body += len(header_bytes).to_bytes(4, "little")
    body += header_bytes
    body += b"".join(blobs)
    body += (zlib.crc32(body) & 0xFFFFFFFF).to_bytes(4, "little")

    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "wb") as fh:
        fh.write(body)
    os.replace(tmp, path)


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < len(MAGIC) + 12 or raw[:len(MAGIC)] != MAGIC:
        raise CheckpointError("not a PMUSE checkpoint (bad magic)")
    version = int.from_bytes(raw[5:9], "little")
    if version != VERSION:
        raise CheckpointError(f"version mismatch: file has {version}, supported {VERSION}")
    crc_stored = int.from_bytes(raw[-4:], "little")
    if (zlib.crc32(raw[:-4]) & 0xFFFFFFFF) != crc_stored:
        raise CheckpointError("checksum failure: CRC32 does not match file contents")
    header_len = int.from_bytes(raw[9:13], "little")
    try:
        header = json.loads(raw[13:13 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"unreadable header: {exc}") from exc

    blob_start = 13 + header_len
    blob_region = raw[blob_start:-4]
    arrays: dict[str, np.ndarray] = {}
    for entry in header["tensors"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        start = entry["offset"]
        end = start + count * 4
        if end > len(blob_region):
            raise CheckpointError(f"truncated blob for tensor {entry['name']!r}")
        arrays[entry["name"]] = np.frombuffer(blob_region[start:end], dtype="<f4").reshape(shape).copy()

    model_config = ModelConfig.from_dict(header["model_config"])
    train_config = TrainConfig.from_dict(header["train_config"]) if header.get("train_config") else None
    param_arrays = {n: a for n, a in arrays.items() if not n.startswith("adam.")}
    params = materialize_params(model_config, param_arrays)

    adam_state = None
    if header.get("adam_step") is not None:
        adam_state = {
            "step": header["adam_step"],
            "m": {n[len("adam.m."):]: a for n, a in arrays.items() if n.startswith("adam.m.")},
            "v": {n[len("adam.v."):]: a for n, a in arrays.items() if n.startswith("adam.v.")},
        }
    return Checkpoint(model_config=model_config, params=params, mode=header["mode"],
                      train_config=train_config, epoch=header["epoch"],
                      best_val_loss=header["best_val_loss"], rng_state=header.get("rng_state"),
                      adam_state=adam_state)


def masking_sweep(corpus_train: list[DocumentSample], corpus_val: list[DocumentSample],
                  rates: list[float], model_config: ModelConfig, train_config: TrainConfig,
                  provider, mask_counts=(1, 2, 3), eval_seed: int = 0) -> dict[float, dict[int, float]]:
    """Train one model per masking rate and tabulate accuracy@1 per mask count."""
    from . import metrics

    if not rates:
        raise ValueError("masking_sweep needs at least one rate")
    table: dict[float, dict[int, float]] = {}
    for rate in rates:
        cfg = dataclasses.replace(train_config, masking_rate=rate)
        ckpt, _ = train(corpus_train, corpus_val, model_config, cfg, provider)
        table[rate] = {
            count: metrics.accuracy_at_1(ckpt, corpus_val, count, seed=eval_seed, provider=provider)
            for count in mask_counts
        }
    return table
