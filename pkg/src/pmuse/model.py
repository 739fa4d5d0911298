"""The multimodal masked color model: summed token/segment/position embeddings,
a self-attention stack over the color sequence, one cross-attention block with
text keys, one multi-cross-attention block whose keys concatenate the previous
output with the text rows, and a vocabulary head.

All attention/feed-forward parameters are created regardless of the enable
flags, so toggling a block off leaves every other parameter bit-identical for
ablation comparisons.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from . import nn
from .corpus import MASK_ID, PAD_ID, IGNORE_LABEL, VOCAB_SIZE, NUM_SPECIALS, TokenSequence
from .text_embed import TextContext
from .nn import AttentionParams, Tensor


@dataclass
class ModelConfig:
    d: int = 512
    self_layers: int = 3
    self_heads: int = 8
    cross_heads: int = 1
    vocab: int = VOCAB_SIZE
    max_len: int = 18
    max_phrases: int = 10
    text_dim: int = 512
    dropout: float = 0.1
    ffw_enabled: bool = True
    cross_ffw_enabled: bool = False
    ca_enabled: bool = True
    mca_enabled: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.d % self.self_heads != 0 or self.d % self.cross_heads != 0:
            raise ValueError(f"width {self.d} must divide by both head counts "
                             f"({self.self_heads}, {self.cross_heads})")
        if self.vocab < VOCAB_SIZE:
            raise ValueError(f"vocab {self.vocab} below required {VOCAB_SIZE}")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"dropout {self.dropout} outside [0,1)")
        if self.self_layers < 1 or self.max_len < 1 or self.text_dim < 1:
            raise ValueError("self_layers, max_len and text_dim must be positive")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)


@dataclass
class SelfBlockParams:
    attn: AttentionParams
    ln1_g: Tensor
    ln1_b: Tensor
    ffw_w1: Tensor
    ffw_b1: Tensor
    ffw_w2: Tensor
    ffw_b2: Tensor
    ln2_g: Tensor
    ln2_b: Tensor

    def tensors(self) -> list[tuple[str, Tensor]]:
        out = [(f"attn.{n}", t) for n, t in self.attn.tensors()]
        out += [("ln1_g", self.ln1_g), ("ln1_b", self.ln1_b),
                ("ffw_w1", self.ffw_w1), ("ffw_b1", self.ffw_b1),
                ("ffw_w2", self.ffw_w2), ("ffw_b2", self.ffw_b2),
                ("ln2_g", self.ln2_g), ("ln2_b", self.ln2_b)]
        return out


@dataclass
class CrossBlockParams:
    attn: AttentionParams
    ln_g: Tensor
    ln_b: Tensor
    ffw_w1: Tensor
    ffw_b1: Tensor
    ffw_w2: Tensor
    ffw_b2: Tensor
    ln2_g: Tensor
    ln2_b: Tensor

    def tensors(self) -> list[tuple[str, Tensor]]:
        out = [(f"attn.{n}", t) for n, t in self.attn.tensors()]
        out += [("ln_g", self.ln_g), ("ln_b", self.ln_b),
                ("ffw_w1", self.ffw_w1), ("ffw_b1", self.ffw_b1),
                ("ffw_w2", self.ffw_w2), ("ffw_b2", self.ffw_b2),
                ("ln2_g", self.ln2_g), ("ln2_b", self.ln2_b)]
        return out


@dataclass
class ModelParams:
    token_table: Tensor
    segment_table: Tensor
    position_table: Tensor
    text_proj: Tensor
    self_blocks: list[SelfBlockParams]
    ca: CrossBlockParams
    mca: CrossBlockParams
    head_w: Tensor
    head_b: Tensor

    def named_parameters(self) -> list[tuple[str, Tensor]]:
        out = [("token_table", self.token_table), ("segment_table", self.segment_table),
               ("position_table", self.position_table), ("text_proj", self.text_proj)]
        for i, blk in enumerate(self.self_blocks):
            out += [(f"self.{i}.{n}", t) for n, t in blk.tensors()]
        out += [(f"ca.{n}", t) for n, t in self.ca.tensors()]
        out += [(f"mca.{n}", t) for n, t in self.mca.tensors()]
        out += [("head_w", self.head_w), ("head_b", self.head_b)]
        return out

    def parameters(self) -> list[Tensor]:
        return [t for _, t in self.named_parameters()]


def trunc_normal(rng: np.random.Generator, shape, std: float = 0.02, dtype=np.float32) -> np.ndarray:
    """Normal(0, std) resampled until every value lies within 2 std."""
    out = rng.standard_normal(shape) * std
    bad = np.abs(out) > 2.0 * std
    while bad.any():
        out[bad] = rng.standard_normal(int(bad.sum())) * std
        bad = np.abs(out) > 2.0 * std
    return out.astype(dtype)


def init(config: ModelConfig, seed: int | None = None, dtype=np.float32) -> ModelParams:
    rng = np.random.Generator(np.random.PCG64(config.seed if seed is None else seed))

    def weight(*shape) -> Tensor:
        return Tensor(trunc_normal(rng, shape, dtype=dtype), requires_grad=True)

    def zeros(*shape) -> Tensor:
        return Tensor(np.zeros(shape, dtype=dtype), requires_grad=True)

    def ones(*shape) -> Tensor:
        return Tensor(np.ones(shape, dtype=dtype), requires_grad=True)

    d = config.d

    def attn_params(heads: int) -> AttentionParams:
        return AttentionParams(weight(d, d), zeros(d), weight(d, d), zeros(d),
                               weight(d, d), zeros(d), weight(d, d), zeros(d),
                               heads=heads, width=d)

    def self_block() -> SelfBlockParams:
        return SelfBlockParams(attn_params(config.self_heads), ones(d), zeros(d),
                               weight(d, 4 * d), zeros(4 * d), weight(4 * d, d), zeros(d),
                               ones(d), zeros(d))

    def cross_block() -> CrossBlockParams:
        return CrossBlockParams(attn_params(config.cross_heads), ones(d), zeros(d),
                                weight(d, 4 * d), zeros(4 * d), weight(4 * d, d), zeros(d),
                                ones(d), zeros(d))

    return ModelParams(
        token_table=weight(config.vocab, d),
        segment_table=weight(4, d),
        position_table=weight(config.max_len, d),
        text_proj=weight(config.text_dim, d),
        self_blocks=[self_block() for _ in range(config.self_layers)],
        ca=cross_block(),
        mca=cross_block(),
        head_w=weight(d, config.vocab),
        head_b=zeros(config.vocab),
    )


@dataclass
class Batch:
    tokens: np.ndarray
    segments: np.ndarray
    positions: np.ndarray
    seq_valid: np.ndarray
    labels: np.ndarray
    text: np.ndarray
    text_valid: np.ndarray

    @property
    def size(self) -> int:
        return self.tokens.shape[0]


def collate(seqs: list[TokenSequence], contexts: list[TextContext], config: ModelConfig) -> Batch:
    if len(seqs) != len(contexts) or not seqs:
        raise ValueError("collate needs one text context per sequence")
    for s in seqs:
        if len(s.tokens) != config.max_len:
            raise ValueError(f"sequence length {len(s.tokens)} != model max_len {config.max_len}")
    for c in contexts:
        if c.dim != config.text_dim:
            raise ValueError(f"text context dim {c.dim} != model text_dim {config.text_dim}")
    tokens = np.array([s.tokens for s in seqs], dtype=np.int64)
    return Batch(
        tokens=tokens,
        segments=np.array([s.segments for s in seqs], dtype=np.int64),
        positions=np.array([s.positions for s in seqs], dtype=np.int64),
        seq_valid=tokens != PAD_ID,
        labels=np.array([s.labels for s in seqs], dtype=np.int64),
        text=np.stack([c.matrix for c in contexts]).astype(np.float32),
        text_valid=np.stack([c.valid for c in contexts]),
    )


def _per_sample_select(updated: Tensor, original: Tensor, use_updated: np.ndarray) -> Tensor:
    """Per-sample switch between two (B,L,d) activations, differentiable."""
    sel = use_updated.astype(updated.dtype).reshape(-1, 1, 1)
    return nn.add(nn.mul(updated, Tensor(sel)), nn.mul(original, Tensor(1.0 - sel)))


def forward(params: ModelParams, config: ModelConfig, batch: Batch,
            train: bool = False, rng: np.random.Generator | None = None) -> Tensor:
    """Token logits of shape (B, L, vocab)."""
    p = config.dropout

    def drop(t: Tensor) -> Tensor:
        return nn.dropout(t, p, rng, train)

    x = nn.add(nn.add(nn.embedding(params.token_table, batch.tokens),
                      nn.embedding(params.segment_table, batch.segments)),
               nn.embedding(params.position_table, batch.positions))

    for blk in params.self_blocks:
        a = nn.attention(x, x, batch.seq_valid, blk.attn)
        x = nn.layer_norm(nn.add(x, drop(a)), blk.ln1_g, blk.ln1_b)
        if config.ffw_enabled:
            f = nn.linear(nn.gelu(nn.linear(x, blk.ffw_w1, blk.ffw_b1)), blk.ffw_w2, blk.ffw_b2)
            x = nn.layer_norm(nn.add(x, drop(f)), blk.ln2_g, blk.ln2_b)

    has_text = batch.text_valid.any(axis=1)
    if has_text.any() and (config.ca_enabled or config.mca_enabled):
        t_proj = nn.matmul(Tensor(batch.text), params.text_proj)

        def cross(blk: CrossBlockParams, q: Tensor, kv: Tensor, kv_valid: np.ndarray) -> Tensor:
            a = nn.attention(q, kv, kv_valid, blk.attn, warn_dead_rows=False)
            y = nn.layer_norm(nn.add(q, drop(a)), blk.ln_g, blk.ln_b)
            if config.cross_ffw_enabled:
                f = nn.linear(nn.gelu(nn.linear(y, blk.ffw_w1, blk.ffw_b1)), blk.ffw_w2, blk.ffw_b2)
                y = nn.layer_norm(nn.add(y, drop(f)), blk.ln2_g, blk.ln2_b)
            return y

        if config.ca_enabled:
            y = cross(params.ca, x, t_proj, batch.text_valid)
            x = _per_sample_select(y, x, has_text)
        if config.mca_enabled:
            kv = nn.concat([x, t_proj], axis=1)
            kv_valid = np.concatenate([batch.seq_valid, batch.text_valid], axis=1)
            y = cross(params.mca, x, kv, kv_valid)
            x = _per_sample_select(y, x, has_text)

    return nn.linear(x, params.head_w, params.head_b)


def loss_on_batch(params: ModelParams, config: ModelConfig, batch: Batch,
                  train: bool = False, rng: np.random.Generator | None = None) -> Tensor:
    logits = forward(params, config, batch, train=train, rng=rng)
    return nn.cross_entropy(logits, batch.labels, ignore_index=IGNORE_LABEL)


def color_distribution(logits_row: np.ndarray) -> np.ndarray:
    """Probabilities over the 4096 color codes with specials excluded."""
    row = logits_row.astype(np.float64).copy()
    row[:NUM_SPECIALS] = -np.inf
    row -= row.max()
    e = np.exp(row)
    probs = e / e.sum()
    return probs[NUM_SPECIALS:]


def top_k_colors(probs: np.ndarray, k: int) -> list[tuple[int, float]]:
    """Descending by probability, ties broken by the smaller code."""
    k = min(k, probs.shape[0])
    order = np.lexsort((np.arange(probs.shape[0]), -probs))
    return [(int(c), float(probs[c])) for c in order[:k]]


def predict_masked(params: ModelParams, config: ModelConfig, seq: TokenSequence,
                   ctx: TextContext, k: int = 5) -> list[tuple[int, list[tuple[int, float]]]]:
    """Top-k (color code, probability) for every [MASK] position in the sequence."""
    mask_positions = [i for i, t in enumerate(seq.tokens) if t == MASK_ID]
    if not mask_positions:
        raise ValueError("sequence has no [MASK] position to predict")
    batch = collate([seq], [ctx], config)
    with nn.no_grad():
        logits = forward(params, config, batch, train=False)
    out = []
    for pos in mask_positions:
        probs = color_distribution(logits.data[0, pos])
        out.append((pos, top_k_colors(probs, k)))
    return out
