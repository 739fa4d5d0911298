"""User-facing tasks on a trained checkpoint: palette completion and full
palette generation with duplicate-eliminating post-processing."""

from __future__ import annotations

from dataclasses import dataclass

from . import colors, corpus, model as model_mod
from .corpus import DocumentSample, SLOTS_PER_BLOCK
from .text_embed import TextContext, HashEmbedder, embed_phrases
from .train import Checkpoint


@dataclass
class Recommendation:
    """Candidate colors for one masked sequence position, best first."""

    position: int
    candidates: list[tuple[int, float]]


@dataclass
class GeneratedPalette:
    """Generation output: slot-order codes plus the lightness-ordered view."""

    slots: list[int]

    @property
    def codes(self) -> list[int]:
        return colors.order_palette(self.slots)

    @property
    def hexes(self) -> list[str]:
        return [colors.code_to_hex(c) for c in self.codes]


def _default_provider(ckpt: Checkpoint) -> HashEmbedder:
    return HashEmbedder(dim=ckpt.model_config.text_dim)


def context_for(ckpt: Checkpoint, doc_phrases, provider=None) -> TextContext:
    return embed_phrases(list(doc_phrases), provider or _default_provider(ckpt))


def complete(ckpt: Checkpoint, doc: DocumentSample, positions: list[int],
             text: TextContext | None = None, k: int = 5, provider=None) -> list[Recommendation]:
    """Mask the given positions of a document and rank replacement colors."""
    if not positions:
        raise ValueError("completion needs at least one position to mask")
    seq = corpus.build_sequence(doc, ckpt.mode)
    masked = corpus.mask_exact(seq, positions)
    ctx = text if text is not None else context_for(ckpt, doc.phrases, provider)
    preds = model_mod.predict_masked(ckpt.params, ckpt.model_config, masked, ctx, k=k)
    return [Recommendation(pos, cands) for pos, cands in preds]


def predict_slots(ckpt: Checkpoint, slots: dict[str, list[int | None]],
                  ctx: TextContext, k: int = 5) -> list[Recommendation]:
    """Completion for explicitly slotted palettes (None marks a masked slot)."""
    seq = corpus.sequence_from_slots(slots, ckpt.mode)
    preds = model_mod.predict_masked(ckpt.params, ckpt.model_config, seq, ctx, k=k)
    return [Recommendation(pos, cands) for pos, cands in preds]


def generate(ckpt: Checkpoint, phrases, length: int = 5, post_process: bool = True,
             text: TextContext | None = None, provider=None) -> GeneratedPalette:
    """Generate a palette from text alone (PAT-mode models).

    Without post-processing each slot takes its argmax color. With it, a slot
    whose argmax was already used falls through to the next-highest-probability
    color until an unused one is found.
    """
    if ckpt.mode != "pat":
        raise ValueError("full palette generation needs a PAT-mode checkpoint")
    if not 1 <= length <= SLOTS_PER_BLOCK:
        raise ValueError(f"palette length {length} outside [1,{SLOTS_PER_BLOCK}]")
    ctx = text if text is not None else context_for(ckpt, phrases, provider)
    seq = corpus.sequence_from_slots({"graphic": [None] * length}, mode="pat")
    preds = model_mod.predict_masked(ckpt.params, ckpt.model_config, seq, ctx,
                                     k=length if post_process else 1)
    chosen: list[int] = []
    for _, candidates in preds:
        if post_process:
            pick = next(code for code, _ in candidates if code not in chosen)
        else:
            pick = candidates[0][0]
        chosen.append(pick)
    return GeneratedPalette(chosen)
