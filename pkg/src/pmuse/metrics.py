"""Evaluation metrics: accuracy@1 over masked positions, distribution@1
(Shannon entropy of correctly predicted codes), palette diversity, and the
symmetric closest-color palette similarity."""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import colors, corpus, model as model_mod, nn
from .corpus import DocumentSample, IGNORE_LABEL, NUM_SPECIALS
from .model import collate
from .text_embed import embed_phrases
from .train import Checkpoint


@dataclass
class EvalReport:
    mask_counts: list[int]
    accuracy_at_1: dict[int, float] = field(default_factory=dict)
    all_correct_at_1: dict[int, float] = field(default_factory=dict)
    distribution_at_1: dict[int, float] = field(default_factory=dict)
    sample_count: dict[int, int] = field(default_factory=dict)
    frequency_by_count: dict[int, dict[int, int]] = field(default_factory=dict)

    @property
    def frequency(self) -> dict[int, int]:
        merged: dict[int, int] = {}
        for table in self.frequency_by_count.values():
            for code, n in table.items():
                merged[code] = merged.get(code, 0) + n
        return merged

    def to_json(self) -> dict:
        return {
            "mask_counts": self.mask_counts,
            "accuracy_at_1": {str(k): v for k, v in self.accuracy_at_1.items()},
            "all_correct_at_1": {str(k): v for k, v in self.all_correct_at_1.items()},
            "distribution_at_1": {str(k): v for k, v in self.distribution_at_1.items()},
            "sample_count": {str(k): v for k, v in self.sample_count.items()},
        }


def distribution_at_1(frequency: dict[int, int]) -> float:
    """Shannon entropy (bits) of the empirical distribution of correct codes."""
    total = sum(frequency.values())
    if total == 0:
        warnings.warn("distribution@1 of an empty frequency table is defined as 0", RuntimeWarning)
        return 0.0
    return -sum((n / total) * math.log2(n / total) for n in frequency.values() if n > 0)


def diversity(palette: list[int]) -> float:
    """Mean pairwise CIELAB distance among a palette's five colors."""
    if len(palette) != 5:
        raise ValueError(f"diversity is defined over exactly 5 colors, got {len(palette)}")
    dists = [colors.lab_distance(palette[i], palette[j])
             for i in range(5) for j in range(i + 1, 5)]
    return float(np.mean(dists))


def palette_similarity(p: list[int], q: list[int]) -> float:
    """Symmetric mean closest-color distance between two palettes (0 iff the
    code sets coincide); stands in for dynamic closest color warping."""
    if not p or not q:
        raise ValueError("palette similarity needs non-empty palettes")
    forward = sum(min(colors.lab_distance(a, b) for b in q) for a in p)
    backward = sum(min(colors.lab_distance(b, a) for a in p) for b in q)
    return (forward + backward) / (len(p) + len(q))


def evaluate(ckpt: Checkpoint, docs: list[DocumentSample], mask_counts=(1, 2, 3),
             seed: int = 0, provider=None, batch_size: int = 64) -> EvalReport:
    """Mask a fixed number of colors per qualifying document (seeded) and score
    argmax predictions against the ground truth."""
    from .inference import _default_provider

    provider = provider or _default_provider(ckpt)
    report = EvalReport(mask_counts=list(mask_counts))
    contexts = {id(d): embed_phrases(d.phrases, provider) for d in docs}
    sequences = {id(d): corpus.build_sequence(d, ckpt.mode) for d in docs}

    for count in mask_counts:
        qualifying = [d for d in docs if len(sequences[id(d)].eligible_positions()) >= count]
        if not qualifying:
            raise ValueError(f"no document has {count} eligible color positions")
        masked_seqs = []
        for i, d in enumerate(qualifying):
            rng = np.random.Generator(np.random.PCG64(
                int(np.random.SeedSequence([seed, count, i]).generate_state(1)[0])))
            eligible = sequences[id(d)].eligible_positions()
            picks = sorted(int(eligible[j]) for j in rng.choice(len(eligible), count, replace=False))
            masked_seqs.append(corpus.mask_exact(sequences[id(d)], picks))

        correct = total = 0
        docs_all_correct = 0
        freq: dict[int, int] = {}
        with nn.no_grad():
            for lo in range(0, len(masked_seqs), batch_size):
                chunk = masked_seqs[lo:lo + batch_size]
                ctxs = [contexts[id(d)] for d in qualifying[lo:lo + batch_size]]
                batch = collate(chunk, ctxs, ckpt.model_config)
                logits = model_mod.forward(ckpt.params, ckpt.model_config, batch, train=False)
                pred = logits.data[:, :, NUM_SPECIALS:].argmax(axis=-1) + NUM_SPECIALS
                sel = batch.labels != IGNORE_LABEL
                hits = (pred == batch.labels) & sel
                correct += int(hits.sum())
                total += int(sel.sum())
                docs_all_correct += int((hits.sum(axis=1) == sel.sum(axis=1)).sum())
                for tok in pred[hits]:
                    code = int(tok) - NUM_SPECIALS
                    freq[code] = freq.get(code, 0) + 1
        report.accuracy_at_1[count] = correct / total
        report.all_correct_at_1[count] = docs_all_correct / len(qualifying)
        report.distribution_at_1[count] = distribution_at_1(freq)
        report.sample_count[count] = total
        report.frequency_by_count[count] = freq
    return report


def accuracy_at_1(ckpt: Checkpoint, docs: list[DocumentSample], mask_count: int,
                  seed: int = 0, provider=None) -> float:
    report = evaluate(ckpt, docs, mask_counts=(mask_count,), seed=seed, provider=provider)
    return report.accuracy_at_1[mask_count]


def export_frequency_csv(report: EvalReport, path) -> None:
    """CSV of code, bin-center hex, correct-count (merged over mask counts)."""
    merged = report.frequency
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["code", "hex", "count"])
        for code in sorted(merged):
            writer.writerow([code, colors.code_to_hex(code), merged[code]])
