"""Dataset model: JSONL ingestion, k-means palette extraction, synthetic corpus
generation, and construction of the masked token sequences the model consumes.

Sequence layout (crello mode, length 18): three blocks in fixed order
image / graphic / text, each five color slots followed by one [SEP], with
segment ids 1/2/3 covering the whole block. PAT mode is a single length-6
block with segment 1.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import colors
from .colors import Palette, RgbColor

PAD_ID = 0
SEP_ID = 1
MASK_ID = 2
NUM_SPECIALS = 3
VOCAB_SIZE = colors.NUM_CODES + NUM_SPECIALS  # 4099
IGNORE_LABEL = -1

SLOTS_PER_BLOCK = 5
BLOCK_LEN = SLOTS_PER_BLOCK + 1
CRELLO_LEN = 3 * BLOCK_LEN
PAT_LEN = BLOCK_LEN
MAX_PHRASES = 10

MODES = ("crello", "pat")
PHRASE_KINDS = ("content", "label")


class CorpusError(Exception):
    """Raised for malformed corpus files or invalid documents."""


def code_to_token(code: int) -> int:
    return code + NUM_SPECIALS


def token_to_code(token: int) -> int:
    if token < NUM_SPECIALS:
        raise ValueError(f"token {token} is a special, not a color")
    return token - NUM_SPECIALS


@dataclass
class Phrase:
    text: str
    kind: str = "content"
    embedding: list[float] | None = None

    def __post_init__(self):
        if not isinstance(self.text, str) or not self.text.strip():
            raise CorpusError("phrase text must be a non-empty string")
        if self.kind not in PHRASE_KINDS:
            raise CorpusError(f"phrase kind {self.kind!r} not in {PHRASE_KINDS}")


@dataclass
class DocumentSample:
    id: str
    palettes: dict[str, Palette]
    phrases: list[Phrase] = field(default_factory=list)

    def __post_init__(self):
        for kind in self.palettes:
            if kind not in colors.PALETTE_KINDS:
                raise CorpusError(f"unknown palette kind {kind!r}")
        if len(self.phrases) > MAX_PHRASES:
            raise CorpusError(f"{len(self.phrases)} phrases, maximum is {MAX_PHRASES}")
        if not any(len(p) for p in self.palettes.values()):
            raise CorpusError("document needs at least one non-empty palette")

    def palette(self, kind: str) -> Palette:
        return self.palettes.get(kind) or Palette(kind, [], [])


@dataclass
class TokenSequence:
    tokens: list[int]
    segments: list[int]
    positions: list[int]
    color_mask: list[bool]
    labels: list[int]

    def eligible_positions(self) -> list[int]:
        return [i for i, m in enumerate(self.color_mask) if m]

    def copy(self) -> "TokenSequence":
        return TokenSequence(list(self.tokens), list(self.segments), list(self.positions),
                             list(self.color_mask), list(self.labels))


@dataclass
class MaskPlan:
    masking_rate: float
    masked_token_rate: float
    seed: int
    selected: list[int]
    replaced: list[int]


def validate_sequence(seq: TokenSequence, mode: str) -> None:
    length = CRELLO_LEN if mode == "crello" else PAT_LEN
    lists = (seq.tokens, seq.segments, seq.positions, seq.color_mask, seq.labels)
    if not all(len(x) == length for x in lists):
        raise CorpusError(f"sequence field lengths {[len(x) for x in lists]} != {length}")
    if seq.positions != list(range(length)):
        raise CorpusError("positions must be global 0..L-1")
    n_blocks = length // BLOCK_LEN
    for b in range(n_blocks):
        lo, hi = b * BLOCK_LEN, (b + 1) * BLOCK_LEN
        if seq.tokens[hi - 1] != SEP_ID:
            raise CorpusError(f"block {b} does not end in [SEP]")
        if SEP_ID in seq.tokens[lo:hi - 1]:
            raise CorpusError(f"stray [SEP] inside block {b}")
        seg = 1 if mode == "pat" else b + 1
        if any(s != seg for s in seq.segments[lo:hi]):
            raise CorpusError(f"block {b} segment ids are not uniformly {seg}")
    for i, (tok, eligible) in enumerate(zip(seq.tokens, seq.color_mask)):
        if not 0 <= tok < VOCAB_SIZE:
            raise CorpusError(f"token {tok} at {i} outside vocabulary")
        if eligible and tok in (PAD_ID, SEP_ID, MASK_ID):
            raise CorpusError(f"special token at {i} marked eligible for masking")


def _block(codes: list[int], segment: int) -> tuple[list[int], list[int], list[bool]]:
    toks = [code_to_token(c) for c in codes]
    toks += [PAD_ID] * (SLOTS_PER_BLOCK - len(codes))
    mask = [True] * len(codes) + [False] * (SLOTS_PER_BLOCK - len(codes))
    toks.append(SEP_ID)
    mask.append(False)
    return toks, [segment] * BLOCK_LEN, mask


def build_sequence(doc: DocumentSample, mode: str = "crello") -> TokenSequence:
    """Lay a document's palettes out as a fixed-length token sequence."""
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "crello":
        parts = [_block(doc.palette(kind).colors, seg)
                 for seg, kind in enumerate(colors.PALETTE_KINDS, start=1)]
    else:
        primary = next((doc.palette(k) for k in colors.PALETTE_KINDS if len(doc.palette(k))), None)
        parts = [_block(primary.colors if primary else [], 1)]
    tokens = [t for p in parts for t in p[0]]
    segments = [s for p in parts for s in p[1]]
    color_mask = [m for p in parts for m in p[2]]
    return TokenSequence(tokens, segments, list(range(len(tokens))), color_mask, list(tokens))


def sequence_from_slots(slots: dict[str, list[int | None]], mode: str = "crello") -> TokenSequence:
    """Sequence for a completion request: None entries become [MASK] slots.

    Slot order is preserved verbatim; nothing is re-sorted.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    kinds = colors.PALETTE_KINDS if mode == "crello" else colors.PALETTE_KINDS[:1]
    tokens: list[int] = []
    segments: list[int] = []
    color_mask: list[bool] = []
    labels: list[int] = []
    n_masked = 0
    for seg, kind in enumerate(kinds, start=1):
        entries = slots.get(kind, []) if mode == "crello" else next(
            (v for v in slots.values() if v), [])
        if len(entries) > SLOTS_PER_BLOCK:
            raise CorpusError(f"{kind} palette has {len(entries)} slots, maximum is {SLOTS_PER_BLOCK}")
        for entry in entries:
            if entry is None:
                tokens.append(MASK_ID)
                color_mask.append(False)
                n_masked += 1
            else:
                tokens.append(code_to_token(entry))
                color_mask.append(True)
        pad = SLOTS_PER_BLOCK - len(entries)
        tokens += [PAD_ID] * pad
        color_mask += [False] * pad
        tokens.append(SEP_ID)
        color_mask.append(False)
        segments += [seg] * BLOCK_LEN
    if n_masked == 0:
        raise CorpusError("completion request contains no masked slot")
    labels = [IGNORE_LABEL] * len(tokens)
    return TokenSequence(tokens, segments, list(range(len(tokens))), color_mask, labels)


def apply_mask(seq: TokenSequence, masking_rate: float, masked_token_rate: float, seed: int,
               random_token_rate: float = 0.0,
               include_kept_in_loss: bool = True) -> tuple[TokenSequence, MaskPlan]:
    """Randomly select color positions and apply the two-stage masking.

    Selection count is max(1, round(masking_rate * eligible)); each selected
    position becomes [MASK] with probability masked_token_rate and otherwise
    keeps its token (or, with random_token_rate, gets a random color token).
    Labels stay at selected positions and become the ignore marker elsewhere.
    """
    if not 0.0 < masking_rate <= 1.0:
        raise ValueError(f"masking_rate {masking_rate} outside (0,1]")
    if not 0.0 <= masked_token_rate <= 1.0:
        raise ValueError(f"masked_token_rate {masked_token_rate} outside [0,1]")
    eligible = seq.eligible_positions()
    if not eligible:
        raise ValueError("sequence has no eligible color positions")
    rng = np.random.Generator(np.random.PCG64(seed))
    n_select = max(1, round(masking_rate * len(eligible)))
    selected = sorted(int(i) for i in rng.choice(len(eligible), size=n_select, replace=False))
    selected = [eligible[i] for i in selected]

    out = seq.copy()
    replaced: list[int] = []
    for pos in selected:
        r = rng.random()
        if r < masked_token_rate:
            out.tokens[pos] = MASK_ID
            replaced.append(pos)
        elif r < masked_token_rate + random_token_rate:
            out.tokens[pos] = code_to_token(int(rng.integers(colors.NUM_CODES)))
    loss_positions = set(selected) if include_kept_in_loss else set(replaced)
    out.labels = [seq.tokens[i] if i in loss_positions else IGNORE_LABEL
                  for i in range(len(seq.tokens))]
    plan = MaskPlan(masking_rate, masked_token_rate, seed, selected, replaced)
    return out, plan


def mask_exact(seq: TokenSequence, positions: list[int]) -> TokenSequence:
    """Mask exactly the given positions; labels survive only there."""
    eligible = set(seq.eligible_positions())
    out = seq.copy()
    out.labels = [IGNORE_LABEL] * len(seq.tokens)
    for pos in positions:
        if pos not in eligible:
            raise ValueError(f"position {pos} is not an eligible color slot")
        out.tokens[pos] = MASK_ID
        out.labels[pos] = seq.tokens[pos]
    return out


def unmask(seq: TokenSequence) -> TokenSequence:
    """Restore masked tokens from labels (round-trip helper)."""
    out = seq.copy()
    for i, lab in enumerate(seq.labels):
        if lab != IGNORE_LABEL:
            out.tokens[i] = lab
    return out


# --- JSONL ingestion -------------------------------------------------------

def parse_document(obj: dict, where: str = "document") -> DocumentSample:
    if not isinstance(obj, dict):
        raise CorpusError(f"{where}: expected a JSON object")
    doc_id = obj.get("id")
    if not isinstance(doc_id, str) or not doc_id:
        raise CorpusError(f"{where}: missing or empty 'id'")
    palettes_obj = obj.get("palettes", {})
    if not isinstance(palettes_obj, dict):
        raise CorpusError(f"{where}: 'palettes' must be an object")
    palettes: dict[str, Palette] = {}
    for kind, hex_list in palettes_obj.items():
        if kind not in colors.PALETTE_KINDS:
            raise CorpusError(f"{where}: unknown palette kind {kind!r}")
        if not isinstance(hex_list, list):
            raise CorpusError(f"{where}: palette {kind} must be a list of hex strings")
        if len(hex_list) > 5:
            raise CorpusError(f"{where}: palette {kind} has {len(hex_list)} colors, maximum is 5")
        try:
            palettes[kind] = Palette.from_hexes(kind, hex_list)
        except ValueError as exc:
            raise CorpusError(f"{where}: palette {kind}: {exc}") from exc
    phrases_obj = obj.get("phrases", [])
    if not isinstance(phrases_obj, list):
        raise CorpusError(f"{where}: 'phrases' must be a list")
    if len(phrases_obj) > MAX_PHRASES:
        raise CorpusError(f"{where}: {len(phrases_obj)} phrases, maximum is {MAX_PHRASES}")
    phrases = []
    for i, p in enumerate(phrases_obj):
        if not isinstance(p, dict):
            raise CorpusError(f"{where}: phrase {i} must be an object")
        emb = p.get("embedding")
        if emb is not None and not (isinstance(emb, list) and all(isinstance(v, (int, float)) for v in emb)):
            raise CorpusError(f"{where}: phrase {i} embedding must be a list of numbers")
        try:
            phrases.append(Phrase(p.get("text", ""), p.get("kind", "content"),
                                  [float(v) for v in emb] if emb is not None else None))
        except CorpusError as exc:
            raise CorpusError(f"{where}: phrase {i}: {exc}") from exc
    try:
        return DocumentSample(doc_id, palettes, phrases)
    except CorpusError as exc:
        raise CorpusError(f"{where}: {exc}") from exc


def load_jsonl(path) -> list[DocumentSample]:
    """Load a corpus, reporting every invalid line with its line number."""
    docs: list[DocumentSample] = []
    errors: list[str] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                errors.append(f"line {lineno}: malformed JSON ({exc.msg})")
                continue
            try:
                docs.append(parse_document(obj, where=f"line {lineno}"))
            except CorpusError as exc:
                errors.append(str(exc))
    if errors:
        shown = "\n".join(errors[:20])
        more = f"\n... and {len(errors) - 20} more" if len(errors) > 20 else ""
        raise CorpusError(f"{len(errors)} invalid line(s) in {path}:\n{shown}{more}")
    return docs


def document_to_json(doc: DocumentSample) -> dict:
    out: dict = {"id": doc.id, "palettes": {}, "phrases": []}
    for kind in colors.PALETTE_KINDS:
        pal = doc.palettes.get(kind)
        if pal and len(pal):
            out["palettes"][kind] = list(pal.hexes)
    for p in doc.phrases:
        entry: dict = {"text": p.text, "kind": p.kind}
        if p.embedding is not None:
            entry["embedding"] = p.embedding
        out["phrases"].append(entry)
    return out


def save_jsonl(docs: list[DocumentSample], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for doc in docs:
            fh.write(json.dumps(document_to_json(doc)) + "\n")


# --- k-means palette extraction --------------------------------------------

def extract_palette(pixels: list[RgbColor], k: int, seed: int = 0, kind: str = "image") -> Palette:
    """K-means in native CIELAB with farthest-point seeding.

    Centroids are projected back into sRGB before quantization so the
    resulting palette is always displayable.
    """
    if not pixels:
        raise ValueError("extract_palette needs at least one pixel")
    if not 1 <= k <= 5:
        raise ValueError(f"k={k} outside [1,5]")
    uniq: dict[tuple[int, int, int], int] = {}
    for px in pixels:
        key = (px.r, px.g, px.b)
        uniq[key] = uniq.get(key, 0) + 1
    points = np.array([[*_lab_tuple(RgbColor(*rgb))] for rgb in uniq], dtype=np.float64)
    weights = np.array(list(uniq.values()), dtype=np.float64)
    k_eff = min(k, len(points))

    rng = np.random.Generator(np.random.PCG64(seed))
    centers = points[[int(rng.integers(len(points)))]]
    while len(centers) < k_eff:
        d2 = np.min(((points[:, None, :] - centers[None, :, :]) ** 2).sum(-1), axis=1)
        centers = np.vstack([centers, points[int(np.argmax(d2))]])

    for _ in range(50):
        d2 = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(-1)
        assign = np.argmin(d2, axis=1)
        new_centers = centers.copy()
        for j in range(k_eff):
            sel = assign == j
            if sel.any():
                w = weights[sel]
                new_centers[j] = (points[sel] * w[:, None]).sum(0) / w.sum()
        shift = np.abs(new_centers - centers).max()
        centers = new_centers
        if shift < 1e-3:
            break

    hexes = [colors.rgb_to_hex(colors.lab_to_srgb(colors.LabColor(*c))) for c in centers]
    return Palette.from_hexes(kind, hexes)


def _lab_tuple(c: RgbColor) -> tuple[float, float, float]:
    lab = colors.srgb_to_lab(c)
    return lab.l, lab.a, lab.b


# --- synthetic corpus -------------------------------------------------------

# Each theme word pins an (anchor, accent) hex pair. Anchors are shared by
# three themes apiece while accents are unique, so text identifies a palette
# exactly but colors alone leave a masked accent ambiguous.
SYNTH_ANCHORS = ["#1a1a1a", "#f2f2f2", "#8a8a8a", "#4a3320"]
SYNTH_THEMES = [
    ("forest", "#1f7a33"),
    ("ocean", "#1f5fa8"),
    ("sunset", "#e2622b"),
    ("berry", "#8e2a63"),
    ("desert", "#d9a441"),
    ("glacier", "#9fd8e8"),
    ("ember", "#b3261e"),
    ("meadow", "#7ac142"),
    ("orchid", "#b57edc"),
    ("honey", "#e8b004"),
    ("slate", "#46525e"),
    ("aurora", "#2ee6a8"),
]
SYNTH_FILLERS = ["poster", "flyer", "sale", "launch"]


def synth_corpus(n: int, seed: int = 0) -> list[DocumentSample]:
    """Deterministic synthetic corpus whose phrases pin the palette colors."""
    if n <= 0:
        raise ValueError(f"corpus size {n} must be positive")
    anchor_codes = [colors.hex_to_code(h) for h in SYNTH_ANCHORS]
    theme_codes = [colors.hex_to_code(h) for _, h in SYNTH_THEMES]
    if len(set(anchor_codes + theme_codes)) != len(anchor_codes) + len(theme_codes):
        raise AssertionError("synthetic color pools must quantize to distinct codes")
    rng = np.random.Generator(np.random.PCG64(seed))
    docs = []
    for i in range(n):
        t = int(rng.integers(len(SYNTH_THEMES)))
        word, accent_hex = SYNTH_THEMES[t]
        anchor_hex = SYNTH_ANCHORS[t % len(SYNTH_ANCHORS)]
        kind = colors.PALETTE_KINDS[int(rng.integers(3))]
        pal = Palette.from_hexes(kind, [anchor_hex, accent_hex])
        phrases = [Phrase(word, "content")]
        for j in rng.permutation(len(SYNTH_FILLERS))[: int(rng.integers(3))]:
            phrases.append(Phrase(SYNTH_FILLERS[int(j)], "label"))
        docs.append(DocumentSample(f"synth-{seed}-{i:05d}", {kind: pal}, phrases))
    return docs
