"""Phrase embedding providers.

The model consumes precomputed phrase vectors (CLIP-style embeddings arrive
through a file-backed store or inline on the phrase); a seeded hash embedder
stands in for tests and the synthetic corpus. Providers assemble the fixed
10-row text matrix plus validity mask.
"""

from __future__ import annotations

import base64
import hashlib
from dataclasses import dataclass

import numpy as np

from .corpus import MAX_PHRASES, Phrase

STORE_MAGIC = "palette-embed v1"


class EmbeddingError(Exception):
    """Store parsing or dimension problems."""


class UnknownPhraseError(EmbeddingError):
    """A mandated store has no vector for a phrase."""


def normalize_text(text: str) -> str:
    return text.strip().lower()


def hash_embed(text: str, dim: int, seed: int = 0) -> np.ndarray:
    """Deterministic unit-norm vector from a seeded hash of the text."""
    norm = normalize_text(text)
    if not norm:
        raise ValueError("cannot embed empty text")
    digest = hashlib.sha256(f"{seed}|{dim}|{norm}".encode("utf-8")).digest()
    rng = np.random.Generator(np.random.PCG64(int.from_bytes(digest[:8], "little")))
    v = rng.standard_normal(dim)
    return (v / np.linalg.norm(v)).astype(np.float32)


@dataclass
class TextContext:
    """M_max x D phrase matrix with per-row validity."""

    matrix: np.ndarray
    valid: np.ndarray
    dim: int

    def __post_init__(self):
        if self.matrix.shape != (MAX_PHRASES, self.dim):
            raise ValueError(f"text matrix shape {self.matrix.shape} != ({MAX_PHRASES},{self.dim})")
        if self.valid.shape != (MAX_PHRASES,):
            raise ValueError("validity mask must have one flag per row")
        if not np.isfinite(self.matrix[self.valid]).all():
            raise ValueError("valid embedding rows must be finite")

    @classmethod
    def empty(cls, dim: int) -> "TextContext":
        return cls(np.zeros((MAX_PHRASES, dim), dtype=np.float32),
                   np.zeros(MAX_PHRASES, dtype=bool), dim)


class HashEmbedder:
    """Test provider: every phrase resolves to a seeded hash vector."""

    def __init__(self, dim: int = 512, seed: int = 0):
        self.dim = dim
        self.seed = seed
        self.name = "hash"

    def lookup(self, text: str) -> np.ndarray:
        return hash_embed(text, self.dim, self.seed)


class EmbeddingStore:
    """Exact-match store of precomputed phrase vectors."""

    def __init__(self, dim: int, provider: str = "clip"):
        self.dim = dim
        self.provider = provider
        self.entries: dict[str, np.ndarray] = {}

    def add(self, text: str, vector) -> None:
        key = normalize_text(text)
        vec = np.asarray(vector, dtype=np.float32)
        if vec.shape != (self.dim,):
            raise EmbeddingError(f"vector for {key!r} has dimension {vec.shape}, store is {self.dim}")
        if key in self.entries:
            raise EmbeddingError(f"duplicate store key {key!r}")
        self.entries[key] = vec

    def lookup(self, text: str) -> np.ndarray:
        key = normalize_text(text)
        if key not in self.entries:
            raise UnknownPhraseError(f"no embedding stored for {key!r}")
        return self.entries[key]

    def __len__(self):
        return len(self.entries)


class StoreProvider:
    """Store-backed provider; misses raise rather than fall back."""

    def __init__(self, store: EmbeddingStore):
        self.store = store
        self.dim = store.dim
        self.name = f"store:{store.provider}"

    def lookup(self, text: str) -> np.ndarray:
        return self.store.lookup(text)


def embed_phrases(phrases: list[Phrase], provider) -> TextContext:
    """Assemble the text matrix: inline vectors win, then provider lookup."""
    if len(phrases) > MAX_PHRASES:
        raise ValueError(f"{len(phrases)} phrases, maximum is {MAX_PHRASES}")
    ctx = TextContext.empty(provider.dim)
    for i, phrase in enumerate(phrases):
        if phrase.embedding is not None:
            vec = np.asarray(phrase.embedding, dtype=np.float32)
            if vec.shape != (provider.dim,):
                raise EmbeddingError(
                    f"inline embedding for {phrase.text!r} has dimension {vec.shape[0] if vec.ndim else 0}, "
                    f"expected {provider.dim}")
        else:
            vec = provider.lookup(phrase.text)
        ctx.matrix[i] = vec
        ctx.valid[i] = True
    return ctx


def save_store(store: EmbeddingStore, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{STORE_MAGIC} dim={store.dim} provider={store.provider}\n")
        for key in sorted(store.entries):
            blob = base64.b64encode(store.entries[key].astype("<f4").tobytes()).decode("ascii")
            fh.write(f"{key}\t{blob}\n")


def load_store(path) -> EmbeddingStore:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if not header.startswith(STORE_MAGIC):
            raise EmbeddingError(f"bad store header: {header!r}")
        fields = dict(part.split("=", 1) for part in header[len(STORE_MAGIC):].split() if "=" in part)
        try:
            dim = int(fields["dim"])
        except (KeyError, ValueError) as exc:
            raise EmbeddingError("store header missing dim=<D>") from exc
        store = EmbeddingStore(dim, fields.get("provider", "unknown"))
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            try:
                key, blob = line.rstrip("\n").split("\t", 1)
            except ValueError as exc:
                raise EmbeddingError(f"line {lineno}: expected text<TAB>base64") from exc
            vec = np.frombuffer(base64.b64decode(blob), dtype="<f4")
            if vec.shape != (dim,):
                raise EmbeddingError(
                    f"line {lineno}: vector has dimension {vec.shape[0]}, store is {dim}")
            try:
                store.add(key, vec)
            except EmbeddingError as exc:
                raise EmbeddingError(f"line {lineno}: {exc}") from exc
    return store
