"""Per-video semantic memory of past scene summaries.

Entries are short texts with unit-norm embeddings. Retrieval ranks every
entry by cosine similarity (exhaustive scan; at most a few hundred vectors)
and concatenates the best ones under a token budget.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

EMBED_DIM = 384

# similarities are rounded before ranking so mathematically equal scores
# tie exactly and fall back to insertion order
_RANK_DECIMALS = 12


def count_tokens(text: str) -> int:
    return len(text.split())


def truncate_tokens(text: str, n: int) -> str:
    """First ``n`` whitespace tokens, rejoined with single spaces."""
    return " ".join(text.split()[:max(n, 0)])


class Embedder(Protocol):
    dim: int

    def embed(self, text: str) -> np.ndarray: ...


@lru_cache(maxsize=65536)
def _bucket(token: str, dim: int) -> int:
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big") % dim


class HashingEmbedder:
    """Deterministic bag-of-words encoder.

    Each lowercased whitespace token is hashed (64-bit BLAKE2b, big-endian)
    into one of ``dim`` buckets; the count vector is L2-normalized. Good
    enough to exercise retrieval without a neural sentence encoder.
    """

    def __init__(self, dim: int = EMBED_DIM):
        self.dim = dim

    def embed(self, text: str) -> np.ndarray:
        tokens = text.lower().split()
        if not tokens:
            raise ValueError("empty embedding input")
        vec = np.zeros(self.dim)
        for tok in tokens:
            vec[_bucket(tok, self.dim)] += 1.0
        return vec / np.linalg.norm(vec)


@dataclass(frozen=True)
class MemoryConfig:
    caption_tokens: int = 150   # budget for stored scene text
    context_tokens: int = 512   # budget for retrieved context
    top_k: int = 3
    max_size: int = 400
    dim: int = EMBED_DIM

    def violations(self, prefix: str = "memory") -> list[str]:
        return [
            f"{prefix}.{name}: must be positive"
            for name in ("caption_tokens", "context_tokens", "top_k", "max_size", "dim")
            if getattr(self, name) <= 0
        ]


@dataclass(frozen=True)
class MemoryEntry:
    text: str
    flag: int
    embedding: np.ndarray


def format_history(history: Sequence) -> str:
    """``Q: ...`` / ``A: ...`` lines for a sequence of dialogue turns."""
    return "\n".join(f"Q: {t.question}\nA: {t.answer}" for t in history)


class MemoryIndex:
    """Bounded store of scene summaries for one video.

    Not thread-safe; each video worker owns its own instance.
    """

    def __init__(self, cfg: MemoryConfig = MemoryConfig(), embedder: Embedder | None = None):
        self.cfg = cfg
        self.embedder = embedder if embedder is not None else HashingEmbedder(cfg.dim)
        self.entries: list[MemoryEntry] = []
        self._matrix = np.zeros((cfg.max_size + 1, cfg.dim))

    def __len__(self) -> int:
        return len(self.entries)

    def add_scene(self, caption: str, verdict_flag: int, history: Sequence = (), ctx: str | None = None) -> MemoryEntry:
        """Store caption + dialogue + retrieved context, truncated to the caption budget."""
        if not caption.strip():
            raise ValueError("empty caption")
        parts = [caption]
        if history:
            parts.append(format_history(history))
        if ctx:
            parts.append(ctx)
        text = truncate_tokens("\n".join(parts), self.cfg.caption_tokens)
        return self.add_entry(text, verdict_flag)

    def add_entry(self, text: str, flag: int) -> MemoryEntry:
        emb = np.asarray(self.embedder.embed(text), dtype=np.float64)
        if emb.shape != (self.cfg.dim,):
            raise ValueError(f"embedding has shape {emb.shape}, expected ({self.cfg.dim},)")
        entry = MemoryEntry(text, int(flag), emb)
        self._matrix[len(self.entries)] = emb
        self.entries.append(entry)
        if len(self.entries) > self.cfg.max_size:
            self.entries = self.entries[-(self.cfg.max_size // 2):]
            self._rebuild()
        return entry

    def _rebuild(self) -> None:
        self._matrix[:] = 0.0
        for i, e in enumerate(self.entries):
            self._matrix[i] = e.embedding

    def rank(self, query: str) -> list[int]:
        """Entry positions ordered by cosine similarity to ``query``."""
        q = np.asarray(self.embedder.embed(query), dtype=np.float64)
        sims = np.round(self._matrix[: len(self.entries)] @ q, _RANK_DECIMALS)
        return [int(i) for i in np.argsort(-sims, kind="stable")]

    def search(self, query: str, k: int | None = None) -> list[int]:
        if not self.entries:
            return []
        return self.rank(query)[: self.cfg.top_k if k is None else k]

    def retrieve_context(self, query: str) -> str | None:
        """Join the top-k entries, stopping after the one that crosses the budget."""
        if not self.entries:
            return None
        picked = []
        tokens = 0
        for j in self.search(query):
            entry = self.entries[j]
            picked.append(entry.text)
            tokens += count_tokens(entry.text)
            if tokens > self.cfg.context_tokens:
                break
        return "\n".join(picked)

    # snapshot files are for debugging and inspection

    def to_json(self) -> str:
        return json.dumps(
            [{"text": e.text, "flag": e.flag, "embedding": e.embedding.tolist()} for e in self.entries]
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path: str | Path, cfg: MemoryConfig = MemoryConfig(), embedder: Embedder | None = None) -> "MemoryIndex":
        index = cls(cfg, embedder)
        for item in json.loads(Path(path).read_text()):
            emb = np.asarray(item["embedding"], dtype=np.float64)
            if emb.shape != (cfg.dim,):
                raise ValueError(f"snapshot embedding has shape {emb.shape}")
            index.entries.append(MemoryEntry(item["text"], int(item["flag"]), emb))
        if len(index.entries) > cfg.max_size:
            raise ValueError(f"snapshot holds {len(index.entries)} entries, capacity {cfg.max_size}")
        index._rebuild()
        return index
