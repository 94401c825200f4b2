"""Vector index over guidance trees and complaint-to-tree retrieval.

The built-in embedder is a deterministic hashed bag of words (FNV-1a 64
token hashing into a fixed number of buckets, L2-normalized), so index
files are bit-exact across platforms.  Real embedding backends can plug in
behind the same ``embed(text) -> vector`` contract; an index remembers
which embedder produced it and refuses queries from a different one.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Protocol, Sequence

import numpy as np

from .model import Cgt, NodeKind

DEFAULT_DIM = 256
EMBED_TEXT_LIMIT = 2048

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF


class RetrievalError(Exception):
    code = "RETRIEVAL_ERROR"

    def __init__(self, message: str, code: str | None = None):
        super().__init__(message)
        if code is not None:
            self.code = code


class Embedder(Protocol):
    id: str
    dim: int

    def embed(self, text: str) -> np.ndarray: ...


def fnv1a_64(data: bytes) -> int:
    h = _FNV_OFFSET
    for b in data:
        h ^= b
        h = (h * _FNV_PRIME) & _MASK64
    return h


def _tokens(text: str) -> list[str]:
    return re.findall(r"[^\W_]+", text.lower(), re.UNICODE)


def embed_hash(text: str, dim: int = DEFAULT_DIM) -> np.ndarray:
    """Hashed bag-of-words embedding; empty text maps to the zero vector."""
    if dim < 1:
        raise RetrievalError(f"dimension must be >= 1, got {dim}", code="INVALID_PARAM")
    vec = np.zeros(dim, dtype=np.float64)
    for tok in _tokens(text):
        vec[fnv1a_64(tok.encode("utf-8")) % dim] += 1.0
    norm = np.linalg.norm(vec)
    if norm > 0:
        vec /= norm
    return vec


@dataclass(frozen=True)
class HashEmbedder:
    dim: int = DEFAULT_DIM

    @property
    def id(self) -> str:
        return f"fnv1a64-bow-{self.dim}"

    def embed(self, text: str) -> np.ndarray:
        return embed_hash(text, self.dim)


def cosine(x: Sequence[float], y: Sequence[float]) -> float:
    """Cosine similarity; zero if either vector has zero norm."""
    xa = np.asarray(x, dtype=np.float64)
    ya = np.asarray(y, dtype=np.float64)
    if xa.shape != ya.shape:
        raise RetrievalError(
            f"dimension mismatch: {xa.shape} vs {ya.shape}", code="DIM_MISMATCH")
    nx = np.linalg.norm(xa)
    ny = np.linalg.norm(ya)
    if nx == 0.0 or ny == 0.0:
        return 0.0
    return float(np.dot(xa, ya) / (nx * ny))


@dataclass(frozen=True)
class IndexEntry:
    tree_id: str
    vector: tuple[float, ...]
    digest: str


@dataclass(frozen=True)
class Index:
    embedder_id: str
    dim: int
    entries: tuple[IndexEntry, ...]


def embedding_text(tree: Cgt) -> str:
    """Title, root text, then every condition text in ascending id order."""
    parts = [tree.title, tree.root.text]
    parts.extend(
        n.text for n in sorted(tree.nodes, key=lambda n: n.id)
        if n.kind is NodeKind.CONDITION
    )
    return " ".join(p for p in parts if p)[:EMBED_TEXT_LIMIT]


def build_index(kb: Iterable[Cgt], embedder: Embedder | None = None) -> Index:
    trees = sorted(kb, key=lambda t: t.id)
    if not trees:
        raise RetrievalError("knowledge base is empty", code="EMPTY_KB")
    embedder = embedder or HashEmbedder()
    entries = []
    for tree in trees:
        text = embedding_text(tree)
        vec = embedder.embed(text)
        if vec.shape != (embedder.dim,):
            raise RetrievalError(
                f"embedder returned shape {vec.shape}, expected ({embedder.dim},)",
                code="DIM_MISMATCH")
        entries.append(IndexEntry(
            tree_id=tree.id,
            vector=tuple(float(v) for v in vec),
            digest=hashlib.sha256(text.encode("utf-8")).hexdigest(),
        ))
    return Index(embedder_id=embedder.id, dim=embedder.dim, entries=tuple(entries))


def retrieve(index: Index, query: str, k: int = 1,
             embedder: Embedder | None = None) -> list[tuple[str, float]]:
    """Top-k trees by cosine similarity, ties broken by ascending tree id."""
    if k < 1:
        raise RetrievalError(f"k must be >= 1, got {k}", code="INVALID_PARAM")
    if not index.entries:
        raise RetrievalError("index is empty", code="EMPTY_INDEX")
    embedder = embedder or HashEmbedder(index.dim)
    if embedder.id != index.embedder_id:
        raise RetrievalError(
            f"index built with {index.embedder_id!r}, queried with {embedder.id!r}",
            code="EMBEDDER_MISMATCH")
    q = embedder.embed(query)
    scored = [(e.tree_id, cosine(q, e.vector)) for e in index.entries]
    scored.sort(key=lambda pair: (-pair[1], pair[0]))
    return scored[:k]


def rewrite_dialogue(history: Sequence, rewriter: Callable[[str], str] | None = None,
                     ) -> str:
    """Flatten a dialogue for use as a retrieval query.

    Without a rewriter, the deterministic fallback is one "Patient: ..." /
    "System: ..." line per turn.  A rewriter (e.g. an LLM paraphraser) gets
    the fallback text and its output is returned verbatim; on failure the
    fallback is used.
    """
    fallback = "\n".join(
        f"{'Patient' if t.role == 'patient' else 'System'}: {t.text}" for t in history
    )
    if rewriter is None:
        return fallback
    try:
        return rewriter(fallback)
    except Exception:
        return fallback


# ---------------------------------------------------------------------------
# index file I/O

def index_to_dict(index: Index) -> dict:
    return {
        "embedder": index.embedder_id,
        "dim": index.dim,
        "entries": [
            {"tree_id": e.tree_id, "vector": list(e.vector), "digest": e.digest}
            for e in index.entries
        ],
    }


def index_from_dict(data: dict) -> Index:
    return Index(
        embedder_id=data["embedder"],
        dim=int(data["dim"]),
        entries=tuple(
            IndexEntry(tree_id=e["tree_id"],
                       vector=tuple(float(v) for v in e["vector"]),
                       digest=e.get("digest", ""))
            for e in data["entries"]
        ),
    )


def save_index(index: Index, path: str | Path) -> None:
    Path(path).write_text(json.dumps(index_to_dict(index)) + "\n", encoding="utf-8")


def load_index(path: str | Path) -> Index:
    return index_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
