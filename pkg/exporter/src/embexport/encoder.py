"""Text encoders.

Two kinds of identifier are understood:

``hash:<dim>``
    A fully local, deterministic embedder: the sha-256 of the text seeds a
    Gaussian draw of the requested dimension, normalized to unit length.
    It has no semantics but it is reproducible everywhere, which is what
    the file-format pipeline and its tests need.

anything else
    Treated as a sentence-transformers model name or path and loaded
    lazily; failures of any kind surface as EncoderLoadFailure.
"""

from __future__ import annotations

import hashlib

import numpy as np

from .errors import EncoderLoadFailure


class HashEncoder:
    def __init__(self, dim: int):
        if dim < 1:
            raise EncoderLoadFailure(f"hash encoder dim must be positive, got {dim}")
        self.dim = dim

    def encode(self, texts: list[str]) -> np.ndarray:
        out = np.empty((len(texts), self.dim), dtype=np.float32)
        for i, text in enumerate(texts):
            digest = hashlib.sha256(text.encode("utf-8")).digest()
            seed = int.from_bytes(digest[:8], "little")
            v = np.random.default_rng(seed).standard_normal(self.dim)
            out[i] = (v / np.linalg.norm(v)).astype(np.float32)
        return out


class SentenceEncoder:
    """Thin wrapper so the heavy import happens only when asked for."""

    def __init__(self, name: str):
        try:
            from sentence_transformers import SentenceTransformer
        except ImportError as e:
            raise EncoderLoadFailure(f"sentence-transformers unavailable: {e}") from e
        try:
            self._model = SentenceTransformer(name)
        except Exception as e:
            raise EncoderLoadFailure(f"could not load encoder {name!r}: {e}") from e
        self.dim = int(self._model.get_sentence_embedding_dimension())

    def encode(self, texts: list[str]) -> np.ndarray:
        emb = self._model.encode(texts, convert_to_numpy=True, normalize_embeddings=True)
        return np.asarray(emb, dtype=np.float32)


def resolve_encoder(identifier: str):
    if identifier.startswith("hash:"):
        try:
            dim = int(identifier.split(":", 1)[1])
        except ValueError:
            raise EncoderLoadFailure(f"bad hash encoder spec {identifier!r}") from None
        return HashEncoder(dim)
    return SentenceEncoder(identifier)
