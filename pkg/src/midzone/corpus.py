"""Corpus containers and on-disk formats.

Three artifacts live here: the binary embedding matrix (``.emb``), the
query-triplet JSONL file, and the JSON manifest that ties a corpus and a
triplet file together with checksums.

Embedding file layout, all little-endian:

    magic   4 bytes  b"EMB1"
    dim     u32
    count   u64
    ids     count times (u32 byte-length + UTF-8 bytes)
    data    count * dim float32, row-major

Values are stored as float32; in memory everything is float64 that has been
round-tripped through float32, so write -> load is bit-exact.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    BadMagic,
    ChecksumMismatch,
    DimMismatch,
    DuplicateId,
    FormatError,
    NonFiniteEntry,
    TargetNotInSubset,
    TruncatedFile,
    UnknownId,
    ZeroRow,
)

MAGIC = b"EMB1"

# Attribute channels the engine understands, in canonical order.
ATTRIBUTES = ("color", "shape")


def _canon(a: np.ndarray) -> np.ndarray:
    """Round-trip through float32 so memory matches the storage precision."""
    return np.ascontiguousarray(np.asarray(a, dtype=np.float32), dtype=np.float32).astype(np.float64)


class EmbeddingMatrix:
    """Immutable id-indexed matrix of item embeddings."""

    def __init__(self, ids: Sequence[str], data: np.ndarray):
        ids = tuple(str(i) for i in ids)
        data = np.asarray(data, dtype=np.float64)
        if data.ndim != 2:
            raise DimMismatch(f"expected 2-d data, got shape {data.shape}")
        if data.shape[0] < 1 or data.shape[1] < 1:
            raise FormatError(f"matrix must be at least 1x1, got shape {data.shape}")
        if len(ids) != data.shape[0]:
            raise DimMismatch(f"{len(ids)} ids but {data.shape[0]} rows")
        if len(set(ids)) != len(ids):
            seen: set[str] = set()
            for i in ids:
                if i in seen:
                    raise DuplicateId(f"duplicate item id {i!r}")
                seen.add(i)
        if not np.all(np.isfinite(data)):
            bad = int(np.argwhere(~np.isfinite(data).all(axis=1))[0][0])
            raise NonFiniteEntry(f"non-finite value in row {bad} (id {ids[bad]!r})")
        self._ids = ids
        self._data = _canon(data)
        self._data.setflags(write=False)
        self._index = {item: i for i, item in enumerate(ids)}
        self._norms: np.ndarray | None = None
        self._units: np.ndarray | None = None

    @property
    def ids(self) -> tuple[str, ...]:
        return self._ids

    @property
    def data(self) -> np.ndarray:
        return self._data

    @property
    def dim(self) -> int:
        return self._data.shape[1]

    @property
    def count(self) -> int:
        return self._data.shape[0]

    def index(self, item_id: str) -> int:
        try:
            return self._index[item_id]
        except KeyError:
            raise UnknownId(f"unknown item id {item_id!r}") from None

    def row(self, item_id: str) -> np.ndarray:
        return self._data[self.index(item_id)]

    def norms(self) -> np.ndarray:
        # Cached row norms; safe because data is read-only.
        if self._norms is None:
            self._norms = np.linalg.norm(self._data, axis=1)
            self._norms.setflags(write=False)
        return self._norms

    def unit_rows(self) -> np.ndarray:
        """Rows scaled to unit norm, cached. Raises ZeroRow on a zero row."""
        if self._units is None:
            norms = self.norms()
            zero = np.where(norms == 0.0)[0]
            if zero.size:
                i = int(zero[0])
                raise ZeroRow(f"row {i} (id {self._ids[i]!r}) has zero norm")
            self._units = self._data / norms[:, None]
            self._units.setflags(write=False)
        return self._units

    def fingerprint(self) -> str:
        """sha-256 over dim, ids, and the float32 canonical bytes; used to
        refuse resuming a checkpoint against a different corpus."""
        h = hashlib.sha256()
        h.update(struct.pack("<IQ", self.dim, self.count))
        for item_id in self._ids:
            raw = item_id.encode("utf-8")
            h.update(struct.pack("<I", len(raw)))
            h.update(raw)
        h.update(np.ascontiguousarray(self._data, dtype=np.float32).tobytes())
        return h.hexdigest()

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EmbeddingMatrix):
            return NotImplemented
        return self._ids == other._ids and np.array_equal(self._data, other._data)

    def __repr__(self) -> str:
        return f"EmbeddingMatrix(count={self.count}, dim={self.dim})"


def l2_normalize(matrix: EmbeddingMatrix) -> EmbeddingMatrix:
    """Return a new matrix with unit-norm rows."""
    norms = np.linalg.norm(matrix.data, axis=1, keepdims=True)
    zero = np.where(norms[:, 0] == 0.0)[0]
    if zero.size:
        i = int(zero[0])
        raise ZeroRow(f"row {i} (id {matrix.ids[i]!r}) has zero norm")
    return EmbeddingMatrix(matrix.ids, matrix.data / norms)


def write_embeddings(path: str | Path, matrix: EmbeddingMatrix) -> None:
    path = Path(path)
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", matrix.dim))
        f.write(struct.pack("<Q", matrix.count))
        for item_id in matrix.ids:
            raw = item_id.encode("utf-8")
            f.write(struct.pack("<I", len(raw)))
            f.write(raw)
        f.write(np.ascontiguousarray(matrix.data, dtype=np.float32).tobytes())


def load_embeddings(path: str | Path) -> EmbeddingMatrix:
    path = Path(path)
    blob = path.read_bytes()
    if blob[:4] != MAGIC:
        raise BadMagic(f"{path}: expected {MAGIC!r}, got {blob[:4]!r}")
    off = 4
    try:
        (dim,) = struct.unpack_from("<I", blob, off)
        off += 4
        (count,) = struct.unpack_from("<Q", blob, off)
        off += 8
    except struct.error as e:
        raise TruncatedFile(f"{path}: header cut short") from e
    if count == 0:
        raise TruncatedFile(f"{path}: declares zero rows")
    ids = []
    for _ in range(count):
        try:
            (n,) = struct.unpack_from("<I", blob, off)
        except struct.error as e:
            raise TruncatedFile(f"{path}: id table cut short") from e
        off += 4
        if off + n > len(blob):
            raise TruncatedFile(f"{path}: id table cut short")
        ids.append(blob[off:off + n].decode("utf-8"))
        off += n
    need = count * dim * 4
    if len(blob) - off < need:
        raise TruncatedFile(f"{path}: expected {need} data bytes, found {len(blob) - off}")
    if len(blob) - off > need:
        raise TruncatedFile(f"{path}: {len(blob) - off - need} trailing bytes after data")
    data = np.frombuffer(blob, dtype="<f4", count=count * dim, offset=off).reshape(count, dim)
    return EmbeddingMatrix(ids, data.astype(np.float64))


@dataclass(frozen=True)
class QueryTriplet:
    """One retrieval query: a reference item, a modification text embedding,
    optional per-attribute embeddings, and the ground-truth target.

    ``subset_ids``, when present, is the candidate shortlist used for
    subset-restricted recall and must contain the target.
    """

    ref_id: str
    text_emb: np.ndarray
    attr_embs: Mapping[str, np.ndarray]
    target_id: str
    subset_ids: tuple[str, ...] | None = None

    def __post_init__(self):
        text = _canon(np.atleast_1d(np.asarray(self.text_emb, dtype=np.float64)))
        if text.ndim != 1:
            raise DimMismatch(f"text_emb must be 1-d, got shape {text.shape}")
        if not np.all(np.isfinite(text)):
            raise NonFiniteEntry(f"non-finite text embedding for ref {self.ref_id!r}")
        object.__setattr__(self, "text_emb", text)
        attrs: dict[str, np.ndarray] = {}
        for name in self.attr_embs:
            if name not in ATTRIBUTES:
                raise FormatError(f"unknown attribute {name!r}; expected one of {ATTRIBUTES}")
        for name in ATTRIBUTES:
            if name not in self.attr_embs:
                continue
            v = _canon(np.atleast_1d(np.asarray(self.attr_embs[name], dtype=np.float64)))
            if v.shape != text.shape:
                raise DimMismatch(
                    f"attribute {name!r} has dim {v.shape[0]}, text has {text.shape[0]}"
                )
            if not np.all(np.isfinite(v)):
                raise NonFiniteEntry(f"non-finite {name} embedding for ref {self.ref_id!r}")
            attrs[name] = v
        object.__setattr__(self, "attr_embs", attrs)
        if self.subset_ids is not None:
            subset = tuple(str(s) for s in self.subset_ids)
            if self.target_id not in subset:
                raise TargetNotInSubset(
                    f"target {self.target_id!r} missing from subset of ref {self.ref_id!r}"
                )
            if len(subset) < 2:
                raise FormatError(f"subset of ref {self.ref_id!r} needs at least 2 ids")
            object.__setattr__(self, "subset_ids", subset)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, QueryTriplet):
            return NotImplemented
        return (
            self.ref_id == other.ref_id
            and self.target_id == other.target_id
            and self.subset_ids == other.subset_ids
            and np.array_equal(self.text_emb, other.text_emb)
            and set(self.attr_embs) == set(other.attr_embs)
            and all(np.array_equal(self.attr_embs[k], other.attr_embs[k]) for k in self.attr_embs)
        )


def _triplet_record(t: QueryTriplet) -> dict:
    rec: dict = {
        "ref_id": t.ref_id,
        "text_emb": [float(np.float32(x)) for x in t.text_emb],
        "attr_embs": {
            name: [float(np.float32(x)) for x in t.attr_embs[name]]
            for name in ATTRIBUTES
            if name in t.attr_embs
        },
        "target_id": t.target_id,
    }
    if t.subset_ids is not None:
        rec["subset_ids"] = list(t.subset_ids)
    return rec


def write_triplets(path: str | Path, triplets: Iterable[QueryTriplet]) -> None:
    path = Path(path)
    with open(path, "w", encoding="utf-8") as f:
        for t in triplets:
            f.write(json.dumps(_triplet_record(t), separators=(",", ":")))
            f.write("\n")


_TRIPLET_KEYS = {"ref_id", "text_emb", "attr_embs", "target_id", "subset_ids"}


def load_triplets(path: str | Path, corpus: EmbeddingMatrix | None = None) -> list[QueryTriplet]:
    """Parse a triplet JSONL file; with a corpus, also check that every id
    resolves and every vector matches the corpus dimension."""
    path = Path(path)
    out = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as e:
                raise FormatError(f"{path}:{lineno}: invalid JSON") from e
            if not isinstance(rec, dict):
                raise FormatError(f"{path}:{lineno}: record is not an object")
            unknown = set(rec) - _TRIPLET_KEYS
            if unknown:
                raise FormatError(f"{path}:{lineno}: unknown keys {sorted(unknown)}")
            for key in ("ref_id", "text_emb", "attr_embs", "target_id"):
                if key not in rec:
                    raise FormatError(f"{path}:{lineno}: missing key {key!r}")
            if not isinstance(rec["attr_embs"], dict):
                raise FormatError(f"{path}:{lineno}: attr_embs must be an object")
            subset = rec.get("subset_ids")
            triplet = QueryTriplet(
                ref_id=str(rec["ref_id"]),
                text_emb=np.asarray(rec["text_emb"], dtype=np.float64),
                attr_embs={k: np.asarray(v, dtype=np.float64) for k, v in rec["attr_embs"].items()},
                target_id=str(rec["target_id"]),
                subset_ids=tuple(subset) if subset is not None else None,
            )
            if corpus is not None:
                if triplet.text_emb.shape[0] != corpus.dim:
                    raise DimMismatch(
                        f"{path}:{lineno}: text dim {triplet.text_emb.shape[0]}"
                        f" != corpus dim {corpus.dim}"
                    )
                corpus.index(triplet.ref_id)
                corpus.index(triplet.target_id)
                if triplet.subset_ids is not None:
                    for s in triplet.subset_ids:
                        corpus.index(s)
            out.append(triplet)
    return out


def triplets_fingerprint(triplets: Iterable[QueryTriplet]) -> str:
    """sha-256 over the serialized records, matching the JSONL encoding."""
    h = hashlib.sha256()
    for t in triplets:
        h.update(json.dumps(_triplet_record(t), separators=(",", ":")).encode("utf-8"))
        h.update(b"\n")
    return h.hexdigest()


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


_SPLITS = ("train", "val", "test")


@dataclass(frozen=True)
class Manifest:
    """Links a corpus file and a triplet file; paths are relative to the
    manifest's own directory."""

    corpus_path: str
    triplets_path: str
    dim: int
    split: str
    checksums: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.split not in _SPLITS:
            raise FormatError(f"split must be one of {_SPLITS}, got {self.split!r}")


def write_manifest(path: str | Path, manifest: Manifest) -> None:
    path = Path(path)
    base = path.parent
    checks = {
        manifest.corpus_path: sha256_file(base / manifest.corpus_path),
        manifest.triplets_path: sha256_file(base / manifest.triplets_path),
    }
    doc = {
        "corpus_path": manifest.corpus_path,
        "triplets_path": manifest.triplets_path,
        "dim": manifest.dim,
        "split": manifest.split,
        "checksums": checks,
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f, indent=2, sort_keys=True)
        f.write("\n")


def load_manifest(path: str | Path) -> tuple[Manifest, EmbeddingMatrix, list[QueryTriplet]]:
    """Load a manifest plus the files it references, verifying checksums and
    dimension agreement."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise FormatError(f"{path}: invalid JSON") from e
    for key in ("corpus_path", "triplets_path", "dim", "split", "checksums"):
        if key not in doc:
            raise FormatError(f"{path}: missing key {key!r}")
    manifest = Manifest(
        corpus_path=str(doc["corpus_path"]),
        triplets_path=str(doc["triplets_path"]),
        dim=int(doc["dim"]),
        split=str(doc["split"]),
        checksums=dict(doc["checksums"]),
    )
    base = path.parent
    for rel, want in manifest.checksums.items():
        got = sha256_file(base / rel)
        if got != want:
            raise ChecksumMismatch(f"{base / rel}: sha256 {got} != manifest {want}")
    corpus = load_embeddings(base / manifest.corpus_path)
    if corpus.dim != manifest.dim:
        raise DimMismatch(f"manifest dim {manifest.dim} but corpus dim {corpus.dim}")
    triplets = load_triplets(base / manifest.triplets_path, corpus)
    return manifest, corpus, triplets
