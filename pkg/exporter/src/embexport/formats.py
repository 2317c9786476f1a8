"""Writers for the retrieval engine's on-disk formats.

These are deliberately independent re-implementations: the exporter talks
to the engine only through files, so the layouts below must match the
engine's documented formats byte for byte.

Embedding file, all little-endian:

    magic   4 bytes  b"EMB1"
    dim     u32
    count   u64
    ids     count times (u32 byte-length + UTF-8 bytes)
    data    count * dim float32, row-major

Triplets are JSON lines with keys ref_id, text_emb, attr_embs, target_id,
and optional subset_ids; every float is written at float32 precision.
The manifest is a JSON object binding both files with sha-256 checksums.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

MAGIC = b"EMB1"
ATTRIBUTES = ("color", "shape")


def write_embeddings(path: str | Path, ids: Sequence[str], data: np.ndarray) -> None:
    data = np.ascontiguousarray(np.asarray(data), dtype=np.float32)
    if data.ndim != 2 or data.shape[0] != len(ids):
        raise ValueError(f"{len(ids)} ids but data shape {data.shape}")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", data.shape[1]))
        f.write(struct.pack("<Q", data.shape[0]))
        for item_id in ids:
            raw = item_id.encode("utf-8")
            f.write(struct.pack("<I", len(raw)))
            f.write(raw)
        f.write(data.tobytes())


def _f32_list(vec: np.ndarray) -> list[float]:
    return [float(np.float32(x)) for x in np.asarray(vec)]


def triplet_record(
    ref_id: str,
    text_emb: np.ndarray,
    attr_embs: Mapping[str, np.ndarray],
    target_id: str,
    subset_ids: Sequence[str] | None = None,
) -> dict:
    rec: dict = {
        "ref_id": ref_id,
        "text_emb": _f32_list(text_emb),
        "attr_embs": {
            name: _f32_list(attr_embs[name]) for name in ATTRIBUTES if name in attr_embs
        },
        "target_id": target_id,
    }
    if subset_ids is not None:
        rec["subset_ids"] = list(subset_ids)
    return rec


def write_triplets(path: str | Path, records: Sequence[dict]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for rec in records:
            f.write(json.dumps(rec, separators=(",", ":")))
            f.write("\n")


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(
    path: str | Path, corpus_path: str, triplets_path: str, dim: int, split: str
) -> None:
    base = Path(path).parent
    doc = {
        "corpus_path": corpus_path,
        "triplets_path": triplets_path,
        "dim": dim,
        "split": split,
        "checksums": {
            corpus_path: sha256_file(base / corpus_path),
            triplets_path: sha256_file(base / triplets_path),
        },
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f, indent=2, sort_keys=True)
        f.write("\n")
