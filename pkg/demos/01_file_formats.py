"""File formats walkthrough: the binary embedding matrix, the triplet
JSONL, and the manifest that binds them with checksums.
"""

import tempfile
from pathlib import Path

import numpy as np

from midzone import (
    EmbeddingMatrix,
    Manifest,
    QueryTriplet,
    load_embeddings,
    load_manifest,
    write_embeddings,
    write_manifest,
    write_triplets,
)

work = Path(tempfile.mkdtemp(prefix="formats-"))
print(f"working in {work}\n")

# A corpus is an id-indexed matrix. Values are stored at float32 precision,
# so what comes back from disk is exactly what went in.
rng = np.random.default_rng(7)
ids = [f"item-{i:02d}" for i in range(6)]
matrix = EmbeddingMatrix(ids, rng.normal(size=(6, 4)))
write_embeddings(work / "corpus.emb", matrix)
loaded = load_embeddings(work / "corpus.emb")
print("corpus roundtrip bit-exact:", loaded == matrix)
print("first row:", loaded.data[0])

# Queries are one JSON object per line. Attribute embeddings are optional
# per family; absent means that family contributes nothing downstream.
triplets = [
    QueryTriplet(
        ref_id="item-00",
        text_emb=rng.normal(size=4),
        attr_embs={"color": rng.normal(size=4)},
        target_id="item-03",
    ),
    QueryTriplet(
        ref_id="item-01",
        text_emb=rng.normal(size=4),
        attr_embs={},
        target_id="item-05",
        subset_ids=("item-05", "item-02", "item-04"),
    ),
]
write_triplets(work / "triplets.train.jsonl", triplets)
print("\ntriplet file:")
print((work / "triplets.train.jsonl").read_text().strip()[:180], "...")

# The manifest records relative paths plus sha-256 checksums and is the
# only thing downstream commands need to be pointed at.
write_manifest(
    work / "manifest.train.json",
    Manifest(
        corpus_path="corpus.emb",
        triplets_path="triplets.train.jsonl",
        dim=4,
        split="train",
    ),
)
manifest, corpus, trips = load_manifest(work / "manifest.train.json")
print(f"\nmanifest loads: dim={manifest.dim}, {corpus.count} items, {len(trips)} queries")

# Flip one byte of the corpus and the manifest load refuses it.
blob = bytearray((work / "corpus.emb").read_bytes())
blob[40] ^= 0xFF
(work / "corpus.emb").write_bytes(blob)
try:
    load_manifest(work / "manifest.train.json")
except Exception as e:
    print(f"\ntampered corpus rejected: {type(e).__name__}: {e}")
