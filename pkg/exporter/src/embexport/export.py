"""The export pipeline: dataset + encoder + lexicon -> engine-ready files."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .dataset import load_items, load_triplet_rows
from .encoder import resolve_encoder
from .errors import DatasetError
from .formats import sha256_file, triplet_record, write_embeddings, write_manifest, write_triplets
from .lexicon import Lexicon, extract_phrases

SPLITS = ("train", "val", "test")


@dataclass(frozen=True)
class ExportJob:
    dataset_root: Path
    split: str
    encoder: str
    out_dir: Path
    lexicon: Lexicon

    def __post_init__(self):
        if self.split not in SPLITS:
            raise DatasetError(f"split must be one of {SPLITS}, got {self.split!r}")


def export(job: ExportJob) -> Path:
    """Run the job; returns the manifest path.

    The corpus captions and every modification text go through the same
    encoder, so all vectors share one dimension. A triplet's attribute
    entry is written only when the lexicon matches its text; a miss means
    the engine sees no contribution from that attribute family.
    """
    items = load_items(job.dataset_root)
    rows = load_triplet_rows(job.dataset_root, job.split)

    known = {item.item_id for item in items}
    for row in rows:
        for item_id in (row.ref_id, row.target_id, *(row.subset_ids or ())):
            if item_id not in known:
                raise DatasetError(f"triplet references unknown item {item_id!r}")
        if row.subset_ids is not None and row.target_id not in row.subset_ids:
            raise DatasetError(f"target {row.target_id!r} missing from its subset")

    encoder = resolve_encoder(job.encoder)
    corpus_matrix = encoder.encode([item.caption for item in items])

    records = []
    for row in rows:
        text_emb = encoder.encode([row.text])[0]
        phrases = extract_phrases(row.text, job.lexicon)
        attr_embs = {
            attr: encoder.encode([phrase])[0] for attr, phrase in sorted(phrases.items())
        }
        records.append(
            triplet_record(row.ref_id, text_emb, attr_embs, row.target_id, row.subset_ids)
        )

    out = Path(job.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    corpus_name = "corpus.emb"
    triplets_name = f"triplets.{job.split}.jsonl"
    write_embeddings(out / corpus_name, [item.item_id for item in items], corpus_matrix)
    write_triplets(out / triplets_name, records)
    manifest_path = out / f"manifest.{job.split}.json"
    write_manifest(manifest_path, corpus_name, triplets_name, encoder.dim, job.split)
    return manifest_path


def export_checksums(manifest_path: str | Path) -> dict[str, str]:
    """sha-256 of the manifest and the files it names, for determinism checks."""
    manifest_path = Path(manifest_path)
    import json

    doc = json.loads(manifest_path.read_text(encoding="utf-8"))
    out = {manifest_path.name: sha256_file(manifest_path)}
    for rel in doc["checksums"]:
        out[rel] = sha256_file(manifest_path.parent / rel)
    return out
