"""On-disk dataset layout the exporter reads.

    <root>/corpus.json              {"items": [{"id": ..., "caption": ...}, ...]}
    <root>/triplets.<split>.json    [{"ref_id": ..., "target_id": ..., "text": ...,
                                      "subset_ids": [...]?}, ...]

Captions stand in for the images; whatever encoder is selected embeds them.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .errors import DatasetError, EmptySplit


@dataclass(frozen=True)
class Item:
    item_id: str
    caption: str


@dataclass(frozen=True)
class TripletRow:
    ref_id: str
    target_id: str
    text: str
    subset_ids: tuple[str, ...] | None = None


def _read_json(path: Path):
    if not path.is_file():
        raise DatasetError(f"missing dataset file: {path}")
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise DatasetError(f"{path}: invalid JSON") from e


def load_items(root: str | Path) -> list[Item]:
    doc = _read_json(Path(root) / "corpus.json")
    if not isinstance(doc, dict) or "items" not in doc:
        raise DatasetError(f"{root}/corpus.json: expected an object with an 'items' list")
    items = []
    seen: set[str] = set()
    for rec in doc["items"]:
        if not isinstance(rec, dict) or "id" not in rec or "caption" not in rec:
            raise DatasetError(f"{root}/corpus.json: every item needs 'id' and 'caption'")
        item_id = str(rec["id"])
        if item_id in seen:
            raise DatasetError(f"{root}/corpus.json: duplicate item id {item_id!r}")
        seen.add(item_id)
        items.append(Item(item_id=item_id, caption=str(rec["caption"])))
    if not items:
        raise DatasetError(f"{root}/corpus.json: no items")
    return items


def load_triplet_rows(root: str | Path, split: str) -> list[TripletRow]:
    path = Path(root) / f"triplets.{split}.json"
    doc = _read_json(path)
    if not isinstance(doc, list):
        raise DatasetError(f"{path}: expected a list of triplet objects")
    rows = []
    for rec in doc:
        if not isinstance(rec, dict):
            raise DatasetError(f"{path}: triplet entries must be objects")
        for key in ("ref_id", "target_id", "text"):
            if key not in rec:
                raise DatasetError(f"{path}: triplet missing key {key!r}")
        subset = rec.get("subset_ids")
        rows.append(
            TripletRow(
                ref_id=str(rec["ref_id"]),
                target_id=str(rec["target_id"]),
                text=str(rec["text"]),
                subset_ids=tuple(str(s) for s in subset) if subset is not None else None,
            )
        )
    if not rows:
        raise EmptySplit(f"split {split!r} has no triplets")
    return rows
