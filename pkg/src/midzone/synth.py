"""Synthetic attribute world with ground-truth relevance.

Every item embedding is assembled as

    embedding = color_direction + shape_direction + identity + noise

where the per-value attribute directions form one orthonormal family
(Gram-Schmidt over seeded gaussian draws), the identity is a random vector
inside a dedicated nuisance subspace scaled to IDENTITY_NORM, and the
noise is isotropic gaussian with the configured sigma. Because the
directions are orthonormal, changing an attribute is an exact vector
translation, and an oracle query (reference embedding plus the label-delta
text embedding) provably ranks the relevant items on top when sigma is 0.

The identity norm of 0.5 keeps worlds separable: items sharing both target
labels score at least 2 - 0.5^2 against the oracle query while items
sharing at most one label score at most 1 + 0.5^2.

The generator always draws the standard-normal noise block and scales it
by sigma afterwards, so worlds with equal seeds share labels, directions,
and identities across different noise levels.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .corpus import EmbeddingMatrix, QueryTriplet
from .errors import DimTooSmall, FormatError, NoValidTarget
from .negatives import NegativeSet

IDENTITY_NORM = 0.5

FLIPS = ("color", "shape", "both")

# Readable label names for small value counts; generated names beyond.
_COLOR_NAMES = ("red", "green", "blue", "yellow", "purple", "orange", "teal", "pink")
_SHAPE_NAMES = ("circle", "square", "triangle", "star", "hexagon", "diamond", "cross", "ring")


def default_color_values(n: int) -> tuple[str, ...]:
    if n <= len(_COLOR_NAMES):
        return _COLOR_NAMES[:n]
    return _COLOR_NAMES + tuple(f"color-{i}" for i in range(len(_COLOR_NAMES), n))


def default_shape_values(n: int) -> tuple[str, ...]:
    if n <= len(_SHAPE_NAMES):
        return _SHAPE_NAMES[:n]
    return _SHAPE_NAMES + tuple(f"shape-{i}" for i in range(len(_SHAPE_NAMES), n))


@dataclass(frozen=True)
class AttributeSchema:
    color_values: tuple[str, ...]
    shape_values: tuple[str, ...]
    nuisance_dim: int = 8

    def __post_init__(self):
        object.__setattr__(self, "color_values", tuple(self.color_values))
        object.__setattr__(self, "shape_values", tuple(self.shape_values))
        if len(self.color_values) < 2 or len(self.shape_values) < 2:
            raise FormatError("each attribute needs at least 2 values")
        if len(set(self.color_values)) != len(self.color_values):
            raise FormatError("duplicate color value names")
        if len(set(self.shape_values)) != len(self.shape_values):
            raise FormatError("duplicate shape value names")
        if self.nuisance_dim < 0:
            raise FormatError(f"nuisance_dim must be non-negative, got {self.nuisance_dim}")


@dataclass(frozen=True)
class SyntheticWorld:
    schema: AttributeSchema
    corpus: EmbeddingMatrix
    labels: tuple[tuple[str, str], ...]
    color_dirs: dict[str, np.ndarray]
    shape_dirs: dict[str, np.ndarray]
    identities: np.ndarray
    noise: np.ndarray
    noise_sigma: float
    seed: int

    def labels_of(self, item_id: str) -> tuple[str, str]:
        return self.labels[self.corpus.index(item_id)]


def _orthonormal_family(rng: np.random.Generator, k: int, dim: int) -> np.ndarray:
    """Gram-Schmidt over gaussian draws; two passes for numerical hygiene."""
    raw = rng.standard_normal((k, dim))
    basis = np.empty((k, dim))
    for i in range(k):
        v = raw[i].copy()
        for _ in range(2):
            for j in range(i):
                v -= np.dot(v, basis[j]) * basis[j]
        norm = np.linalg.norm(v)
        if norm < 1e-10:
            raise FormatError("degenerate direction draw; change the seed")
        basis[i] = v / norm
    return basis


def _item_ids(n_items: int) -> list[str]:
    width = max(6, len(str(n_items - 1)))
    return [f"item-{i:0{width}d}" for i in range(n_items)]


def generate_world(
    schema: AttributeSchema,
    n_items: int,
    dim: int,
    noise_sigma: float = 0.1,
    seed: int = 0,
) -> SyntheticWorld:
    """Deterministic under (all arguments); rng draw order is fixed as
    directions, labels, identities, noise."""
    if n_items < 1:
        raise FormatError(f"n_items must be positive, got {n_items}")
    if noise_sigma < 0.0:
        raise FormatError(f"noise_sigma must be non-negative, got {noise_sigma}")
    n_c = len(schema.color_values)
    n_s = len(schema.shape_values)
    need = n_c + n_s + schema.nuisance_dim
    if dim < need:
        raise DimTooSmall(
            f"dim {dim} cannot hold {n_c} color + {n_s} shape + "
            f"{schema.nuisance_dim} nuisance directions"
        )
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0]))
    family = _orthonormal_family(rng, need, dim)
    color_dirs = {v: family[i] for i, v in enumerate(schema.color_values)}
    shape_dirs = {v: family[n_c + i] for i, v in enumerate(schema.shape_values)}
    nuisance_basis = family[n_c + n_s:]

    color_idx = rng.integers(n_c, size=n_items)
    shape_idx = rng.integers(n_s, size=n_items)
    labels = tuple(
        (schema.color_values[c], schema.shape_values[s]) for c, s in zip(color_idx, shape_idx)
    )

    if schema.nuisance_dim > 0:
        coeffs = rng.standard_normal((n_items, schema.nuisance_dim))
        norms = np.linalg.norm(coeffs, axis=1, keepdims=True)
        if np.any(norms == 0.0):
            raise FormatError("degenerate identity draw; change the seed")
        identities = (coeffs / norms * IDENTITY_NORM) @ nuisance_basis
    else:
        identities = np.zeros((n_items, dim))

    noise = rng.standard_normal((n_items, dim)) * noise_sigma

    data = np.empty((n_items, dim))
    for i in range(n_items):
        c, s = labels[i]
        data[i] = color_dirs[c] + shape_dirs[s] + identities[i] + noise[i]
    corpus = EmbeddingMatrix(_item_ids(n_items), data)
    return SyntheticWorld(
        schema=schema,
        corpus=corpus,
        labels=labels,
        color_dirs=color_dirs,
        shape_dirs=shape_dirs,
        identities=identities,
        noise=noise,
        noise_sigma=noise_sigma,
        seed=seed,
    )


def _modified_labels(
    world: SyntheticWorld,
    ref_index: int,
    flip: str,
    rng: np.random.Generator,
) -> tuple[str, str]:
    """New label pair after flipping; flipped values always change."""
    color, shape = world.labels[ref_index]
    if flip in ("color", "both"):
        options = [v for v in world.schema.color_values if v != color]
        color = options[int(rng.integers(len(options)))]
    if flip in ("shape", "both"):
        options = [v for v in world.schema.shape_values if v != shape]
        shape = options[int(rng.integers(len(options)))]
    return color, shape


def generate_triplets(
    world: SyntheticWorld,
    n_queries: int,
    flip: str = "color",
    seed: int = 0,
    subset_size: int = 0,
    stream: int = 0,
) -> list[QueryTriplet]:
    """Build queries whose text embedding is the exact label-delta vector.

    The target is the item carrying the modified label pair whose identity
    is nearest the reference's (ties to the smaller id). With subset_size
    >= 2, each triplet also gets a shortlist of the target plus its nearest
    corpus items for subset-restricted recall. ``stream`` separates splits
    drawn from the same seed (train 0, eval 1, ...).
    """
    if flip not in FLIPS:
        raise FormatError(f"flip must be one of {FLIPS}, got {flip!r}")
    if n_queries < 1:
        raise FormatError(f"n_queries must be positive, got {n_queries}")
    if subset_size == 1 or subset_size < 0:
        raise FormatError(f"subset_size must be 0 or >= 2, got {subset_size}")
    n = world.corpus.count
    if subset_size > 0 and subset_size > n - 1:
        raise FormatError(f"subset_size {subset_size} exceeds corpus minus ref")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 3, stream]))
    ids = world.corpus.ids
    unit = world.corpus.unit_rows()
    out: list[QueryTriplet] = []
    for _ in range(n_queries):
        ref = int(rng.integers(n))
        old_color, old_shape = world.labels[ref]
        new_color, new_shape = _modified_labels(world, ref, flip, rng)
        text = np.zeros(world.corpus.dim)
        attr_embs: dict[str, np.ndarray] = {}
        if new_color != old_color:
            text = text + (world.color_dirs[new_color] - world.color_dirs[old_color])
            attr_embs["color"] = world.color_dirs[new_color]
        if new_shape != old_shape:
            text = text + (world.shape_dirs[new_shape] - world.shape_dirs[old_shape])
            attr_embs["shape"] = world.shape_dirs[new_shape]
        candidates = [
            i for i in range(n) if world.labels[i] == (new_color, new_shape)
        ]
        if not candidates:
            raise NoValidTarget(
                f"no item carries labels ({new_color}, {new_shape}) for ref {ids[ref]!r}"
            )
        affinity = world.identities[candidates] @ world.identities[ref]
        best = max(range(len(candidates)), key=lambda j: (affinity[j], -candidates[j]))
        target = candidates[best]
        subset_ids = None
        if subset_size >= 2:
            sims = unit @ unit[target]
            order = np.lexsort((np.array(ids), -sims))
            shortlist = [i for i in order if i != target and i != ref]
            subset_ids = tuple(
                [ids[target]] + [ids[i] for i in shortlist[:subset_size - 1]]
            )
        out.append(
            QueryTriplet(
                ref_id=ids[ref],
                text_emb=text,
                attr_embs=attr_embs,
                target_id=ids[target],
                subset_ids=subset_ids,
            )
        )
    return out


def ideal_query(world: SyntheticWorld, triplet: QueryTriplet) -> np.ndarray:
    """Oracle composition: reference embedding plus the exact text delta."""
    return world.corpus.row(triplet.ref_id) + triplet.text_emb


def relevant_set(world: SyntheticWorld, triplet: QueryTriplet) -> frozenset[str]:
    """All items whose labels equal the target's labels; contains the target."""
    want = world.labels_of(triplet.target_id)
    return frozenset(
        item for item, labels in zip(world.corpus.ids, world.labels) if labels == want
    )


def false_negative_rate(
    sets: Sequence[NegativeSet],
    world: SyntheticWorld,
    triplets: Sequence[QueryTriplet],
) -> float:
    """Pooled fraction of negative-set members that are actually relevant
    to their query; 0.0 when no sets have members."""
    if len(sets) != len(triplets):
        raise FormatError(f"{len(sets)} sets but {len(triplets)} triplets")
    member_total = 0
    relevant_total = 0
    for nset, triplet in zip(sets, triplets):
        relevant = relevant_set(world, triplet)
        member_total += len(nset.member_ids)
        relevant_total += sum(1 for m in nset.member_ids if m in relevant)
    if member_total == 0:
        return 0.0
    return relevant_total / member_total


def write_labels(path: str | Path, world: SyntheticWorld) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["item_id", "color", "shape"])
        for item, (color, shape) in zip(world.corpus.ids, world.labels):
            writer.writerow([item, color, shape])


def load_labels(path: str | Path) -> dict[str, tuple[str, str]]:
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != ["item_id", "color", "shape"]:
            raise FormatError(f"{path}: unexpected header {header}")
        out = {}
        for row in reader:
            if len(row) != 3:
                raise FormatError(f"{path}: malformed row {row}")
            if row[0] in out:
                raise FormatError(f"{path}: duplicate item id {row[0]!r}")
            out[row[0]] = (row[1], row[2])
    return out
