"""Query composition.

A query is built from the reference embedding and the modification text,
then shifted along learned per-attribute directions:

    q       = W_base @ concat(e_ref, e_text) + b_base
    q_attr  = W_attr @ attr_emb          (zero vector when the attribute
                                          is absent from the triplet)
    q_star  = q + w_color * q_color + w_shape * q_shape

The scalar attribute weights are kept non-negative by storing raw values
and mapping them through softplus.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import ATTRIBUTES, EmbeddingMatrix, QueryTriplet
from .errors import DimMismatch


def softplus(x: float | np.ndarray) -> float | np.ndarray:
    """log(1 + exp(x)), stable for large |x|."""
    return np.logaddexp(0.0, x)


@dataclass
class AttributeWeights:
    """Raw (unconstrained) weight parameters, one per attribute."""

    rho_color: float = 0.0
    rho_shape: float = 0.0

    @property
    def color(self) -> float:
        return float(softplus(self.rho_color))

    @property
    def shape(self) -> float:
        return float(softplus(self.rho_shape))

    def value(self, attr: str) -> float:
        if attr == "color":
            return self.color
        if attr == "shape":
            return self.shape
        raise KeyError(attr)

    def raw(self, attr: str) -> float:
        if attr == "color":
            return self.rho_color
        if attr == "shape":
            return self.rho_shape
        raise KeyError(attr)


@dataclass
class CompositionHead:
    """Linear maps that turn a triplet into query vectors.

    w_base: (d, 2d), b_base: (d,), w_color / w_shape: (d, d).
    """

    w_base: np.ndarray
    b_base: np.ndarray
    w_color: np.ndarray
    w_shape: np.ndarray

    def __post_init__(self):
        self.w_base = np.asarray(self.w_base, dtype=np.float64)
        self.b_base = np.asarray(self.b_base, dtype=np.float64)
        self.w_color = np.asarray(self.w_color, dtype=np.float64)
        self.w_shape = np.asarray(self.w_shape, dtype=np.float64)
        d = self.b_base.shape[0]
        if self.w_base.shape != (d, 2 * d):
            raise DimMismatch(f"w_base shape {self.w_base.shape}, expected {(d, 2 * d)}")
        if self.w_color.shape != (d, d):
            raise DimMismatch(f"w_color shape {self.w_color.shape}, expected {(d, d)}")
        if self.w_shape.shape != (d, d):
            raise DimMismatch(f"w_shape shape {self.w_shape.shape}, expected {(d, d)}")

    @property
    def dim(self) -> int:
        return self.b_base.shape[0]

    def attr_map(self, attr: str) -> np.ndarray:
        if attr == "color":
            return self.w_color
        if attr == "shape":
            return self.w_shape
        raise KeyError(attr)


@dataclass(frozen=True)
class ComposedQuery:
    """All query vectors for one triplet. Absent attributes yield zero
    vectors, which drop out of q_star regardless of the weights."""

    q: np.ndarray
    q_color: np.ndarray
    q_shape: np.ndarray
    q_star: np.ndarray

    def attr(self, name: str) -> np.ndarray:
        if name == "color":
            return self.q_color
        if name == "shape":
            return self.q_shape
        raise KeyError(name)


def forward(
    head: CompositionHead,
    weights: AttributeWeights,
    triplet: QueryTriplet,
    corpus: EmbeddingMatrix,
) -> ComposedQuery:
    d = head.dim
    if corpus.dim != d:
        raise DimMismatch(f"head dim {d} but corpus dim {corpus.dim}")
    if triplet.text_emb.shape[0] != d:
        raise DimMismatch(f"text dim {triplet.text_emb.shape[0]} but head dim {d}")
    e_ref = corpus.row(triplet.ref_id)
    e = np.concatenate([e_ref, triplet.text_emb])
    q = head.w_base @ e + head.b_base
    parts = {}
    for name in ATTRIBUTES:
        if name in triplet.attr_embs:
            parts[name] = head.attr_map(name) @ triplet.attr_embs[name]
        else:
            parts[name] = np.zeros(d)
    q_star = q + weights.color * parts["color"] + weights.shape * parts["shape"]
    return ComposedQuery(q=q, q_color=parts["color"], q_shape=parts["shape"], q_star=q_star)


def init_head(dim: int, seed: int = 0, scale: float = 0.1) -> CompositionHead:
    """Uniform [-scale, scale] initialization with a fixed draw order."""
    rng = np.random.default_rng(seed)
    w_base = rng.uniform(-scale, scale, size=(dim, 2 * dim))
    b_base = rng.uniform(-scale, scale, size=dim)
    w_color = rng.uniform(-scale, scale, size=(dim, dim))
    w_shape = rng.uniform(-scale, scale, size=(dim, dim))
    return CompositionHead(w_base=w_base, b_base=b_base, w_color=w_color, w_shape=w_shape)
