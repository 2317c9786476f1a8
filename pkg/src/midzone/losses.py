"""Loss terms and their analytic gradients.

The objective for one query, given its sampled negative, is

    L = L_kl + lambda_rank * L_main + w_color * L_color + w_shape * L_shape

where

    L_kl    = -log softmax([s_tar, s_1 .. s_K] / tau)[0]
              (KL divergence from the one-hot target distribution)
    L_main  = max(0, margin_main - s_tar + s_neg)       on q_star
    L_attr  = max(0, margin_a - cos(q_a, v_tar) + cos(q_a, v_neg))

All similarities are cosine. The KL candidates default to the whole
corpus minus the target; an explicit candidate list supports in-batch
variants.

Gradients are derived by hand and flow through every path: the base map
(via q_star), the attribute maps (via q_star, scaled by w_a, and via the
attribute hinge), and the raw weight parameters rho_a, which receive both
the composition term (w_a scales q_a inside q_star) and the loss-scaling
term (w_a multiplies L_a in the total), chained through softplus'
derivative, the logistic sigmoid. Hinge subgradients are zero at the kink.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import expit

from .compose import AttributeWeights, ComposedQuery, CompositionHead, forward
from .corpus import ATTRIBUTES, EmbeddingMatrix, QueryTriplet
from .errors import DegenerateProbability, FormatError, ZeroVector


@dataclass(frozen=True)
class LossConfig:
    tau: float = 0.07
    margin_main: float = 0.2
    margin_color: float = 0.2
    margin_shape: float = 0.2
    lambda_rank: float = 1.0

    def __post_init__(self):
        if self.tau <= 0.0:
            raise FormatError(f"tau must be positive, got {self.tau}")
        if self.lambda_rank < 0.0:
            raise FormatError(f"lambda_rank must be non-negative, got {self.lambda_rank}")

    def margin_attr(self, attr: str) -> float:
        if attr == "color":
            return self.margin_color
        if attr == "shape":
            return self.margin_shape
        raise KeyError(attr)


def softmax_temp(scores: np.ndarray, tau: float) -> np.ndarray:
    """Temperature softmax with max subtraction for stability."""
    if tau <= 0.0:
        raise FormatError(f"tau must be positive, got {tau}")
    z = np.asarray(scores, dtype=np.float64) / tau
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


def kl_one_hot(p_pred: np.ndarray) -> float:
    """KL(one_hot_at_0 || p_pred) = -log p_pred[0], using 0*log(0) := 0."""
    p = np.asarray(p_pred, dtype=np.float64)
    if p[0] == 0.0:
        raise DegenerateProbability("target probability is exactly zero")
    return float(-np.log(p[0]))


def hinge(margin: float, s_pos: float, s_neg: float) -> float:
    return float(max(0.0, margin - s_pos + s_neg))


def attr_hinge(sub_query: np.ndarray, v_tar: np.ndarray, v_neg: np.ndarray, margin: float) -> float:
    from .negatives import cosine

    return hinge(margin, cosine(sub_query, v_tar), cosine(sub_query, v_neg))


@dataclass(frozen=True)
class LossBreakdown:
    l_kl: float
    l_main: float
    l_color: float
    l_shape: float
    l_total: float

    def attr(self, name: str) -> float:
        if name == "color":
            return self.l_color
        if name == "shape":
            return self.l_shape
        raise KeyError(name)


@dataclass(frozen=True)
class GradientBundle:
    """Gradients matching the CompositionHead / AttributeWeights layout."""

    d_w_base: np.ndarray
    d_b_base: np.ndarray
    d_w_color: np.ndarray
    d_w_shape: np.ndarray
    d_rho_color: float
    d_rho_shape: float


def _unit(v: np.ndarray) -> tuple[np.ndarray, float]:
    n = float(np.linalg.norm(v))
    if n == 0.0:
        raise ZeroVector("zero vector has no direction")
    return v / n, n


def _d_cos_dq(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Gradient of cos(q, v) with respect to q."""
    q_hat, qn = _unit(q)
    v_hat, _ = _unit(v)
    c = float(np.dot(q_hat, v_hat))
    return (v_hat - c * q_hat) / qn


def _candidate_positions(
    tpos: int,
    corpus: EmbeddingMatrix,
    kl_candidate_ids: Sequence[str] | None,
) -> np.ndarray:
    """Corpus positions of the KL candidates, target excluded."""
    if kl_candidate_ids is None:
        pos = np.arange(corpus.count)
        return pos[pos != tpos]
    pos = np.fromiter(
        (corpus.index(c) for c in kl_candidate_ids), dtype=np.int64, count=len(kl_candidate_ids)
    )
    return pos[pos != tpos]


def _loss_and_grad(
    head: CompositionHead,
    weights: AttributeWeights,
    config: LossConfig,
    triplet: QueryTriplet,
    corpus: EmbeddingMatrix,
    negative_id: str,
    kl_candidate_ids: Sequence[str] | None,
    want_grad: bool,
) -> tuple[LossBreakdown, GradientBundle | None, ComposedQuery]:
    cq = forward(head, weights, triplet, corpus)
    d = head.dim
    tpos = corpus.index(triplet.target_id)
    npos = corpus.index(negative_id)
    if npos == tpos:
        raise FormatError(f"negative id {negative_id!r} equals the target")
    cand = _candidate_positions(tpos, corpus, kl_candidate_ids)

    q_hat, qn = _unit(cq.q_star)
    v_hat = corpus.unit_rows()
    s_full = v_hat @ q_hat

    s_tar = float(s_full[tpos])
    s_neg = float(s_full[npos])

    scores = np.concatenate([[s_tar], s_full[cand]])
    p = softmax_temp(scores, config.tau)
    l_kl = kl_one_hot(p)

    main_raw = config.margin_main - s_tar + s_neg
    l_main = max(0.0, main_raw)
    main_active = main_raw > 0.0

    l_attr: dict[str, float] = {}
    attr_active: dict[str, bool] = {}
    for name in ATTRIBUTES:
        qa = cq.attr(name)
        if not np.any(qa):
            # Absent attribute: its hinge is skipped entirely.
            l_attr[name] = 0.0
            attr_active[name] = False
            continue
        qa_hat, _ = _unit(qa)
        raw = (
            config.margin_attr(name)
            - float(np.dot(qa_hat, v_hat[tpos]))
            + float(np.dot(qa_hat, v_hat[npos]))
        )
        l_attr[name] = max(0.0, raw)
        attr_active[name] = raw > 0.0

    l_total = (
        l_kl
        + config.lambda_rank * l_main
        + weights.color * l_attr["color"]
        + weights.shape * l_attr["shape"]
    )
    breakdown = LossBreakdown(
        l_kl=l_kl,
        l_main=l_main,
        l_color=l_attr["color"],
        l_shape=l_attr["shape"],
        l_total=l_total,
    )
    if not want_grad:
        return breakdown, None, cq

    # dL/ds as a coefficient per corpus row. KL contributes (p0 - 1)/tau at
    # the target and p_k/tau at each candidate; the main hinge adds
    # -lambda at the target and +lambda at the negative while active.
    coeff = np.zeros(corpus.count)
    coeff[tpos] += (float(p[0]) - 1.0) / config.tau
    np.add.at(coeff, cand, p[1:] / config.tau)
    if main_active:
        coeff[tpos] += -config.lambda_rank
        coeff[npos] += config.lambda_rank

    # ds_j/dq_star = (v_hat_j - s_j * q_hat) / |q_star|; contracting with
    # the coefficients collapses the whole sum into two matvecs.
    g_qstar = (v_hat.T @ coeff - float(coeff @ s_full) * q_hat) / qn

    e_ref = corpus.row(triplet.ref_id)
    e = np.concatenate([e_ref, triplet.text_emb])
    d_w_base = np.outer(g_qstar, e)
    d_b_base = g_qstar.copy()

    d_w_attr: dict[str, np.ndarray] = {}
    d_rho: dict[str, float] = {}
    for name in ATTRIBUTES:
        if name not in triplet.attr_embs:
            d_w_attr[name] = np.zeros((d, d))
            d_rho[name] = 0.0
            continue
        qa = cq.attr(name)
        w_a = weights.value(name)
        # Path through q_star: dL/dq_a += w_a * g_qstar. Path through the
        # attribute hinge while active, also carrying the w_a factor that
        # scales L_a inside the total.
        g_qa = w_a * g_qstar
        if attr_active[name] and np.any(qa):
            g_hinge = -_d_cos_dq(qa, corpus.data[tpos]) + _d_cos_dq(qa, corpus.data[npos])
            g_qa = g_qa + w_a * g_hinge
        d_w_attr[name] = np.outer(g_qa, triplet.attr_embs[name])
        # rho gets both paths: composition (g_qstar . q_a) plus the direct
        # multiplier on the hinge value, chained through softplus'.
        d_rho[name] = float(expit(weights.raw(name))) * (
            float(np.dot(g_qstar, qa)) + l_attr[name]
        )

    grads = GradientBundle(
        d_w_base=d_w_base,
        d_b_base=d_b_base,
        d_w_color=d_w_attr["color"],
        d_w_shape=d_w_attr["shape"],
        d_rho_color=d_rho["color"],
        d_rho_shape=d_rho["shape"],
    )
    return breakdown, grads, cq


def total_loss(
    head: CompositionHead,
    weights: AttributeWeights,
    config: LossConfig,
    triplet: QueryTriplet,
    corpus: EmbeddingMatrix,
    negative_id: str,
    kl_candidate_ids: Sequence[str] | None = None,
) -> LossBreakdown:
    breakdown, _, _ = _loss_and_grad(
        head, weights, config, triplet, corpus, negative_id, kl_candidate_ids, want_grad=False
    )
    return breakdown


def backward(
    head: CompositionHead,
    weights: AttributeWeights,
    config: LossConfig,
    triplet: QueryTriplet,
    corpus: EmbeddingMatrix,
    negative_id: str,
    kl_candidate_ids: Sequence[str] | None = None,
) -> tuple[LossBreakdown, GradientBundle]:
    breakdown, grads, _ = _loss_and_grad(
        head, weights, config, triplet, corpus, negative_id, kl_candidate_ids, want_grad=True
    )
    assert grads is not None
    return breakdown, grads
