"""Training driver.

The run is split into an optional warm-up (negatives drawn uniformly from
the entire corpus minus the target) followed by equal-length intervals.
At the first epoch of each interval every query's negative set is rebuilt
from the current model's scores; sampling then draws from the frozen set
until the next refresh. Optimization is decoupled-weight-decay adaptive
gradient descent under a stepwise cosine learning-rate schedule.

All randomness flows from the run seed via counter-split streams: stream 1
initializes parameters, stream 2 drives epoch shuffles and negative draws.
Draws happen sequentially on the main thread in a fixed order, so the
trajectory is reproducible bit-for-bit regardless of the worker count used
for loss evaluation.

The size log kept for negative-set diagnostics freezes, at the first
refresh, each query's realized gap window (the [min, max] gap over its
members; the configured band itself in absolute mode) and from then on
records how many candidates fall inside that frozen window. Under a
quantile band the raw member count is constant by construction, so only
the frozen-window count reveals how the gap distribution tightens as
training sharpens the space. A warm-up run contributes a leading row with
the full candidate-pool size.
"""

from __future__ import annotations

import hashlib
import json
import math
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .compose import AttributeWeights, CompositionHead, forward, init_head
from .corpus import EmbeddingMatrix, QueryTriplet, triplets_fingerprint
from .errors import (
    BadMagic,
    ConfigMismatch,
    FormatError,
    NoCandidates,
    NonFiniteEntry,
    ShapeMismatch,
    TruncatedFile,
)
from .losses import GradientBundle, LossConfig, backward
from .negatives import MidZoneConfig, RefreshSchedule, _fallback_candidate, mid_zone, score_all

CHECKPOINT_MAGIC = b"DQE1"
CHECKPOINT_VERSION = 1

# Fixed parameter order for optimizer traversal and checkpoint blobs.
PARAM_KEYS = ("w_base", "b_base", "w_color", "w_shape", "rho")

KL_MODES = ("corpus", "batch")


def cosine_lr(step: int, total_steps: int, lr_base: float) -> float:
    """Stepwise cosine decay from lr_base at step 0 to 0 at total_steps."""
    if total_steps < 1:
        raise FormatError(f"total_steps must be positive, got {total_steps}")
    if not 0 <= step <= total_steps:
        raise FormatError(f"step {step} outside [0, {total_steps}]")
    return lr_base * 0.5 * (1.0 + math.cos(math.pi * step / total_steps))


@dataclass
class OptimizerState:
    """First/second moment accumulators plus hyperparameters."""

    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int
    lr_base: float
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    weight_decay: float = 1e-2


def init_optimizer(
    params: dict[str, np.ndarray],
    lr_base: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    epsilon: float = 1e-8,
    weight_decay: float = 1e-2,
) -> OptimizerState:
    return OptimizerState(
        m={k: np.zeros_like(p) for k, p in params.items()},
        v={k: np.zeros_like(p) for k, p in params.items()},
        t=0,
        lr_base=lr_base,
        beta1=beta1,
        beta2=beta2,
        epsilon=epsilon,
        weight_decay=weight_decay,
    )


def adamw_step(
    state: OptimizerState,
    grads: dict[str, np.ndarray],
    params: dict[str, np.ndarray],
    lr_t: float,
) -> None:
    """One decoupled-weight-decay update, in place on params and state.

    m <- b1 m + (1-b1) g;  v <- b2 v + (1-b2) g^2;  bias-corrected;
    theta <- theta - lr_t (m_hat / (sqrt(v_hat) + eps) + wd * theta).
    """
    state.t += 1
    t = state.t
    for key in params:
        if key not in grads:
            raise ShapeMismatch(f"gradient missing for parameter {key!r}")
        g = np.asarray(grads[key], dtype=np.float64)
        p = params[key]
        if g.shape != p.shape:
            raise ShapeMismatch(f"{key}: gradient shape {g.shape} != parameter shape {p.shape}")
        m = state.m[key]
        v = state.v[key]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        m_hat = m / (1.0 - state.beta1 ** t)
        v_hat = v / (1.0 - state.beta2 ** t)
        p -= lr_t * (m_hat / (np.sqrt(v_hat) + state.epsilon) + state.weight_decay * p)


@dataclass(frozen=True)
class TrainConfig:
    total_epochs: int
    batch_size: int = 128
    seed: int = 0
    warmup_epochs: int = 0
    num_intervals: int = 5
    loss: LossConfig = LossConfig()
    midzone: MidZoneConfig = MidZoneConfig()
    lr_base: float = 1e-3
    weight_decay: float = 1e-2
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    init_scale: float = 0.1
    init_rho: float = 0.0
    kl_candidates: str = "corpus"
    freeze_sample: bool = False

    def __post_init__(self):
        if self.batch_size < 1:
            raise FormatError(f"batch_size must be positive, got {self.batch_size}")
        if self.lr_base <= 0.0:
            raise FormatError(f"lr_base must be positive, got {self.lr_base}")
        if self.weight_decay < 0.0:
            raise FormatError(f"weight_decay must be non-negative, got {self.weight_decay}")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise FormatError(f"betas must lie in [0, 1), got {self.beta1}, {self.beta2}")
        if self.epsilon <= 0.0:
            raise FormatError(f"epsilon must be positive, got {self.epsilon}")
        if self.init_scale < 0.0:
            raise FormatError(f"init_scale must be non-negative, got {self.init_scale}")
        if self.kl_candidates not in KL_MODES:
            raise FormatError(f"kl_candidates must be one of {KL_MODES}, got {self.kl_candidates!r}")
        # Also validates total_epochs / warmup / intervals consistency.
        self.schedule  # noqa: B018

    @property
    def schedule(self) -> RefreshSchedule:
        return RefreshSchedule(
            total_epochs=self.total_epochs,
            warmup_epochs=self.warmup_epochs,
            num_intervals=self.num_intervals,
        )


def config_to_dict(config: TrainConfig) -> dict:
    """Flat key/value view with canonical types; the same keys appear in
    JSON config files."""
    return {
        "total_epochs": int(config.total_epochs),
        "batch_size": int(config.batch_size),
        "seed": int(config.seed),
        "warmup_epochs": int(config.warmup_epochs),
        "num_intervals": int(config.num_intervals),
        "lr_base": float(config.lr_base),
        "weight_decay": float(config.weight_decay),
        "beta1": float(config.beta1),
        "beta2": float(config.beta2),
        "epsilon": float(config.epsilon),
        "init_scale": float(config.init_scale),
        "init_rho": float(config.init_rho),
        "kl_candidates": str(config.kl_candidates),
        "freeze_sample": bool(config.freeze_sample),
        "tau": float(config.loss.tau),
        "margin_main": float(config.loss.margin_main),
        "margin_color": float(config.loss.margin_color),
        "margin_shape": float(config.loss.margin_shape),
        "lambda_rank": float(config.loss.lambda_rank),
        "mode": str(config.midzone.mode),
        "alpha": float(config.midzone.alpha),
        "beta": float(config.midzone.beta),
    }


_LOSS_KEYS = ("tau", "margin_main", "margin_color", "margin_shape", "lambda_rank")
_MIDZONE_KEYS = ("mode", "alpha", "beta")
_INT_KEYS = ("total_epochs", "batch_size", "seed", "warmup_epochs", "num_intervals")
_FLOAT_KEYS = (
    "lr_base", "weight_decay", "beta1", "beta2", "epsilon", "init_scale", "init_rho",
    "tau", "margin_main", "margin_color", "margin_shape", "lambda_rank", "alpha", "beta",
)
_STR_KEYS = ("kl_candidates", "mode")
_BOOL_KEYS = ("freeze_sample",)


def _coerce_config_values(doc: dict) -> dict:
    """Pin each key to its canonical type so equal configs hash equally
    regardless of whether a value arrived as 1 or 1.0."""
    out = {}
    for key, value in doc.items():
        if key in _INT_KEYS:
            if isinstance(value, bool) or not isinstance(value, int):
                raise FormatError(f"config key {key!r} must be an integer, got {value!r}")
            out[key] = int(value)
        elif key in _FLOAT_KEYS:
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise FormatError(f"config key {key!r} must be a number, got {value!r}")
            out[key] = float(value)
        elif key in _STR_KEYS:
            if not isinstance(value, str):
                raise FormatError(f"config key {key!r} must be a string, got {value!r}")
            out[key] = value
        elif key in _BOOL_KEYS:
            if not isinstance(value, bool):
                raise FormatError(f"config key {key!r} must be a boolean, got {value!r}")
            out[key] = value
        else:
            out[key] = value
    return out


def config_from_dict(doc: dict) -> TrainConfig:
    """Inverse of config_to_dict; unknown keys are rejected."""
    # total_epochs here only seeds the defaults template and is always
    # overwritten; 5 keeps the template itself valid for the default schedule.
    base = config_to_dict(TrainConfig(total_epochs=5))
    unknown = set(doc) - set(base)
    if unknown:
        raise FormatError(f"unknown config keys {sorted(unknown)}")
    if "total_epochs" not in doc:
        raise FormatError("config requires total_epochs")
    merged = dict(base)
    merged.update(_coerce_config_values(doc))
    loss = LossConfig(**{k: merged[k] for k in _LOSS_KEYS})
    midzone = MidZoneConfig(**{k: merged[k] for k in _MIDZONE_KEYS})
    rest = {k: v for k, v in merged.items() if k not in _LOSS_KEYS + _MIDZONE_KEYS}
    return TrainConfig(loss=loss, midzone=midzone, **rest)


def config_hash(config: TrainConfig) -> str:
    doc = json.dumps(config_to_dict(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(doc.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class TrainLogRow:
    epoch: int
    step: int
    l_kl: float
    l_main: float
    l_color: float
    l_shape: float
    l_total: float
    lr: float
    w_color: float
    w_shape: float

    def as_list(self) -> list:
        return [
            self.epoch, self.step, self.l_kl, self.l_main, self.l_color,
            self.l_shape, self.l_total, self.lr, self.w_color, self.w_shape,
        ]


TRAIN_LOG_COLUMNS = (
    "epoch", "step", "l_kl", "l_main", "l_color", "l_shape",
    "l_total", "lr", "w_color", "w_shape",
)


@dataclass(frozen=True)
class RefreshLogRow:
    epoch: int
    mean_set_size: float

    def as_list(self) -> list:
        return [self.epoch, self.mean_set_size]


REFRESH_LOG_COLUMNS = ("epoch", "mean_set_size")


@dataclass
class Checkpoint:
    """Complete resumable training state.

    Negative-set members, fallbacks, and frozen samples are stored as
    corpus row positions; the corpus fingerprint guards against resuming
    with mismatched data. Logs are cumulative from epoch 0 so a resumed
    run ends with the same artifacts as an uninterrupted one.
    """

    config: TrainConfig
    epoch: int
    global_step: int
    params: dict[str, np.ndarray]
    opt_m: dict[str, np.ndarray]
    opt_v: dict[str, np.ndarray]
    opt_t: int
    rng_state: dict
    phase: str
    sets_defined_at_epoch: int | None
    set_members: list[np.ndarray] | None
    set_fallbacks: np.ndarray | None
    frozen_bounds: np.ndarray | None
    frozen_samples: np.ndarray | None
    corpus_fingerprint: str
    triplets_fingerprint: str
    train_log: list[TrainLogRow] = field(default_factory=list)
    refresh_log: list[RefreshLogRow] = field(default_factory=list)

    @property
    def head(self) -> CompositionHead:
        return CompositionHead(
            w_base=self.params["w_base"],
            b_base=self.params["b_base"],
            w_color=self.params["w_color"],
            w_shape=self.params["w_shape"],
        )

    @property
    def weights(self) -> AttributeWeights:
        return AttributeWeights(
            rho_color=float(self.params["rho"][0]),
            rho_shape=float(self.params["rho"][1]),
        )


@dataclass(frozen=True)
class TrainResult:
    checkpoint: Checkpoint
    train_log: list[TrainLogRow]
    refresh_log: list[RefreshLogRow]


def _initial_params(config: TrainConfig, dim: int) -> dict[str, np.ndarray]:
    head = init_head(dim, np.random.SeedSequence([config.seed, 1]), config.init_scale)
    return {
        "w_base": head.w_base,
        "b_base": head.b_base,
        "w_color": head.w_color,
        "w_shape": head.w_shape,
        "rho": np.array([config.init_rho, config.init_rho], dtype=np.float64),
    }


def _grads_to_dict(g: GradientBundle) -> dict[str, np.ndarray]:
    return {
        "w_base": g.d_w_base,
        "b_base": g.d_b_base,
        "w_color": g.d_w_color,
        "w_shape": g.d_w_shape,
        "rho": np.array([g.d_rho_color, g.d_rho_shape], dtype=np.float64),
    }


def _head_of(params: dict[str, np.ndarray]) -> CompositionHead:
    return CompositionHead(
        w_base=params["w_base"],
        b_base=params["b_base"],
        w_color=params["w_color"],
        w_shape=params["w_shape"],
    )


def _weights_of(params: dict[str, np.ndarray]) -> AttributeWeights:
    return AttributeWeights(
        rho_color=float(params["rho"][0]),
        rho_shape=float(params["rho"][1]),
    )


def _count_in_window(delta: np.ndarray, lo: float, hi: float) -> int:
    mask = np.isfinite(delta) & (delta >= lo) & (delta <= hi)
    return int(mask.sum())


def train(
    config: TrainConfig,
    triplets: Sequence[QueryTriplet],
    corpus: EmbeddingMatrix,
    *,
    threads: int = 1,
    resume: Checkpoint | None = None,
    stop_after_epoch: int | None = None,
) -> TrainResult:
    """Run the full procedure; with stop_after_epoch, halt once that many
    epochs have completed (checkpoint then resumes the exact trajectory)."""
    if not triplets:
        raise FormatError("no training triplets")
    if corpus.count < 2:
        raise NoCandidates("corpus must hold at least one non-target item")
    if threads < 1:
        raise FormatError(f"threads must be positive, got {threads}")
    n_q = len(triplets)
    corpus_fp = corpus.fingerprint()
    triplets_fp = triplets_fingerprint(triplets)
    target_pos = np.array([corpus.index(t.target_id) for t in triplets], dtype=np.int64)

    if resume is None:
        params = _initial_params(config, corpus.dim)
        opt = init_optimizer(
            params, config.lr_base, config.beta1, config.beta2,
            config.epsilon, config.weight_decay,
        )
        rng = np.random.default_rng(np.random.SeedSequence([config.seed, 2]))
        start_epoch = 0
        global_step = 0
        phase = "warmup"
        sets_defined_at_epoch: int | None = None
        set_members: list[np.ndarray] | None = None
        set_fallbacks: np.ndarray | None = None
        frozen_bounds: np.ndarray | None = None
        frozen_samples: np.ndarray | None = None
        train_log: list[TrainLogRow] = []
        refresh_log: list[RefreshLogRow] = []
        if config.warmup_epochs > 0:
            # Warm-up pool is the whole corpus minus the target for every
            # query, hence a constant mean of N-1.
            refresh_log.append(RefreshLogRow(epoch=0, mean_set_size=float(corpus.count - 1)))
    else:
        if config_hash(resume.config) != config_hash(config):
            raise ConfigMismatch("checkpoint was produced under a different configuration")
        if resume.corpus_fingerprint != corpus_fp:
            raise ConfigMismatch("checkpoint was produced against a different corpus")
        if resume.triplets_fingerprint != triplets_fp:
            raise ConfigMismatch("checkpoint was produced against different triplets")
        params = {k: resume.params[k].copy() for k in PARAM_KEYS}
        opt = OptimizerState(
            m={k: resume.opt_m[k].copy() for k in PARAM_KEYS},
            v={k: resume.opt_v[k].copy() for k in PARAM_KEYS},
            t=resume.opt_t,
            lr_base=config.lr_base,
            beta1=config.beta1,
            beta2=config.beta2,
            epsilon=config.epsilon,
            weight_decay=config.weight_decay,
        )
        rng = np.random.default_rng()
        rng.bit_generator.state = resume.rng_state
        start_epoch = resume.epoch
        global_step = resume.global_step
        phase = resume.phase
        sets_defined_at_epoch = resume.sets_defined_at_epoch
        set_members = (
            [m.copy() for m in resume.set_members] if resume.set_members is not None else None
        )
        set_fallbacks = resume.set_fallbacks.copy() if resume.set_fallbacks is not None else None
        frozen_bounds = resume.frozen_bounds.copy() if resume.frozen_bounds is not None else None
        frozen_samples = (
            resume.frozen_samples.copy() if resume.frozen_samples is not None else None
        )
        train_log = list(resume.train_log)
        refresh_log = list(resume.refresh_log)

    refresh_at = set(config.schedule.refresh_epochs())
    steps_per_epoch = math.ceil(n_q / config.batch_size)
    total_steps = config.total_epochs * steps_per_epoch

    if stop_after_epoch is not None and stop_after_epoch < 0:
        raise FormatError(f"stop_after_epoch must be non-negative, got {stop_after_epoch}")
    end_epoch = (
        config.total_epochs
        if stop_after_epoch is None
        else min(stop_after_epoch, config.total_epochs)
    )
    completed = start_epoch

    for epoch in range(start_epoch, end_epoch):
        if epoch in refresh_at:
            # Barrier: rebuild every negative set from current scores.
            head = _head_of(params)
            weights = _weights_of(params)
            members: list[np.ndarray] = []
            fallbacks = np.full(n_q, -1, dtype=np.int64)
            deltas: list[np.ndarray] = []
            for qi, triplet in enumerate(triplets):
                cq = forward(head, weights, triplet, corpus)
                table = score_all(cq.q_star, corpus, triplet.target_id, query_index=qi)
                nset = mid_zone(table, config.midzone, epoch=epoch)
                pos = np.fromiter(
                    (corpus.index(m) for m in nset.member_ids),
                    dtype=np.int64,
                    count=len(nset.member_ids),
                )
                members.append(pos)
                if pos.size == 0:
                    fallbacks[qi] = corpus.index(_fallback_candidate(table, config.midzone))
                deltas.append(table.delta)
            if frozen_bounds is None:
                frozen_bounds = np.empty((n_q, 2), dtype=np.float64)
                for qi in range(n_q):
                    if config.midzone.mode == "absolute":
                        frozen_bounds[qi] = (config.midzone.alpha, config.midzone.beta)
                    elif members[qi].size:
                        member_deltas = deltas[qi][members[qi]]
                        frozen_bounds[qi] = (member_deltas.min(), member_deltas.max())
                    else:
                        fb = deltas[qi][fallbacks[qi]]
                        frozen_bounds[qi] = (fb, fb)
            counts = [
                _count_in_window(deltas[qi], frozen_bounds[qi, 0], frozen_bounds[qi, 1])
                for qi in range(n_q)
            ]
            refresh_log.append(RefreshLogRow(epoch=epoch, mean_set_size=float(np.mean(counts))))
            set_members = members
            set_fallbacks = fallbacks
            sets_defined_at_epoch = epoch
            phase = "midzone"
            if config.freeze_sample:
                frozen_samples = np.empty(n_q, dtype=np.int64)
                for qi in range(n_q):
                    mem = set_members[qi]
                    if mem.size:
                        frozen_samples[qi] = mem[int(rng.integers(mem.size))]
                    else:
                        frozen_samples[qi] = set_fallbacks[qi]

        perm = rng.permutation(n_q)
        head = _head_of(params)
        weights = _weights_of(params)
        for b0 in range(0, n_q, config.batch_size):
            batch = perm[b0:b0 + config.batch_size]
            negs = np.empty(batch.size, dtype=np.int64)
            for k, qi in enumerate(batch):
                if phase == "warmup":
                    draw = int(rng.integers(corpus.count - 1))
                    negs[k] = draw + (draw >= target_pos[qi])
                elif config.freeze_sample:
                    negs[k] = frozen_samples[qi]
                else:
                    mem = set_members[qi]
                    if mem.size:
                        negs[k] = mem[int(rng.integers(mem.size))]
                    else:
                        negs[k] = set_fallbacks[qi]
            if config.kl_candidates == "batch":
                kl_ids = [triplets[qi].target_id for qi in batch]
            else:
                kl_ids = None

            def eval_one(item: tuple[int, int]):
                qi, npos = item
                return backward(
                    head, weights, config.loss, triplets[qi], corpus,
                    corpus.ids[npos], kl_candidate_ids=kl_ids,
                )

            work = list(zip((int(q) for q in batch), (int(n) for n in negs)))
            if threads > 1:
                with ThreadPoolExecutor(max_workers=threads) as pool:
                    results = list(pool.map(eval_one, work))
            else:
                results = [eval_one(w) for w in work]

            # Fixed-order reduction keeps the mean bit-stable.
            mean_grads = {k: np.zeros_like(params[k]) for k in PARAM_KEYS}
            sums = np.zeros(5)
            for breakdown, bundle in results:
                g = _grads_to_dict(bundle)
                for key in PARAM_KEYS:
                    mean_grads[key] += g[key]
                sums += (
                    breakdown.l_kl, breakdown.l_main, breakdown.l_color,
                    breakdown.l_shape, breakdown.l_total,
                )
            inv = 1.0 / batch.size
            for key in PARAM_KEYS:
                mean_grads[key] *= inv
            sums *= inv
            if not np.all(np.isfinite(sums)):
                raise NonFiniteEntry(f"non-finite loss at step {global_step}")

            lr_t = cosine_lr(global_step, total_steps, config.lr_base)
            row = TrainLogRow(
                epoch=epoch,
                step=global_step,
                l_kl=float(sums[0]),
                l_main=float(sums[1]),
                l_color=float(sums[2]),
                l_shape=float(sums[3]),
                l_total=float(sums[4]),
                lr=lr_t,
                w_color=weights.color,
                w_shape=weights.shape,
            )
            adamw_step(opt, mean_grads, params, lr_t)
            train_log.append(row)
            global_step += 1
            head = _head_of(params)
            weights = _weights_of(params)

        completed = epoch + 1

    checkpoint = Checkpoint(
        config=config,
        epoch=completed,
        global_step=global_step,
        params=params,
        opt_m=opt.m,
        opt_v=opt.v,
        opt_t=opt.t,
        rng_state=rng.bit_generator.state,
        phase=phase,
        sets_defined_at_epoch=sets_defined_at_epoch,
        set_members=set_members,
        set_fallbacks=set_fallbacks,
        frozen_bounds=frozen_bounds,
        frozen_samples=frozen_samples,
        corpus_fingerprint=corpus_fp,
        triplets_fingerprint=triplets_fp,
        train_log=train_log,
        refresh_log=refresh_log,
    )
    return TrainResult(checkpoint=checkpoint, train_log=train_log, refresh_log=refresh_log)


def _blob_entries(ckpt: Checkpoint) -> list[tuple[str, np.ndarray]]:
    out: list[tuple[str, np.ndarray]] = []
    for key in PARAM_KEYS:
        out.append((f"param_{key}", np.asarray(ckpt.params[key], dtype=np.float64)))
    for key in PARAM_KEYS:
        out.append((f"m_{key}", np.asarray(ckpt.opt_m[key], dtype=np.float64)))
    for key in PARAM_KEYS:
        out.append((f"v_{key}", np.asarray(ckpt.opt_v[key], dtype=np.float64)))
    if ckpt.set_members is not None:
        offsets = np.zeros(len(ckpt.set_members) + 1, dtype=np.int64)
        for i, mem in enumerate(ckpt.set_members):
            offsets[i + 1] = offsets[i] + mem.size
        flat = (
            np.concatenate(ckpt.set_members)
            if ckpt.set_members and offsets[-1] > 0
            else np.zeros(0, dtype=np.int64)
        )
        out.append(("set_offsets", offsets))
        out.append(("set_members", flat.astype(np.int64)))
        out.append(("set_fallbacks", np.asarray(ckpt.set_fallbacks, dtype=np.int64)))
    if ckpt.frozen_bounds is not None:
        out.append(("frozen_bounds", np.asarray(ckpt.frozen_bounds, dtype=np.float64)))
    if ckpt.frozen_samples is not None:
        out.append(("frozen_samples", np.asarray(ckpt.frozen_samples, dtype=np.int64)))
    return out


def save_checkpoint(path: str | Path, ckpt: Checkpoint) -> None:
    """Versioned binary container; identical state writes identical bytes."""
    path = Path(path)
    blobs = _blob_entries(ckpt)
    manifest = []
    offset = 0
    payload = []
    for name, arr in blobs:
        arr = np.ascontiguousarray(arr)
        if arr.dtype == np.float64:
            dtype = "<f8"
        elif arr.dtype == np.int64:
            dtype = "<i8"
        else:
            raise FormatError(f"unsupported blob dtype {arr.dtype} for {name}")
        raw = arr.astype(dtype).tobytes()
        manifest.append(
            {"name": name, "dtype": dtype, "shape": list(arr.shape), "offset": offset,
             "nbytes": len(raw)}
        )
        payload.append(raw)
        offset += len(raw)
    header = {
        "version": CHECKPOINT_VERSION,
        "config": config_to_dict(ckpt.config),
        "epoch": ckpt.epoch,
        "global_step": ckpt.global_step,
        "opt_t": ckpt.opt_t,
        "phase": ckpt.phase,
        "sets_defined_at_epoch": ckpt.sets_defined_at_epoch,
        "have_sets": ckpt.set_members is not None,
        "have_bounds": ckpt.frozen_bounds is not None,
        "have_frozen_samples": ckpt.frozen_samples is not None,
        "n_queries": len(ckpt.set_members) if ckpt.set_members is not None else None,
        "rng_state": ckpt.rng_state,
        "corpus_fingerprint": ckpt.corpus_fingerprint,
        "triplets_fingerprint": ckpt.triplets_fingerprint,
        "train_log": [row.as_list() for row in ckpt.train_log],
        "train_log_columns": list(TRAIN_LOG_COLUMNS),
        "refresh_log": [row.as_list() for row in ckpt.refresh_log],
        "refresh_log_columns": list(REFRESH_LOG_COLUMNS),
        "blobs": manifest,
    }
    header_raw = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    digest = bytes.fromhex(config_hash(ckpt.config))
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(struct.pack("<I", CHECKPOINT_VERSION))
        f.write(digest)
        f.write(struct.pack("<Q", len(header_raw)))
        f.write(header_raw)
        for raw in payload:
            f.write(raw)


def load_checkpoint(path: str | Path) -> Checkpoint:
    path = Path(path)
    blob = path.read_bytes()
    if blob[:4] != CHECKPOINT_MAGIC:
        raise BadMagic(f"{path}: expected {CHECKPOINT_MAGIC!r}, got {blob[:4]!r}")
    off = 4
    try:
        (version,) = struct.unpack_from("<I", blob, off)
        off += 4
        digest = blob[off:off + 32]
        if len(digest) != 32:
            raise TruncatedFile(f"{path}: header cut short")
        off += 32
        (header_len,) = struct.unpack_from("<Q", blob, off)
        off += 8
    except struct.error as e:
        raise TruncatedFile(f"{path}: header cut short") from e
    if version != CHECKPOINT_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    if off + header_len > len(blob):
        raise TruncatedFile(f"{path}: header cut short")
    try:
        header = json.loads(blob[off:off + header_len].decode("utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise FormatError(f"{path}: invalid header") from e
    off += header_len
    config = config_from_dict(header["config"])
    if config_hash(config) != digest.hex():
        raise ConfigMismatch(f"{path}: config hash disagrees with header")
    arrays: dict[str, np.ndarray] = {}
    data_end = off
    for entry in header["blobs"]:
        start = off + entry["offset"]
        end = start + entry["nbytes"]
        if end > len(blob):
            raise TruncatedFile(f"{path}: blob {entry['name']!r} cut short")
        arr = np.frombuffer(blob[start:end], dtype=entry["dtype"]).reshape(entry["shape"]).copy()
        arrays[entry["name"]] = arr
        data_end = max(data_end, end)
    if data_end != len(blob):
        raise TruncatedFile(f"{path}: {len(blob) - data_end} trailing bytes")

    params = {k: arrays[f"param_{k}"] for k in PARAM_KEYS}
    opt_m = {k: arrays[f"m_{k}"] for k in PARAM_KEYS}
    opt_v = {k: arrays[f"v_{k}"] for k in PARAM_KEYS}
    if header["have_sets"]:
        offsets = arrays["set_offsets"].astype(np.int64)
        flat = arrays["set_members"].astype(np.int64)
        set_members = [
            flat[offsets[i]:offsets[i + 1]].copy() for i in range(len(offsets) - 1)
        ]
        set_fallbacks = arrays["set_fallbacks"].astype(np.int64)
    else:
        set_members = None
        set_fallbacks = None
    frozen_bounds = arrays["frozen_bounds"] if header["have_bounds"] else None
    frozen_samples = (
        arrays["frozen_samples"].astype(np.int64) if header["have_frozen_samples"] else None
    )
    train_log = [
        TrainLogRow(
            epoch=int(r[0]), step=int(r[1]), l_kl=r[2], l_main=r[3], l_color=r[4],
            l_shape=r[5], l_total=r[6], lr=r[7], w_color=r[8], w_shape=r[9],
        )
        for r in header["train_log"]
    ]
    refresh_log = [
        RefreshLogRow(epoch=int(r[0]), mean_set_size=float(r[1])) for r in header["refresh_log"]
    ]
    return Checkpoint(
        config=config,
        epoch=int(header["epoch"]),
        global_step=int(header["global_step"]),
        params=params,
        opt_m=opt_m,
        opt_v=opt_v,
        opt_t=int(header["opt_t"]),
        rng_state=header["rng_state"],
        phase=str(header["phase"]),
        sets_defined_at_epoch=(
            int(header["sets_defined_at_epoch"])
            if header["sets_defined_at_epoch"] is not None
            else None
        ),
        set_members=set_members,
        set_fallbacks=set_fallbacks,
        frozen_bounds=frozen_bounds,
        frozen_samples=frozen_samples,
        corpus_fingerprint=str(header["corpus_fingerprint"]),
        triplets_fingerprint=str(header["triplets_fingerprint"]),
        train_log=train_log,
        refresh_log=refresh_log,
    )
