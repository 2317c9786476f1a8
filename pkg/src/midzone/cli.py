"""Command-line interface.

Subcommands: gen, train, eval, sample-negatives, inspect-midzone.
Exit codes: 0 success, 2 usage/validation error, 1 runtime failure.
Every command is deterministic for a fixed --seed in single-threaded mode;
output CSV floats use repr so reruns are byte-identical.

Training options come from an optional JSON config file whose keys mirror
the flat training-config fields; command-line flags override file values.
The corpus is L2-normalized on load unless --no-normalize is given (the
gap-band statistics are not scale-invariant, so the flag matters and must
match between train and later eval/resume runs).
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import synth
from .compose import forward, init_head
from .corpus import (
    EmbeddingMatrix,
    Manifest,
    l2_normalize,
    load_manifest,
    write_embeddings,
    write_manifest,
    write_triplets,
)
from .errors import ConfigMismatch, FormatError, MidzoneError
from .losses import LossConfig
from .metrics import compute_metrics, format_percent, rank_corpus
from .negatives import MidZoneConfig, mid_zone, sample_negative, score_all
from .train import (
    REFRESH_LOG_COLUMNS,
    TRAIN_LOG_COLUMNS,
    Checkpoint,
    TrainConfig,
    config_from_dict,
    config_to_dict,
    load_checkpoint,
    save_checkpoint,
    train,
)


def _err(msg: str) -> None:
    print(f"error: {msg}", file=sys.stderr)


def _default_threads() -> int:
    raw = os.environ.get("DQE_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _add_config_overrides(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, default=None, help="JSON config file")
    p.add_argument("--epochs", type=int, default=None, dest="total_epochs")
    p.add_argument("--batch-size", type=int, default=None, dest="batch_size")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--warmup-epochs", type=int, default=None, dest="warmup_epochs")
    p.add_argument("--num-intervals", type=int, default=None, dest="num_intervals")
    p.add_argument("--lr-base", type=float, default=None, dest="lr_base")
    p.add_argument("--weight-decay", type=float, default=None, dest="weight_decay")
    p.add_argument("--beta1", type=float, default=None)
    p.add_argument("--beta2", type=float, default=None)
    p.add_argument("--epsilon", type=float, default=None)
    p.add_argument("--init-scale", type=float, default=None, dest="init_scale")
    p.add_argument("--init-rho", type=float, default=None, dest="init_rho")
    p.add_argument("--kl-candidates", choices=("corpus", "batch"), default=None,
                   dest="kl_candidates")
    p.add_argument("--freeze-sample", action=argparse.BooleanOptionalAction, default=None,
                   dest="freeze_sample")
    p.add_argument("--tau", type=float, default=None)
    p.add_argument("--margin-main", type=float, default=None, dest="margin_main")
    p.add_argument("--margin-color", type=float, default=None, dest="margin_color")
    p.add_argument("--margin-shape", type=float, default=None, dest="margin_shape")
    p.add_argument("--lambda-rank", type=float, default=None, dest="lambda_rank")
    p.add_argument("--mode", choices=("quantile", "absolute"), default=None)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--beta", type=float, default=None)


_CONFIG_KEYS = tuple(config_to_dict(TrainConfig(total_epochs=5)))


def _build_train_config(args: argparse.Namespace) -> TrainConfig:
    doc: dict = {}
    if args.config is not None:
        if not args.config.is_file():
            raise FormatError(f"config file not found: {args.config}")
        try:
            doc = json.loads(args.config.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise FormatError(f"{args.config}: invalid JSON") from e
        if not isinstance(doc, dict):
            raise FormatError(f"{args.config}: config must be a JSON object")
    for key in _CONFIG_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            doc[key] = value
    if "total_epochs" not in doc:
        raise FormatError("total_epochs is required (--epochs or config file)")
    return config_from_dict(doc)


def _load_inputs(manifest_path: Path, normalize: bool):
    manifest, corpus, triplets = load_manifest(manifest_path)
    if normalize:
        corpus = l2_normalize(corpus)
    return manifest, corpus, triplets


def _write_csv(path: Path, columns, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])


def _checkpoint_query_vectors(ckpt: Checkpoint, triplets, corpus):
    head = ckpt.head
    weights = ckpt.weights
    return [forward(head, weights, t, corpus) for t in triplets]


# --- gen ---

def cmd_gen(args: argparse.Namespace) -> int:
    try:
        schema = synth.AttributeSchema(
            color_values=synth.default_color_values(args.colors),
            shape_values=synth.default_shape_values(args.shapes),
            nuisance_dim=args.nuisance_dim,
        )
        world = synth.generate_world(
            schema, args.n_items, args.dim, noise_sigma=args.noise_sigma, seed=args.seed
        )
        train_triplets = synth.generate_triplets(
            world, args.n_train, flip=args.flip, seed=args.seed,
            subset_size=args.subset_size, stream=0,
        )
        val_triplets = synth.generate_triplets(
            world, args.n_val, flip=args.flip, seed=args.seed,
            subset_size=args.subset_size, stream=1,
        )
    except MidzoneError as e:
        _err(str(e))
        return 2
    try:
        out = args.out
        out.mkdir(parents=True, exist_ok=True)
        write_embeddings(out / "corpus.emb", world.corpus)
        write_triplets(out / "triplets.train.jsonl", train_triplets)
        write_triplets(out / "triplets.val.jsonl", val_triplets)
        synth.write_labels(out / "labels.csv", world)
        write_manifest(
            out / "manifest.train.json",
            Manifest(
                corpus_path="corpus.emb", triplets_path="triplets.train.jsonl",
                dim=args.dim, split="train",
            ),
        )
        write_manifest(
            out / "manifest.val.json",
            Manifest(
                corpus_path="corpus.emb", triplets_path="triplets.val.jsonl",
                dim=args.dim, split="val",
            ),
        )
    except (MidzoneError, OSError) as e:
        _err(str(e))
        return 1
    print(f"wrote world ({args.n_items} items, dim {args.dim}) to {out}")
    return 0


# --- train ---

def cmd_train(args: argparse.Namespace) -> int:
    try:
        config = _build_train_config(args)
        if not args.manifest.is_file():
            raise FormatError(f"manifest not found: {args.manifest}")
        if args.resume is not None and not args.resume.is_file():
            raise FormatError(f"checkpoint not found: {args.resume}")
        if args.stop_after is not None and args.stop_after < 0:
            raise FormatError("--stop-after must be non-negative")
    except MidzoneError as e:
        _err(str(e))
        return 2
    try:
        _, corpus, triplets = _load_inputs(args.manifest, not args.no_normalize)
        resume = load_checkpoint(args.resume) if args.resume is not None else None
        result = train(
            config, triplets, corpus,
            threads=args.threads,
            resume=resume,
            stop_after_epoch=args.stop_after,
        )
        out = args.out
        out.mkdir(parents=True, exist_ok=True)
        save_checkpoint(out / "checkpoint.dqe", result.checkpoint)
        _write_csv(
            out / "train_log.csv", TRAIN_LOG_COLUMNS,
            (row.as_list() for row in result.train_log),
        )
        _write_csv(
            out / "refresh_log.csv", REFRESH_LOG_COLUMNS,
            (row.as_list() for row in result.refresh_log),
        )
    except ConfigMismatch as e:
        _err(str(e))
        return 2
    except (MidzoneError, OSError) as e:
        _err(str(e))
        return 1
    print(
        f"trained {result.checkpoint.epoch}/{config.total_epochs} epochs, "
        f"{result.checkpoint.global_step} steps; wrote {out / 'checkpoint.dqe'}"
    )
    return 0


# --- eval ---

def _parse_ks(raw: str) -> list[int]:
    try:
        ks = [int(x) for x in raw.split(",") if x.strip()]
    except ValueError:
        raise FormatError(f"bad K list: {raw!r}") from None
    if not ks or any(k < 1 for k in ks):
        raise FormatError(f"bad K list: {raw!r}")
    return ks


def cmd_eval(args: argparse.Namespace) -> int:
    try:
        recall_ks = _parse_ks(args.ks)
        map_ks = _parse_ks(args.map_ks)
        if not args.manifest.is_file():
            raise FormatError(f"manifest not found: {args.manifest}")
        if not args.checkpoint.is_file():
            raise FormatError(f"checkpoint not found: {args.checkpoint}")
        if args.labels is not None and not args.labels.is_file():
            raise FormatError(f"labels file not found: {args.labels}")
    except MidzoneError as e:
        _err(str(e))
        return 2
    try:
        _, corpus, triplets = _load_inputs(args.manifest, not args.no_normalize)
        ckpt = load_checkpoint(args.checkpoint)
    except (MidzoneError, OSError) as e:
        _err(str(e))
        return 1
    if args.subset and any(t.subset_ids is None for t in triplets):
        _err("--subset requested but triplets carry no subset ids")
        return 2
    try:
        queries = _checkpoint_query_vectors(ckpt, triplets, corpus)
        ranked = []
        for i, (t, cq) in enumerate(zip(triplets, queries)):
            exclude = None
            if not args.include_ref and t.ref_id != t.target_id:
                exclude = {t.ref_id}
            ranked.append(rank_corpus(cq.q_star, corpus, exclude=exclude, query_index=i))
        targets = [t.target_id for t in triplets]
        subsets = [t.subset_ids for t in triplets] if args.subset else None
        relevant_sets = None
        if args.labels is not None:
            labels = synth.load_labels(args.labels)
            for t in triplets:
                if t.target_id not in labels:
                    raise FormatError(f"labels file missing item {t.target_id!r}")
            relevant_sets = [
                {item for item, lab in labels.items() if lab == labels[t.target_id]}
                for t in triplets
            ]
        report = compute_metrics(
            ranked, targets,
            subsets=subsets,
            relevant_sets=relevant_sets,
            recall_ks=recall_ks,
            map_ks=map_ks,
        )
        out = args.out
        out.mkdir(parents=True, exist_ok=True)
        doc = {
            "fractions": {
                "recall_at": {str(k): v for k, v in report.recall_at.items()},
                "recall_subset_at": {str(k): v for k, v in report.recall_subset_at.items()},
                "average": report.average,
                "map_at": {str(k): v for k, v in report.map_at.items()},
            },
            "percent": {
                "recall_at": {str(k): format_percent(v) for k, v in report.recall_at.items()},
                "recall_subset_at": {
                    str(k): format_percent(v) for k, v in report.recall_subset_at.items()
                },
                "average": format_percent(report.average),
                "map_at": {str(k): format_percent(v) for k, v in report.map_at.items()},
            },
        }
        with open(out / "metrics.json", "w", encoding="utf-8") as f:
            json.dump(doc, f, indent=2, sort_keys=True)
            f.write("\n")
        rows = []
        for i, (t, r) in enumerate(zip(triplets, ranked)):
            rank = r.rank_of(t.target_id)
            subset_rank = ""
            if t.subset_ids is not None:
                allowed = set(t.subset_ids)
                restricted = [item for item in r.ids if item in allowed]
                subset_rank = restricted.index(t.target_id) + 1
            rows.append([i, t.target_id, rank, subset_rank])
        _write_csv(
            out / "per_query_ranks.csv",
            ("query_index", "target_id", "rank", "subset_rank"),
            rows,
        )
    except (MidzoneError, OSError) as e:
        _err(str(e))
        return 1
    print(f"wrote metrics for {len(triplets)} queries to {out / 'metrics.json'}")
    return 0


# --- shared mid-zone helpers ---

def _midzone_config(args: argparse.Namespace, ckpt: Checkpoint | None) -> MidZoneConfig:
    if ckpt is not None:
        base = ckpt.config.midzone
    else:
        base = MidZoneConfig()
    return MidZoneConfig(
        mode=args.mode if args.mode is not None else base.mode,
        alpha=args.alpha if args.alpha is not None else base.alpha,
        beta=args.beta if args.beta is not None else base.beta,
    )


def _head_for_inspection(args: argparse.Namespace, corpus: EmbeddingMatrix):
    if args.checkpoint is not None:
        ckpt = load_checkpoint(args.checkpoint)
        return ckpt, ckpt.head, ckpt.weights
    head = init_head(corpus.dim, np.random.SeedSequence([args.seed, 1]), args.init_scale)
    from .compose import AttributeWeights

    return None, head, AttributeWeights(args.init_rho, args.init_rho)


# --- sample-negatives ---

def cmd_sample_negatives(args: argparse.Namespace) -> int:
    try:
        if not args.manifest.is_file():
            raise FormatError(f"manifest not found: {args.manifest}")
        if args.checkpoint is not None and not args.checkpoint.is_file():
            raise FormatError(f"checkpoint not found: {args.checkpoint}")
        if args.mode is not None or args.alpha is not None or args.beta is not None:
            _midzone_config(args, None)  # validates the overrides early
    except MidzoneError as e:
        _err(str(e))
        return 2
    try:
        _, corpus, triplets = _load_inputs(args.manifest, not args.no_normalize)
        ckpt, head, weights = _head_for_inspection(args, corpus)
        cfg = _midzone_config(args, ckpt)
        rng = np.random.default_rng(np.random.SeedSequence([args.seed, 2]))
        rows = []
        for i, t in enumerate(triplets):
            cq = forward(head, weights, t, corpus)
            table = score_all(cq.q_star, corpus, t.target_id, query_index=i)
            nset = mid_zone(table, cfg)
            neg = sample_negative(nset, table, cfg, rng)
            delta = float(table.delta[corpus.index(neg)])
            rows.append([i, neg, delta])
        args.out.parent.mkdir(parents=True, exist_ok=True)
        _write_csv(args.out, ("query_index", "negative_id", "delta"), rows)
    except (MidzoneError, OSError) as e:
        _err(str(e))
        return 1
    print(f"sampled {len(rows)} negatives to {args.out}")
    return 0


# --- inspect-midzone ---

def cmd_inspect_midzone(args: argparse.Namespace) -> int:
    try:
        if not args.manifest.is_file():
            raise FormatError(f"manifest not found: {args.manifest}")
        if args.checkpoint is not None and not args.checkpoint.is_file():
            raise FormatError(f"checkpoint not found: {args.checkpoint}")
        if args.mode is not None or args.alpha is not None or args.beta is not None:
            _midzone_config(args, None)
    except MidzoneError as e:
        _err(str(e))
        return 2
    try:
        _, corpus, triplets = _load_inputs(args.manifest, not args.no_normalize)
        ckpt, head, weights = _head_for_inspection(args, corpus)
        cfg = _midzone_config(args, ckpt)
        rows = []
        sets = []
        for i, t in enumerate(triplets):
            cq = forward(head, weights, t, corpus)
            table = score_all(cq.q_star, corpus, t.target_id, query_index=i)
            nset = mid_zone(table, cfg)
            sets.append(nset)
            if nset.member_ids:
                deltas = np.array([table.delta[corpus.index(m)] for m in nset.member_ids])
                lo, hi = float(deltas.min()), float(deltas.max())
                rows.append([i, table.s_tar, len(nset.member_ids), lo, hi])
            else:
                rows.append([i, table.s_tar, 0, "", ""])
        out = args.out
        out.mkdir(parents=True, exist_ok=True)
        _write_csv(
            out / "midzone.csv",
            ("query_index", "s_tar", "set_size", "min_delta", "max_delta"),
            rows,
        )
        epoch = ckpt.epoch if ckpt is not None else 0
        mean_size = float(np.mean([len(s.member_ids) for s in sets]))
        _write_csv(out / "sizelog.csv", REFRESH_LOG_COLUMNS, [[epoch, mean_size]])
    except (MidzoneError, OSError) as e:
        _err(str(e))
        return 1
    print(f"inspected {len(rows)} queries; wrote {out / 'midzone.csv'}")
    return 0


# --- parser ---

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="midzone",
        description="Embedding-space retrieval training with gap-band negative sampling.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic attribute world")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--n-items", type=int, required=True, dest="n_items")
    p.add_argument("--n-train", type=int, default=500, dest="n_train")
    p.add_argument("--n-val", type=int, default=200, dest="n_val")
    p.add_argument("--colors", type=int, default=4)
    p.add_argument("--shapes", type=int, default=4)
    p.add_argument("--nuisance-dim", type=int, default=8, dest="nuisance_dim")
    p.add_argument("--noise-sigma", type=float, default=0.1, dest="noise_sigma")
    p.add_argument("--flip", choices=synth.FLIPS, default="color")
    p.add_argument("--subset-size", type=int, default=0, dest="subset_size")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", help="train on a manifest")
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--threads", type=int, default=_default_threads())
    p.add_argument("--resume", type=Path, default=None)
    p.add_argument("--stop-after", type=int, default=None, dest="stop_after")
    p.add_argument("--no-normalize", action="store_true", dest="no_normalize")
    _add_config_overrides(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--ks", default="1,5,10,50")
    p.add_argument("--map-ks", default="5,10,25,50", dest="map_ks")
    p.add_argument("--subset", action="store_true")
    p.add_argument("--labels", type=Path, default=None)
    p.add_argument("--include-ref", action="store_true", dest="include_ref")
    p.add_argument("--no-normalize", action="store_true", dest="no_normalize")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sample-negatives", help="draw one negative per query")
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--checkpoint", type=Path, default=None)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--mode", choices=("quantile", "absolute"), default=None)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--init-scale", type=float, default=0.1, dest="init_scale")
    p.add_argument("--init-rho", type=float, default=0.0, dest="init_rho")
    p.add_argument("--no-normalize", action="store_true", dest="no_normalize")
    p.set_defaults(func=cmd_sample_negatives)

    p = sub.add_parser("inspect-midzone", help="per-query band membership stats")
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--checkpoint", type=Path, default=None)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--mode", choices=("quantile", "absolute"), default=None)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--init-scale", type=float, default=0.1, dest="init_scale")
    p.add_argument("--init-rho", type=float, default=0.0, dest="init_rho")
    p.add_argument("--no-normalize", action="store_true", dest="no_normalize")
    p.set_defaults(func=cmd_inspect_midzone)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
