"""Command-line entry point.

    embexport --dataset DIR --split train --encoder hash:64 --out DIR --lexicon default

Exit codes: 0 success, 2 bad arguments or invalid inputs, 1 runtime failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .errors import DatasetError, EmptySplit, EncoderLoadFailure, ExportError, LexiconError
from .export import ExportJob, export
from .lexicon import load_lexicon


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="embexport",
        description="Export corpus and triplet embeddings into the retrieval engine's formats.",
    )
    parser.add_argument("--dataset", type=Path, required=True, help="dataset root directory")
    parser.add_argument("--split", required=True, choices=("train", "val", "test"))
    parser.add_argument(
        "--encoder", required=True,
        help="encoder identifier: hash:<dim> or a sentence-transformers model",
    )
    parser.add_argument("--out", type=Path, required=True, help="output directory")
    parser.add_argument(
        "--lexicon", required=True,
        help="attribute lexicon: a JSON file path, or 'default' for the shipped one",
    )
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        lexicon = load_lexicon(args.lexicon)
        job = ExportJob(
            dataset_root=args.dataset,
            split=args.split,
            encoder=args.encoder,
            out_dir=args.out,
            lexicon=lexicon,
        )
    except (LexiconError, DatasetError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    try:
        manifest = export(job)
    except (DatasetError, EmptySplit, LexiconError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (EncoderLoadFailure, ExportError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    print(manifest)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
