"""Embedding exporter for the retrieval engine.

Reads a caption dataset, embeds items, modification texts, and
lexicon-matched attribute phrases with a chosen text encoder, and writes
the engine's corpus/triplet/manifest files so real data can flow into it
without the two packages sharing any code.
"""

from .dataset import Item, TripletRow, load_items, load_triplet_rows
from .encoder import HashEncoder, SentenceEncoder, resolve_encoder
from .errors import (
    DatasetError,
    EmptySplit,
    EncoderLoadFailure,
    ExportError,
    LexiconError,
)
from .export import ExportJob, export, export_checksums
from .formats import (
    sha256_file,
    triplet_record,
    write_embeddings,
    write_manifest,
    write_triplets,
)
from .lexicon import Lexicon, extract_phrases, load_lexicon, tokenize

__version__ = "0.1.0"

__all__ = [
    "DatasetError",
    "EmptySplit",
    "EncoderLoadFailure",
    "ExportError",
    "ExportJob",
    "HashEncoder",
    "Item",
    "Lexicon",
    "LexiconError",
    "SentenceEncoder",
    "TripletRow",
    "export",
    "export_checksums",
    "extract_phrases",
    "load_items",
    "load_lexicon",
    "load_triplet_rows",
    "resolve_encoder",
    "sha256_file",
    "tokenize",
    "triplet_record",
    "write_embeddings",
    "write_manifest",
    "write_triplets",
]
