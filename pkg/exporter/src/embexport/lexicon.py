"""Attribute term lists and phrase extraction.

Extraction is a pure function of the text and the lexicon: the text is
lowercased and split into alphanumeric tokens, each lexicon term (itself
tokenized the same way, so multi-word terms work) is searched as a
contiguous token run, and the matched terms are joined in order of first
appearance into one phrase per attribute family.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .errors import LexiconError

_TOKEN = re.compile(r"[a-z0-9]+")

DEFAULT_NAME = "default"


def tokenize(text: str) -> list[str]:
    return _TOKEN.findall(text.lower())


@dataclass(frozen=True)
class Lexicon:
    colors: tuple[str, ...]
    shapes: tuple[str, ...]

    def __post_init__(self):
        for family, terms in (("colors", self.colors), ("shapes", self.shapes)):
            if not terms:
                raise LexiconError(f"lexicon family {family!r} is empty")
            for term in terms:
                if not tokenize(term):
                    raise LexiconError(f"term {term!r} in {family!r} has no tokens")

    def terms(self, attr: str) -> tuple[str, ...]:
        if attr == "color":
            return self.colors
        if attr == "shape":
            return self.shapes
        raise KeyError(attr)


def load_lexicon(spec: str | Path) -> Lexicon:
    """Load a lexicon from a JSON path, or the shipped one for "default"."""
    if str(spec) == DEFAULT_NAME:
        raw = resources.files("embexport").joinpath("default_lexicon.json").read_text("utf-8")
    else:
        path = Path(spec)
        if not path.is_file():
            raise LexiconError(f"lexicon file not found: {path}")
        raw = path.read_text(encoding="utf-8")
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as e:
        raise LexiconError(f"lexicon {spec}: invalid JSON") from e
    if not isinstance(doc, dict) or set(doc) != {"colors", "shapes"}:
        raise LexiconError(f"lexicon {spec}: expected exactly the keys 'colors' and 'shapes'")
    for family in ("colors", "shapes"):
        if not isinstance(doc[family], list) or not all(isinstance(t, str) for t in doc[family]):
            raise LexiconError(f"lexicon {spec}: {family!r} must be a list of strings")
    return Lexicon(colors=tuple(doc["colors"]), shapes=tuple(doc["shapes"]))


def _contains_run(tokens: list[str], run: list[str]) -> int:
    """Index of the first occurrence of run inside tokens, or -1."""
    n, m = len(tokens), len(run)
    for i in range(n - m + 1):
        if tokens[i:i + m] == run:
            return i
    return -1


def extract_phrases(text: str, lexicon: Lexicon) -> dict[str, str]:
    """Matched terms per attribute family, joined in order of appearance.

    Families with no match are absent from the result.
    """
    tokens = tokenize(text)
    out: dict[str, str] = {}
    for attr in ("color", "shape"):
        hits = []
        for term in lexicon.terms(attr):
            pos = _contains_run(tokens, tokenize(term))
            if pos >= 0:
                hits.append((pos, term))
        if hits:
            hits.sort()
            out[attr] = " ".join(term for _, term in hits)
    return out
