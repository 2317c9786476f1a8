"""Exception types raised by the exporter."""


class ExportError(Exception):
    """Base class for all exporter errors."""


class EncoderLoadFailure(ExportError):
    """The requested encoder could not be constructed or loaded."""


class EmptySplit(ExportError):
    """The requested split exists but holds no triplet rows."""


class DatasetError(ExportError):
    """Dataset files missing, unparseable, or referencing unknown items."""


class LexiconError(ExportError):
    """Lexicon file missing, unparseable, or with an empty term list."""
