"""Exception types raised by the engine.

Every failure mode that callers are expected to handle gets its own class so
that tests and CLI error mapping can match on type instead of message text.
"""


class MidzoneError(Exception):
    """Base class for all engine errors."""


# --- file formats / corpus validation ---

class BadMagic(MidzoneError):
    """File does not start with the expected magic bytes."""


class TruncatedFile(MidzoneError):
    """File ended early, declared an impossible size, or carries extra bytes."""


class NonFiniteEntry(MidzoneError):
    """An embedding contains NaN or Inf."""


class DuplicateId(MidzoneError):
    """Two rows share the same item id."""


class FormatError(MidzoneError):
    """Structurally invalid record (missing field, wrong type, unknown key)."""


class ChecksumMismatch(MidzoneError):
    """A manifest checksum does not match the file on disk."""


class ZeroRow(MidzoneError):
    """A row is all zeros and cannot be normalized."""


class UnknownId(MidzoneError):
    """An item id does not resolve to a corpus row."""


class DimMismatch(MidzoneError):
    """Vector or matrix dimensions disagree with the corpus."""


class TargetNotInSubset(MidzoneError):
    """A triplet's evaluation subset does not contain its target."""


# --- geometry / sampling ---

class ZeroVector(MidzoneError):
    """Cosine similarity is undefined for a zero vector."""


class NoCandidates(MidzoneError):
    """No negative candidates exist (corpus holds only the target)."""


class DegenerateProbability(MidzoneError):
    """Predicted probability of the target is exactly zero."""


# --- optimizer / training ---

class ShapeMismatch(MidzoneError):
    """Gradient and parameter shapes disagree."""


class ConfigMismatch(MidzoneError):
    """Checkpoint was produced under a different configuration."""


# --- metrics ---

class EmptyAfterExclusion(MidzoneError):
    """Ranking pool is empty once exclusions are applied."""


class MissingSubset(MidzoneError):
    """Subset metrics requested for a query without subset ids."""


class EmptyRelevantSet(MidzoneError):
    """Average precision is undefined for an empty relevant set."""


# --- synthetic world ---

class DimTooSmall(MidzoneError):
    """Embedding dimension cannot hold the requested attribute directions."""


class NoValidTarget(MidzoneError):
    """No corpus item carries the modified attribute combination."""
