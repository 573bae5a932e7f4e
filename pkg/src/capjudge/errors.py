"""Exception taxonomy for the package.

Every error raised by a public operation is a subclass of ``CapjudgeError``.
Errors crossing the judging pipeline get forensic metadata (prompt digest,
backend id) attached to their ``context`` dict so cache entries can be traced
back to the call that produced them.
"""

from __future__ import annotations


class CapjudgeError(Exception):
    """Base class for all package errors."""

    def __init__(self, message: str = "", **context):
        super().__init__(message)
        self.context: dict = dict(context)


# grammar engine


class EmptyMask(CapjudgeError):
    """A live, non-accepting state has no valid token and no eos.

    Signals a vocabulary/grammar mismatch, e.g. a vocabulary lacking digit
    characters.
    """

    def __init__(self, message: str = "", *, state: int | None = None, **context):
        super().__init__(
            message
            or f"state {state} has no valid continuation token and cannot terminate",
            state=state,
            **context,
        )
        self.state = state


class InvalidToken(CapjudgeError):
    """A token outside the state's mask was fed to ``advance``; sampler bug."""


class LengthExceeded(CapjudgeError):
    """max_tokens was reached and no forced path to acceptance exists."""


class ModelFailure(CapjudgeError):
    """The logit source or scripted model failed to produce scores."""


class VocabularyError(CapjudgeError):
    """A vocabulary file violates its invariants (ids not dense, bad eos)."""


class IndexFormatError(CapjudgeError):
    """A persisted token-mask index file is malformed or incompatible."""


# judge core


class TemplateError(CapjudgeError):
    """A prompt template placeholder is missing or duplicated."""


class MalformedVerdict(CapjudgeError):
    """No parseable JSON object was found in the model output."""


class SchemaViolation(CapjudgeError):
    """The parsed verdict object has wrong keys or wrong value types."""


class RangeViolation(CapjudgeError):
    """The verdict score is an integer outside [0, 100]."""


class DomainError(CapjudgeError):
    """A score-composition input is outside its declared range."""


# tie-breakers


class EmbeddingFailure(CapjudgeError):
    """The embedding backend failed to produce vectors."""


class ZeroVector(CapjudgeError):
    """An embedding has zero norm; cosine similarity is undefined."""


class EndpointFailure(CapjudgeError):
    """An external scorer endpoint was unreachable or returned an error."""


class ContractViolation(CapjudgeError):
    """An external scorer response does not match the wire contract."""


# backends and cache


class TransportError(CapjudgeError):
    """A chat or embedding endpoint failed at the HTTP layer.

    ``context`` carries the attempt count and the backoff delays used.
    """


class CorruptRecord(CapjudgeError):
    """A cache record failed its digest check on read."""


class DimensionMismatch(CapjudgeError):
    """An embedding batch returned vectors of differing dimension."""


# lexical baselines


class EmptyCandidate(CapjudgeError):
    """The candidate caption has no tokens after tokenization."""


# evaluation harness


class ParseError(CapjudgeError):
    """A dataset line is not valid JSON."""

    def __init__(self, line: int, message: str = ""):
        super().__init__(message or f"line {line}: not valid JSON", line=line)
        self.line = line


class SchemaError(CapjudgeError):
    """A dataset record violates the pair schema."""

    def __init__(self, line: int, field: str, message: str = ""):
        super().__init__(
            message or f"line {line}: invalid field {field!r}", line=line, field=field
        )
        self.line = line
        self.field = field


class EmptyDataset(CapjudgeError):
    """The dataset file contains no records."""


class MetricFailure(CapjudgeError):
    """Too many pairs failed to score; the run is aborted."""


class DatasetMismatch(CapjudgeError):
    """Two reports (or a dataset and its sidecar) disagree on the digest."""
