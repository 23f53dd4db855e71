"""Exception hierarchy shared across the package."""


class TaxAssignError(Exception):
    """Base class for all errors raised by this package."""


class TableParseError(TaxAssignError):
    """A taxonomy/aux input table line could not be parsed."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class LexiconBuildError(TaxAssignError):
    """Inconsistent inputs at lexicon compile time (dangling ids, cycles)."""


class SkipTokenError(TaxAssignError):
    """A skip token was passed where only matchable tokens are allowed."""


class TrieFormatError(TaxAssignError):
    """Serialized trie/lexicon bytes are corrupt, truncated, or wrong version."""


class SpanOverlapError(TaxAssignError):
    """Two entity spans overlap where disjoint spans are required."""

    def __init__(self, span_a, span_b, message: str = "overlapping entity spans"):
        super().__init__(f"{message}: {span_a} vs {span_b}")
        self.span_a = span_a
        self.span_b = span_b


class EncodeError(TaxAssignError):
    """A document could not be encoded into a marker-tagged sequence."""


class GoldMissingError(TaxAssignError):
    """A gene lacks the gold species annotation required by the operation."""


class ScorerError(TaxAssignError):
    """Scorer transport failure or protocol violation."""

    def __init__(self, message: str, request_id: int | None = None):
        if request_id is not None:
            message = f"request {request_id}: {message}"
        super().__init__(message)
        self.request_id = request_id


class CapabilityError(TaxAssignError):
    """The selected scorer does not support the requested mode."""


class PubTatorError(TaxAssignError):
    """Malformed PubTator input."""

    def __init__(self, line_no: int, message: str, doc_id: str | None = None):
        where = f"line {line_no}"
        if doc_id:
            where += f" (doc {doc_id})"
        super().__init__(f"{where}: {message}")
        self.line_no = line_no
        self.doc_id = doc_id


class EvalError(TaxAssignError):
    """Evaluation inputs are inconsistent (id mismatch, missing predictions)."""
