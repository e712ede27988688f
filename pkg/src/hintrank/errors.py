"""Exception hierarchy shared across the package.

Three top-level families map onto the CLI exit codes: ``UsageError`` (2),
``DataError`` (3), ``BackendError`` (4). Plain I/O failures propagate as the
builtin ``OSError``.
"""

from __future__ import annotations


class HintrankError(Exception):
    """Base class for every error raised by this package."""


class UsageError(HintrankError):
    """Bad command-line invocation or invalid configuration."""


class DataError(HintrankError):
    """Malformed, inconsistent, or out-of-contract input data."""


class BackendError(HintrankError):
    """A text-generation provider or scorer backend failed."""


# --- corpus ---------------------------------------------------------------

class MalformedRecord(DataError):
    def __init__(self, line_no: int, reason: str):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no
        self.reason = reason


class DuplicateId(DataError):
    def __init__(self, id: str):
        super().__init__(f"duplicate id: {id!r}")
        self.id = id


class UnknownLabel(DataError):
    def __init__(self, value: str):
        super().__init__(f"unknown relevance label: {value!r}")
        self.value = value


class EmptyDataset(DataError):
    pass


class InvalidRatios(DataError):
    pass


# --- text index -----------------------------------------------------------

class EmptyStore(DataError):
    pass


class EmptyQuery(DataError):
    pass


class DimMismatch(DataError):
    def __init__(self, expected: int, got: int):
        super().__init__(f"vector dim {got} != store dim {expected}")
        self.expected = expected
        self.got = got


class ZeroVector(DataError):
    pass


# --- hint schema ----------------------------------------------------------

class MissingBlock(DataError):
    def __init__(self, tag: str):
        super().__init__(f"missing <{tag}> block")
        self.tag = tag


class UnclosedBlock(DataError):
    def __init__(self, tag: str):
        super().__init__(f"<{tag}> block never closed")
        self.tag = tag


class LiteralSyntaxError(DataError):
    """Restricted-literal parse failure at a byte offset."""

    def __init__(self, position: int, expected: str):
        super().__init__(f"at offset {position}: expected {expected}")
        self.position = position
        self.expected = expected


class DuplicateKey(DataError):
    def __init__(self, key: str):
        super().__init__(f"duplicate map key: {key!r}")
        self.key = key


class SchemaError(DataError):
    def __init__(self, field: str, reason: str):
        super().__init__(f"field {field!r}: {reason}")
        self.field = field
        self.reason = reason


class EmptyHints(DataError):
    pass


# --- hint generation client -----------------------------------------------

class MissingBinding(DataError):
    def __init__(self, name: str):
        super().__init__(f"no binding for placeholder {name!r}")
        self.name = name


class ProviderError(BackendError):
    pass


class ParseFailedTwice(BackendError):
    def __init__(self, raw_excerpt: str):
        super().__init__(f"provider output unparseable after retry: {raw_excerpt!r}")
        self.raw_excerpt = raw_excerpt


class CountMismatch(DataError):
    def __init__(self, expected: int, got: int):
        super().__init__(f"expected {expected} items, got {got}")
        self.expected = expected
        self.got = got


# --- rerank ---------------------------------------------------------------

class LengthMismatch(BackendError):
    def __init__(self, expected: int, got: int):
        super().__init__(f"backend returned {got} scores for {expected} pairs")
        self.expected = expected
        self.got = got


class ProtocolViolation(BackendError):
    pass


class ParseFailed(BackendError):
    pass


# --- eval -----------------------------------------------------------------

class MissingJudgments(DataError):
    def __init__(self, query_id: str):
        super().__init__(f"no judgments for query {query_id!r}")
        self.query_id = query_id


class UnknownKey(DataError):
    pass


class EmptySamples(DataError):
    pass
