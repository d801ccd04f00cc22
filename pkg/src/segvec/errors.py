"""Exception hierarchy shared across the toolkit.

The command line front end maps these onto stable exit codes:
configuration and usage problems exit 1, data and parse problems exit 2,
numeric failures exit 3.
"""


class SegvecError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(SegvecError):
    """Invalid configuration: bad hyperparameters, mismatched tensor
    dimensions, missing input paths."""


class StateError(SegvecError):
    """An operation was called outside its required call sequence."""


class NumericError(SegvecError):
    """A computation produced or received non-finite values."""


class DataError(SegvecError):
    """Problem with the content of input data."""


class ParseError(DataError):
    """Malformed file content; carries the file path and line number."""

    def __init__(self, message, path=None, line=None):
        prefix = ""
        if path is not None:
            prefix = f"{path}:"
            if line is not None:
                prefix += f"{line}:"
            prefix += " "
        elif line is not None:
            prefix = f"line {line}: "
        super().__init__(prefix + message)
        self.path = path
        self.line = line


class ValidationError(DataError):
    """Structurally valid input that violates a semantic constraint."""


class UnknownWordError(DataError):
    """A queried word is not present in the embedding set."""


class UndefinedSimilarityError(DataError):
    """Cosine similarity is undefined because a vector has zero norm."""


class UndefinedCorrelationError(DataError):
    """Rank correlation is undefined because one list has no rank variance."""


class CoverageError(DataError):
    """Too few benchmark pairs are covered by the embedding vocabulary."""

    def __init__(self, message, pairs_used, pairs_skipped):
        super().__init__(message)
        self.pairs_used = pairs_used
        self.pairs_skipped = pairs_skipped
