"""Exception hierarchy shared across the package."""


class WikimarsError(Exception):
    """Base class for all package errors."""


class DatatypeMismatchError(WikimarsError):
    """Operands do not have the datatype an operation requires."""


class UnitMismatchError(WikimarsError):
    """Quantity operands carry different units; no conversion is attempted."""


class GlobeMismatchError(WikimarsError):
    """Coordinate operands refer to different globes."""


class EmptyValueError(WikimarsError):
    """An empty-sentinel value reached an operation that forbids it."""


class LongitudeWrapError(WikimarsError):
    """East/west comparison would have to wrap across the antimeridian."""


class PatternError(WikimarsError):
    """Malformed regular expression in a string-matching relation."""


class MalformedFactError(WikimarsError):
    """A fact violates the store's well-formedness rules."""


class SnapshotFormatError(WikimarsError):
    """Snapshot header missing, corrupted, or of an unsupported version."""


class ParseError(WikimarsError):
    """Syntax or resolution error in rule/constraint source text."""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message)


class SafetyError(WikimarsError):
    """Rule uses a non-relational variable where a relational one is required."""


class CompileError(WikimarsError):
    """Characterization or function definition cannot be compiled."""


class LimitExceededError(WikimarsError):
    """A closure limit was hit; carries the partial result."""

    def __init__(self, message, report=None, store=None):
        super().__init__(message)
        self.report = report
        self.store = store


class EvaluationError(WikimarsError):
    """Formula evaluation failed (unbound variable, datatype misuse...)."""
