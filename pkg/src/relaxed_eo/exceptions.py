"""Exception hierarchy.

Data problems derive from :class:`DataError` and solver problems from
:class:`SolverError`; the CLI maps these two families to distinct exit codes.
"""


class RelaxedEOError(Exception):
    """Base class for every error raised by this package."""


class DataError(RelaxedEOError, ValueError):
    pass


class ParseError(DataError):
    def __init__(self, line, reason):
        self.line = line
        self.reason = reason
        super().__init__(f"line {line}: {reason}")


class SchemaError(DataError):
    pass


class DomainError(DataError):
    def __init__(self, line, reason):
        self.line = line
        self.reason = reason
        super().__init__(f"line {line}: {reason}")


class DegenerateLabelError(DataError):
    """A label value has zero count, so the loss objective is ill-posed."""


class DegenerateGroupError(DataError):
    """A group lacks positives or negatives; its FPR or TPR is undefined."""

    def __init__(self, group, missing_label):
        self.group = group
        self.missing_label = missing_label
        kind = "positive" if missing_label == 1 else "negative"
        super().__init__(f"group {group!r} has no {kind} samples")


class MismatchedRowsError(DataError):
    pass


class UnknownGroupError(DataError, KeyError):
    def __init__(self, group):
        self.group = group
        super().__init__(f"unknown group {group!r}")

    def __str__(self):
        return self.args[0]


class OutsideHullError(RelaxedEOError, ValueError):
    pass


class SolverError(RelaxedEOError, RuntimeError):
    pass
