"""Exception hierarchy shared by every module."""

from __future__ import annotations


class CitelensError(Exception):
    """Base class for all errors raised by citelens."""


class DataError(CitelensError, ValueError):
    """Input data is malformed or violates a corpus contract."""


class MalformedRowError(DataError):
    def __init__(self, source: str, line: int, message: str):
        self.source = source
        self.line = line
        super().__init__(f"{source}:{line}: {message}")


class DuplicateDocumentError(DataError):
    pass


class AnomalyError(DataError):
    """Raised under the ``fail`` policy for a forward-in-time or unknown-id edge."""

    def __init__(self, citing: str, cited: str, reason: str):
        self.citing = citing
        self.cited = cited
        self.reason = reason
        super().__init__(f"edge {citing} -> {cited}: {reason}")


class UnknownDocumentError(CitelensError, KeyError):
    def __str__(self) -> str:  # KeyError quotes its message otherwise
        return str(self.args[0]) if self.args else ""


class CensoredError(CitelensError):
    """The requested windows extend past the observed horizon."""


class EmptyResultError(CitelensError):
    """A computation produced no rows (e.g. every document censored)."""


class AnalysisError(CitelensError, ValueError):
    """A statistical analysis cannot be computed on the given table."""


class ZeroVarianceError(AnalysisError):
    def __init__(self, variable: str):
        self.variable = variable
        super().__init__(f"variable {variable!r} has zero variance")


class DegenerateBinningError(AnalysisError):
    pass
