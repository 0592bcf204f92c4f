"""
Exceptions and warning categories shared by every peergeo module.

Errors carry the context needed to locate the offending input (file line,
group, node, iteration, column names) so CLI messages can point at it.
"""

from typing import Any, Optional, Sequence


class PeerGeoError(Exception):
    """Base class for all peergeo failures."""


class ParseError(PeerGeoError, ValueError):
    """A row of an input file could not be interpreted."""

    def __init__(self, message: str, line: Optional[int] = None, path: Optional[str] = None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f":{line}" if where else f"line {line}"
        super().__init__(f"{where}: {message}" if where else message)


class DomainError(PeerGeoError, ValueError):
    """A value violates the contract of an operation (negative weight, a CES
    action outside the positive domain, an invalid parameter, ...)."""

    def __init__(
        self,
        message: str,
        *,
        node: Optional[int] = None,
        group: Optional[int] = None,
        iteration: Optional[int] = None,
        line: Optional[int] = None,
    ):
        self.reason = message
        self.node = node
        self.group = group
        self.iteration = iteration
        self.line = line
        context = []
        if line is not None:
            context.append(f"line {line}")
        if iteration is not None:
            context.append(f"iteration {iteration}")
        if group is not None:
            context.append(f"group {group}")
        if node is not None:
            context.append(f"node {node}")
        suffix = f" ({', '.join(context)})" if context else ""
        super().__init__(message + suffix)


class DegenerateRowError(DomainError):
    """A non-isolate row of influence weights sums to zero."""


class UnsupportedOperationError(PeerGeoError, TypeError):
    """The operation is not defined for the requested aggregator family."""


class RankError(PeerGeoError, ValueError):
    """A design or cross-product matrix is rank deficient."""

    def __init__(self, message: str, columns: Sequence[str] = (), split: Optional[str] = None):
        self.columns = list(columns)
        self.split = split
        detail = ""
        if split is not None:
            detail += f" [split: {split}]"
        if self.columns:
            detail += f" [columns: {', '.join(self.columns)}]"
        super().__init__(message + detail)


class InferenceError(PeerGeoError):
    """Standard errors could not be computed. Point estimates are still
    available on ``result``."""

    def __init__(self, message: str, result: Any = None):
        self.result = result
        super().__init__(message)


class EstimationError(PeerGeoError):
    """No estimate could be produced (e.g. every profile point failed)."""


class DesignError(PeerGeoError):
    """A simulation design could not be drawn within its retry limit."""


class ConfigError(PeerGeoError, KeyError):
    """Unknown configuration key or unparseable value."""

    def __init__(self, message: str, key: Optional[str] = None):
        self.key = key
        super().__init__(message)

    def __str__(self) -> str:
        return self.args[0] if self.args else ""


# -----------------------------
# Warning categories
# -----------------------------

class PeerGeoWarning(UserWarning):
    pass


class IsolateWarning(PeerGeoWarning):
    pass


class CollinearityWarning(PeerGeoWarning):
    pass


class ContractionWarning(PeerGeoWarning):
    pass


class FiniteDifferenceWarning(PeerGeoWarning):
    pass
