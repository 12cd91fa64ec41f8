"""Exception hierarchy shared by every stage of the pipeline."""

from __future__ import annotations


class PolicyError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(PolicyError, ValueError):
    """An argument is outside the domain of the operation."""


class SurveyParseError(PolicyError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class EmptyDataError(PolicyError):
    pass


class DegenerateItemError(PolicyError):
    def __init__(self, item: str, message: str = "item has no positive maximum"):
        self.item = item
        super().__init__(f"{item}: {message}")


class UndefinedCorrelationError(DomainError):
    pass


class CollinearityError(PolicyError):
    def __init__(self, columns: list[str]):
        self.columns = list(columns)
        super().__init__("design matrix is rank deficient; dependent columns: " + ", ".join(self.columns))


class InsufficientDataError(PolicyError):
    pass


class UnfillableGapError(PolicyError):
    def __init__(self, intervals: list[tuple]):
        self.intervals = list(intervals)
        shown = ", ".join(f"{a}..{b}" for a, b in self.intervals[:10])
        more = "" if len(self.intervals) <= 10 else f" (+{len(self.intervals) - 10} more)"
        super().__init__(f"donor does not cover gaps: {shown}{more}")


class GridTooLargeError(PolicyError):
    pass


class ConfigError(PolicyError):
    """Invalid configuration. ``diagnostics`` holds (key path, message) pairs."""

    def __init__(self, diagnostics: list[tuple[str, str]] | str):
        if isinstance(diagnostics, str):
            diagnostics = [("", diagnostics)]
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(f"{k}: {m}" if k else m for k, m in self.diagnostics))


class ConfigSyntaxError(ConfigError):
    pass


class StageError(PolicyError):
    """A pipeline stage failed; ``stage`` names it."""

    def __init__(self, stage: str, message: str):
        self.stage = stage
        super().__init__(f"[{stage}] {message}")


class DependencyError(StageError):
    """An upstream artifact is missing or was modified after it was produced."""

    def __init__(self, stage: str, producer: str, path: str, reason: str = "missing"):
        self.producer = producer
        self.path = path
        super().__init__(stage, f"upstream artifact {path} is {reason}; run stage '{producer}' first")


class SimulationError(PolicyError):
    """Simulation of one candidate failed; ``index`` is its position in the batch."""

    def __init__(self, message: str, index: int | None = None):
        self.index = index
        super().__init__(message)
