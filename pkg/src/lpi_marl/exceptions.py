"""Custom exception types for LPI-MARL."""

from __future__ import annotations


class LPIError(Exception):
    """Base exception for all LPI-MARL errors."""

    pass


class ConfigurationError(LPIError):
    """Invalid hyper-parameters or experiment configuration.

    Attributes:
        field: Dotted path of the offending field, when known
        line: Line number in the source config file, when known
    """

    def __init__(self, message: str, field: str | None = None, line: int | None = None) -> None:
        self.field = field
        self.line = line
        location = ""
        if field is not None:
            location = f" [field '{field}'"
            location += f", line {line}]" if line is not None else "]"
        super().__init__(f"{message}{location}")


class ModelError(LPIError):
    """Malformed graph, MDP or policy tables."""

    pass


class CapExceededError(LPIError):
    """An exhaustive enumeration would exceed its configured cap."""

    def __init__(self, what: str, size: int, cap: int) -> None:
        self.what = what
        self.size = size
        self.cap = cap
        super().__init__(f"{what}: {size} exceeds enumeration cap {cap}")


class ConvergenceError(LPIError):
    """An iterative solver exhausted its budget before reaching tolerance."""

    def __init__(self, message: str, budget: int, residual: float) -> None:
        self.budget = budget
        self.residual = residual
        super().__init__(f"{message} (budget {budget}, last residual {residual:.3e})")


class ChainStructureError(LPIError):
    """The induced Markov chain is reducible or periodic.

    Attributes:
        states: Global state indices of the violating class
    """

    def __init__(self, message: str, states: list[int] | None = None) -> None:
        self.states = list(states or [])
        super().__init__(message)


class RegularityError(LPIError):
    """A policy row has a zero entry, so no finite regularity constant exists."""

    pass


class CertificationError(LPIError):
    """The preconditions of a checked bound could not be certified."""

    pass


class SchemaError(LPIError):
    """A metrics CSV or checkpoint file does not match its schema."""

    pass
