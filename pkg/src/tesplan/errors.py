"""Exception types raised across the package."""


class TesplanError(Exception):
    """Base class for package errors."""


class MissingFile(TesplanError):
    pass


class SchemaError(TesplanError):
    def __init__(self, file, row, column, reason):
        self.file, self.row, self.column, self.reason = file, row, column, reason
        super().__init__(f"{file}: row {row}, column {column!r}: {reason}")


class DanglingReference(TesplanError):
    def __init__(self, ref, where=""):
        self.ref = ref
        super().__init__(f"unresolved reference {ref!r}" + (f" in {where}" if where else ""))


class ConfigError(TesplanError):
    pass


class DomainError(TesplanError, ValueError):
    pass


class DegenerateCluster(TesplanError):
    pass


class IterationLimit(TesplanError):
    pass


class NumericalBreakdown(TesplanError):
    pass


class Infeasible(TesplanError):
    pass


class TimeLimit(TesplanError):
    """Raised when branch-and-bound runs out of time; ``result`` holds the incumbent."""

    def __init__(self, result):
        self.result = result
        super().__init__(f"time limit reached (gap {result.gap:.3g})")


class NameCollision(TesplanError):
    pass


class ParseError(TesplanError):
    pass


class MissingVariable(TesplanError):
    pass
