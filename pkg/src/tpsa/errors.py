"""Exception types shared across the package."""


class TpsaError(Exception):
    """Base class for all errors raised by this package."""


class InvalidArgumentError(TpsaError, ValueError):
    """An argument violates a documented precondition."""


class DegenerateGridError(TpsaError):
    """A grid has an inverted or degenerate cell (some distance is not positive)."""


class NonDegeneracyError(InvalidArgumentError):
    """The fluid subsystem is simultaneously impermeable, incompressible and decoupled."""


class SolverError(TpsaError):
    """The linear solver failed to meet its residual contract."""


class SingularSystemError(SolverError):
    """The system matrix is singular or numerically rank deficient.

    Attributes:
        location: Index of the offending unknown (pivot column) if known.
    """

    def __init__(self, message: str, location: int | None = None):
        super().__init__(message)
        self.location = location


class MeshFormatError(TpsaError):
    """A mesh file could not be parsed.

    Attributes:
        line: 1-based line number where parsing failed, if known.
    """

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
