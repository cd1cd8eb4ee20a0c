"""Exception hierarchy shared by all modules.

The CLI maps these onto distinct exit codes: config parsing -> 2,
validation -> 3, numerical failures -> 4.
"""


class PlaposcError(Exception):
    """Base class for all library errors."""


class ConfigError(PlaposcError):
    """Malformed configuration input (reported with line number)."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ValidationError(PlaposcError):
    """A declared invariant does not hold (names the invariant and witness)."""


class DomainError(ValidationError):
    """Argument outside the mathematical domain of an operation."""


class NumericalError(PlaposcError):
    """Quadrature / integration / optimization failed to reach tolerance."""


class ConstructionError(NumericalError):
    """A variational construction failed (e.g. maximizer on the boundary)."""
