"""Exception types raised by patchvm."""


class PatchVmError(Exception):
    """Base class for all patchvm errors."""


class DomainError(PatchVmError, ValueError):
    """An argument lies outside the domain of the model (d <= 0, r > Rm, ...)."""


class ConfigurationError(PatchVmError, ValueError):
    """Invalid parameters for a generator, grid, quadrature or run config."""


class FitError(PatchVmError, RuntimeError):
    """Log-distance fit cannot be performed on the given window."""


class ParseError(PatchVmError, ValueError):
    """Malformed input file. ``line`` is the 1-based line number, if known."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class NumericalError(PatchVmError, RuntimeError):
    """A numerical procedure failed (e.g. scan minimum at window edge)."""
