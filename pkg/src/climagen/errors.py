"""Exception hierarchy shared across the package.

The split matters for the service/CLI layers: DataError and its children map
to "bad input / bad model" responses (CLI exit code 2), UsageError to
malformed requests (exit 1); validation failures are regular results, not
exceptions.
"""


class ClimagenError(Exception):
    """Base class for all package errors."""


class UsageError(ClimagenError):
    """Malformed request: bad arguments, unknown names, inconsistent shapes."""


class DataError(ClimagenError):
    """Input data violates a precondition (range, order, emptiness)."""


class FitError(DataError):
    """A model fit could not be completed (degenerate data, no convergence)."""


class RegistryError(DataError):
    """Model registry lookup or round trip failed."""


class GenerationError(DataError):
    """Sequence generation failed (unresolvable models, inconsistent output)."""
