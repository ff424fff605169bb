"""Exception hierarchy shared across the package."""


class ForcedMapsError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(ForcedMapsError):
    """Invalid or incomplete run configuration."""


class PreconditionFailed(ForcedMapsError):
    """Entry conditions of an operation do not hold for the given inputs."""


class NotInvariant(ForcedMapsError):
    """A candidate restriction set is not invariant under the base map."""


class MismatchedFields(ForcedMapsError):
    """Two graph fields cannot be combined (samples, beta or escape masks differ)."""


class GraphEscaped(ForcedMapsError):
    """An orbit left the trapping strip while a bounded graph was required."""


class NoBracket(ForcedMapsError):
    """Endpoint signs do not enclose a root."""


class DomainError(ForcedMapsError, ValueError):
    """Argument outside the mathematical domain of a closed-form expression."""


class ValidationFailed(ForcedMapsError):
    """Sampled validation of a structural condition failed."""


class Blowup(ForcedMapsError):
    """Numerical integration left the configured safety bounds."""
