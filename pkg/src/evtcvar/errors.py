"""Exception hierarchy for the evtcvar package."""


class EvtCvarError(Exception):
    """Base class for all package-specific errors."""


class ParameterError(EvtCvarError, ValueError):
    """A distribution or algorithm parameter is invalid (e.g. sigma <= 0)."""


class DomainError(EvtCvarError, ValueError):
    """An input lies outside the mathematical domain of an operation."""


class InsufficientDataError(EvtCvarError, ValueError):
    """Too few observations to carry out the requested computation."""


class NonIntegrableTailError(EvtCvarError, ValueError):
    """Tail index >= 1: the distribution has no finite mean, hence no CVaR."""


class SelectionFailureError(EvtCvarError, RuntimeError):
    """No threshold candidate survived the discard rules."""


class CiUnavailableError(EvtCvarError, RuntimeError):
    """A confidence interval could not be formed; the point estimate stands."""


class ConfigError(EvtCvarError, ValueError):
    """Invalid experiment or CLI configuration."""
