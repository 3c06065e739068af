"""Exception hierarchy shared by every module of the package."""


class FTSError(Exception):
    """Base class for all package errors."""


class DomainError(FTSError, ValueError):
    """An argument lies outside the domain of a numerical operator."""


class ConfigurationError(FTSError, ValueError):
    """Invalid model, schedule, certificate or scenario configuration.

    ``field`` names the offending configuration entry when known.
    """

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class IntegrationError(FTSError, RuntimeError):
    """Numerical integration failed.

    Attributes
    ----------
    t : float or None
        Last time at which the solution was still trustworthy.
    state : ndarray or None
        Snapshot of the state at failure (may contain non-finite values).
    """

    def __init__(self, message, t=None, state=None):
        super().__init__(message)
        self.t = t
        self.state = state
