"""Exception and warning types shared across the package."""


class LogBanditsError(Exception):
    """Base class for all package errors."""


class InvalidInstance(LogBanditsError):
    pass


class InvalidConfig(LogBanditsError):
    pass


class NonFiniteLikelihood(LogBanditsError):
    pass


class TooFewSamples(LogBanditsError):
    pass


class NoSpanningSupport(LogBanditsError):
    pass


class EmptyBucket(LogBanditsError):
    pass


class PackingFailed(LogBanditsError):
    def __init__(self, message, achieved):
        super().__init__(message)
        self.achieved = achieved


class NotConverged(LogBanditsError):
    def __init__(self, message, residual):
        super().__init__(message)
        self.residual = residual


class NullSpaceWarning(UserWarning):
    """Query direction lies (partly) outside the span of the measurements."""


class BurnInWarning(UserWarning):
    """The burn-in condition of the confidence bound does not hold."""
