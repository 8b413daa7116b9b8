"""Exception types shared across the toolkit."""


class SqzlabError(ValueError):
    """Base class for invalid physical inputs and malformed data."""


class UnstableCavityError(SqzlabError):
    """The resonator geometry supports no stable Gaussian eigenmode."""


class AboveThresholdError(SqzlabError):
    """Pump power at or above the parametric oscillation threshold."""


class TraceFormatError(SqzlabError):
    """A trace file could not be parsed.

    ``line`` is the 1-based line number of the offending row when known.
    """

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ConfigError(SqzlabError):
    """Configuration file missing keys or violating an invariant."""


class FitConvergenceError(SqzlabError):
    """The least-squares fit stopped without meeting its convergence tests."""
