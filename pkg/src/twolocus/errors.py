"""Exception types raised by the package."""


class TwoLocusError(Exception):
    """Base class for all package errors."""


class InvalidGridError(TwoLocusError, ValueError):
    pass


class DimensionError(TwoLocusError, ValueError):
    pass


class InvalidProfileError(TwoLocusError, ValueError):
    pass


class InvalidPairError(TwoLocusError, ValueError):
    pass


class StateInvariantError(TwoLocusError, ValueError):
    pass


class StepRejectedError(TwoLocusError, RuntimeError):
    pass


class UnsupportedRepresentationError(TwoLocusError, ValueError):
    pass


class EigenSolverError(TwoLocusError, RuntimeError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class ThresholdOutOfRangeError(TwoLocusError, RuntimeError):
    def __init__(self, message, lambda_max=None):
        super().__init__(message)
        self.lambda_max = lambda_max


class PreconditionError(TwoLocusError, ValueError):
    pass


class NonConvergenceError(TwoLocusError, RuntimeError):
    pass


class DegenerateEquilibriumError(TwoLocusError, RuntimeError):
    pass


class ConfigError(TwoLocusError, ValueError):
    """Raised for invalid scenario configuration; ``errors`` itemizes problems."""

    def __init__(self, errors):
        if isinstance(errors, str):
            errors = [errors]
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))
