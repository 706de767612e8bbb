"""Exception hierarchy."""


class KernelLSQError(Exception):
    """Base class for all package errors."""


class SizeError(KernelLSQError, ValueError):
    """Too few points for the requested operation."""


class DegenerateSetError(KernelLSQError, ValueError):
    """Duplicate (or numerically coincident) points."""


class DomainError(KernelLSQError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class DivergentSeriesError(DomainError):
    """Kernel coefficients are not summable."""


class NotPositiveDefiniteError(KernelLSQError, ValueError):
    """A zonal series acquired a negative coefficient."""


class NumericalError(KernelLSQError, ArithmeticError):
    """Non-finite samples, singular systems or failed accuracy checks."""


class IllConditionedError(NumericalError):
    def __init__(self, message, condition):
        super().__init__(f"{message} (condition estimate {condition:.3e})")
        self.condition = condition


class NotUnisolventError(KernelLSQError, ValueError):
    """Centers do not determine the spherical-harmonic side conditions."""


class InsufficientSignalError(NumericalError):
    """Every sample fell below the noise floor."""


class NoCertificateError(NumericalError):
    def __init__(self, message, best_margin):
        super().__init__(f"{message} (best margin {best_margin:.3e})")
        self.best_margin = best_margin


class ConfigError(KernelLSQError, ValueError):
    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field
