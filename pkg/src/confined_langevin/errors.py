"""Exception types shared across the package."""


class ConfinedLangevinError(Exception):
    """Base class for all package-specific errors."""


class DimensionMismatchError(ConfinedLangevinError, ValueError):
    """A vector's dimension does not match the domain or dynamics."""


class InvalidRayError(ConfinedLangevinError, ValueError):
    """A ray query was issued with a zero direction vector."""


class OutOfDomainError(ConfinedLangevinError, ValueError):
    """A position that must lie in the closure of the domain does not."""


class ContractViolationError(ConfinedLangevinError, ValueError):
    """An argument violates a numeric contract (e.g. a non-unit normal)."""


class ConfigurationError(ConfinedLangevinError, ValueError):
    """Inconsistent or unsupported run configuration."""


class NumericError(ConfinedLangevinError, ArithmeticError):
    """A non-finite value appeared where a finite one is required.

    ``location`` carries the offending point when known.
    """

    def __init__(self, message, location=None):
        super().__init__(message)
        self.location = location


class ToleranceError(ConfinedLangevinError, ArithmeticError):
    """A quadrature or iterative routine failed to reach its tolerance."""


class EstimationFailureError(ConfinedLangevinError, RuntimeError):
    """No usable trajectories survived; nothing to estimate."""


class UnderpoweredStudyError(ConfinedLangevinError, RuntimeError):
    """Too few statistically significant rows to fit a convergence slope."""


class EmptyStatisticsError(ConfinedLangevinError, RuntimeError):
    """A statistic was requested from an empty event set."""


class SingularConfigurationError(ConfinedLangevinError, ArithmeticError):
    """Evaluation requested at a measure-zero switching configuration."""
