"""Exception types shared across the package."""


class AveregError(Exception):
    """Base class for all package errors."""


class InputError(AveregError, ValueError):
    """Invalid argument values (non-finite data, dimension mismatch, bad parameters)."""


class ConfigurationError(AveregError, ValueError):
    """A configuration that can never produce a valid computation (e.g. divergent Landweber)."""


class NumericalError(AveregError, RuntimeError):
    """An iterative numerical procedure failed to converge within its bounds."""


class DegenerateBatchError(AveregError, RuntimeError):
    """A sample-based noise estimate is requested but all measurements coincide."""


class NonTerminationError(AveregError, RuntimeError):
    """The discrepancy search exhausted its iteration budget without stopping."""


class StudyError(AveregError, RuntimeError):
    """Too many replications of a study failed for its summaries to be meaningful."""


class ConfigError(AveregError, ValueError):
    """Study configuration file failed validation; carries every violation found."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("invalid configuration: " + "; ".join(self.violations))
