"""Exception and warning types shared across the package."""


class SafechainError(Exception):
    """Base class for all package-specific failures."""


class ConfigError(SafechainError):
    """Invalid configuration: bad keys, bad values, unknown scenario."""


class UnsafeInitialState(SafechainError):
    """The initial state lies on or outside the safe set (h1 <= 0)."""


class SingularInputMatrix(SafechainError):
    """Input matrix could not be inverted even after pivot regularization."""


class AssumptionViolation(SafechainError):
    """A structural requirement failed at runtime (e.g. vanished barrier gradient)."""


class InfeasibleConstraint(SafechainError):
    """Safety constraint is violated but has no input dependence left."""


class NumericError(SafechainError):
    """Non-finite values encountered during integration or estimation."""


class GainConditionWarning(UserWarning):
    """A configured gain fails one of the sufficient design conditions."""
