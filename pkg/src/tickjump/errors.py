"""Exception hierarchy shared across the package.

Three broad families, mirrored by the CLI exit codes: configuration
problems, data problems, and numerical failures.
"""


class TickjumpError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(TickjumpError):
    """Invalid or inconsistent configuration."""


class DataError(TickjumpError):
    """Input data cannot be used as requested."""


class MalformedTradeId(DataError):
    """Trade identifier does not encode a valid timestamp."""


class InsufficientData(DataError):
    """Too few observations for the requested estimator or test."""


class MissingValue(DataError):
    """A required value is absent and no fallback is allowed."""


class NumericalError(TickjumpError):
    """A numerical routine failed to produce a usable result."""


class DegenerateVariance(NumericalError):
    """Variance estimate is zero or negative where positive is required."""


class DegenerateSequence(NumericalError):
    """Sequence statistic undefined (e.g. a runs test with one category)."""


class RankDeficientDesign(NumericalError):
    """Regression design matrix is not full column rank."""


class NonConvergence(NumericalError):
    """Iterative optimisation failed to reach the convergence tolerance."""
