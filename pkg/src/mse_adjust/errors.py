"""Exception hierarchy shared across the package.

``GraphError`` covers malformed inputs (unknown nodes, invariant
violations) and doubles as a ``ValueError``.  The remaining classes are
runtime domain failures that the CLI reports with exit status 1.
"""


class MseAdjustError(Exception):
    """Base class for all package-specific errors."""


class GraphError(MseAdjustError, ValueError):
    """Invalid graph structure or invalid node/set arguments."""


class DegenerateModelError(MseAdjustError):
    """A covariance block required by a formula is numerically singular."""


class SampleSizeError(MseAdjustError):
    """The sample size is too small for the requested computation."""


class CollinearityError(MseAdjustError):
    """A regression design matrix is rank deficient."""


class BootstrapDegeneracyError(MseAdjustError):
    """Too many bootstrap resamples failed the rank check."""


class EnumerationLimitError(MseAdjustError):
    """A combinatorial search would exceed the configured size limit."""
