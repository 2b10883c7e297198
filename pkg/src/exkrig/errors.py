"""Exception types shared across the package."""


class ExkrigError(Exception):
    """Base class for all package-specific errors."""


class SingularSystem(ExkrigError):
    """The Kriging saddle system cannot be solved (duplicate points,
    rank-deficient polynomial constraints, or fewer points than basis
    functions)."""


class OrderMismatch(ExkrigError):
    """Basis degree is below the conditional-positive-definiteness order
    of the covariance, so the quadratic form is not guaranteed."""


class DuplicatePoint(ExkrigError):
    """A point to be added coincides (within tolerance) with an existing
    noise-free design point."""


class DegenerateVariance(ExkrigError):
    """An operation requiring strictly positive predictive variance was
    called where the variance is zero."""


class ExhaustedCandidates(ExkrigError):
    """No unevaluated candidate point remains for selection."""


class ConfigError(ExkrigError):
    """An experiment configuration is missing, malformed, or violates a
    module precondition."""
