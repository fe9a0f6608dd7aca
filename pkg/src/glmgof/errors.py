"""Exception types shared across the package."""


class GlmGofError(Exception):
    """Base class for all glmgof errors."""


class UnsupportedFamilyError(GlmGofError, ValueError):
    """Family/link combination outside the supported table, or a test applied
    to a family it is not defined for."""


class FamilyDomainError(GlmGofError, ValueError):
    """Mean value outside the family's mean domain."""


class SingularInformationError(GlmGofError):
    """X'WX numerically singular (reciprocal condition estimate < 1e-12)."""


class DomainEscapeError(GlmGofError):
    """A fitting iterate left the mean domain and step-halving failed."""


class InfeasibleGroupingError(GlmGofError):
    """Requested grouping cannot produce nonempty groups (typically ties in
    the linear predictor)."""


class DegenerateGroupError(GlmGofError):
    """A group has zero estimated variance, so the test statistic is undefined."""


class DegenerateRankError(GlmGofError):
    """The inter-group covariance matrix has rank zero."""
