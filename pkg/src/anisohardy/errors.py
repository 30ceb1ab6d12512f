"""Exception and warning types shared across the package."""


class AnisoError(Exception):
    """Base class for all library errors."""


class NotExpansive(AnisoError):
    pass


class SingularMatrix(AnisoError):
    pass


class ConstructionFailed(AnisoError):
    pass


class EmptyRegime(AnisoError):
    pass


class BracketFailure(AnisoError):
    pass


class SupportOverflow(AnisoError):
    pass


class GridMismatch(AnisoError):
    pass


class DegenerateSeed(AnisoError):
    pass


class GramIllConditioned(AnisoError):
    pass


class ConfigError(AnisoError):
    pass


class AliasingRisk(UserWarning):
    """Frequency outside the safe band of a sampling grid (reported, not fatal)."""
